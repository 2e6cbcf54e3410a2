"""Readers for the stablefield CSV/JSON output schemas.

The plotting layer never recomputes statistics: it renders exactly what
the experiment runs emitted.  Readers validate headers and name the
offending file or column on mismatch.
"""

from __future__ import annotations

import csv
import hashlib
import json
import re
from pathlib import Path

import numpy as np


class SchemaError(ValueError):
    """Input file does not match the documented schema."""


def read_csv_columns(path, required: tuple[str, ...]) -> dict[str, np.ndarray]:
    """Load a stablefield CSV, requiring the named leading columns."""
    path = Path(path)
    try:
        with open(path, "r", encoding="utf-8", newline="") as fh:
            reader = csv.reader(fh)
            try:
                header = next(reader)
            except StopIteration:
                raise SchemaError(f"{path} is empty") from None
            rows = list(reader)
    except FileNotFoundError:
        raise SchemaError(f"required input {path} does not exist") from None
    for col in required:
        if col not in header:
            raise SchemaError(f"{path} is missing required column {col!r}")
    if not rows:
        raise SchemaError(f"{path} has a header but no data rows")
    table: dict[str, np.ndarray] = {}
    for j, name in enumerate(header):
        values = [row[j] for row in rows]
        try:
            table[name] = np.array([float(v) for v in values])
        except ValueError:
            table[name] = np.array(values)
    return table


def read_summary(run_dir) -> dict:
    path = Path(run_dir) / "summary.json"
    if not path.exists():
        raise SchemaError(f"{path} not found; expected a stablefield run directory")
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def read_posterior(run_dir) -> dict:
    path = Path(run_dir) / "posterior.json"
    if not path.exists():
        raise SchemaError(f"{path} not found; expected a posterior run directory")
    with open(path, "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    for key in ("ess", "estimates"):
        if key not in payload:
            raise SchemaError(f"{path} is missing required key {key!r}")
    return payload


def config_fingerprint(run_dir) -> str:
    """Short hash of the resolved config, for the figure footer."""
    path = Path(run_dir) / "config.resolved.json"
    if not path.exists():
        return "unknown"
    digest = hashlib.sha256(path.read_bytes()).hexdigest()
    return digest[:12]


def run_footer(run_dir) -> str:
    """seed and config hash of a run, embedded under every figure."""
    try:
        seed = read_summary(run_dir).get("seed", "?")
    except SchemaError:
        seed = "?"
    return f"seed={seed} config={config_fingerprint(run_dir)}"


_FIELD_NAME = re.compile(r"field_d(?P<dim>\d)_alpha(?P<alpha>[-0-9.e]+)_seed(?P<seed>\d+)\.csv$")


def find_field_csvs(run_dir) -> list[tuple[float, int, Path]]:
    """Field CSVs of a sample-field run, sorted by (alpha, seed)."""
    run_dir = Path(run_dir)
    found = []
    for path in sorted(run_dir.glob("field_d*_alpha*_seed*.csv")):
        match = _FIELD_NAME.search(path.name)
        if match:
            found.append((float(match.group("alpha")), int(match.group("seed")), path))
    if not found:
        raise SchemaError(f"no field CSVs found in {run_dir}")
    found.sort(key=lambda item: (item[0], item[1]))
    return found
