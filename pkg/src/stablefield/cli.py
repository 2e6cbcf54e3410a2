"""Experiment orchestration for the stable-field laboratory.

Every subcommand reads one JSON config file, resolves defaults, echoes
the effective config into the output directory, runs the corresponding
library operation with a seed-derived stream, and writes CSV rows plus
a JSON summary.  Outputs are bit-identical across runs and thread
counts for a fixed seed.  Exit codes: 0 success, 2 config or parameter
validation failure, 3 threshold failure under ``--check``.

See docs/formats.md for the config, CSV and JSON schemas.
"""

from __future__ import annotations

import argparse
import json
import math
import subprocess
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .bayes import (
    CauchyIID,
    Composite,
    GaussianIID,
    LocalAverages,
    PointEvals,
    posterior_convergence_study,
    posterior_expectation,
    posterior_importance,
)
from .diagnostics import (
    energy_bound_scan,
    fdd_convergence_study,
    lebesgue_point_study,
    local_avg_convergence_study,
    modulus_estimate,
    tn_convergence_study,
)
from .function_space import (
    Domain,
    MonteCarloConfig,
    QuadratureConfig,
    SobolevParams,
    validate_params,
)
from .network import (
    NetworkConfig,
    clipped_linear,
    evaluate_grid,
    holder_power,
    sample_network,
    tanh_activation,
    with_width,
    write_field_csv,
)
from .rng import RngStream

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_CHECK_FAILED = 3

_DEEP_WIDTH_CAP = 1 << 14

_PAPER_SCALES = (1.0, 0.0, 5.0, 2.0)
_DEFAULT_DISTANCES = [2.0 ** (-k) for k in range(10, 2, -1)]


class CliError(Exception):
    """Config or validation problem; maps to exit code 2."""


def _version_string() -> str:
    try:
        out = subprocess.run(
            ["git", "describe", "--always", "--dirty"],
            capture_output=True,
            text=True,
            timeout=5,
        )
        if out.returncode == 0 and out.stdout.strip():
            return out.stdout.strip()
    except (OSError, subprocess.SubprocessError):
        pass
    return f"stablefield-{__version__}"


def _take(cfg: dict, spec: dict, context: str) -> dict:
    """Resolve defaults and reject unknown keys (no silent typo tolerance)."""
    unknown = set(cfg) - set(spec) - {"schema"}
    if unknown:
        raise CliError(f"unknown key(s) in {context}: {', '.join(sorted(unknown))}")
    out = {}
    for key, default in spec.items():
        if default is _REQUIRED and key not in cfg:
            raise CliError(f"missing required key {key!r} in {context}")
        out[key] = cfg.get(key, default)
    return out


_REQUIRED = object()


def _parse_activation(spec: dict):
    spec = dict(spec)
    kind = spec.pop("kind", None)
    if kind == "clipped_linear":
        extra = spec
    elif kind == "tanh":
        extra = spec
    elif kind == "holder_power":
        exponent = spec.pop("exponent", None)
        if exponent is None:
            raise CliError("holder_power activation needs an 'exponent'")
        if spec:
            raise CliError(f"unknown activation key(s): {', '.join(spec)}")
        return holder_power(float(exponent))
    else:
        raise CliError(f"unknown activation kind {kind!r}")
    if extra:
        raise CliError(f"unknown activation key(s): {', '.join(extra)}")
    return clipped_linear() if kind == "clipped_linear" else tanh_activation()


def _parse_network(spec: dict, context: str = "network") -> NetworkConfig:
    got = _take(
        spec,
        {
            "alpha": _REQUIRED,
            "input_dim": 1,
            "widths": _REQUIRED,
            "scales": list(_PAPER_SCALES),
            "activation": {"kind": "clipped_linear"},
        },
        context,
    )
    widths = tuple(int(w) for w in got["widths"])
    if len(widths) >= 2 and any(w > _DEEP_WIDTH_CAP for w in widths):
        raise CliError(f"deep hidden widths are capped at {_DEEP_WIDTH_CAP} per layer")
    try:
        return NetworkConfig(
            alpha=float(got["alpha"]),
            input_dim=int(got["input_dim"]),
            widths=widths,
            scales=tuple(float(s) for s in got["scales"]),
            activation=_parse_activation(got["activation"]),
        )
    except ValueError as exc:
        raise CliError(str(exc)) from exc


def _parse_domain(spec: dict) -> Domain:
    spec = dict(spec)
    kind = spec.pop("kind", None)
    try:
        if kind == "interval":
            return Domain.interval(float(spec.pop("lower")), float(spec.pop("upper")))
        if kind == "ball":
            return Domain.ball(spec.pop("center"), float(spec.pop("radius")))
    except (KeyError, ValueError) as exc:
        raise CliError(f"bad domain spec: {exc}") from exc
    raise CliError(f"unknown domain kind {kind!r}")


_COMPOSITE_MAPS = {
    "tanh": np.tanh,
    "abs": np.abs,
    "identity": lambda x: x,
}


def _parse_forward(spec: dict):
    spec = dict(spec)
    kind = spec.pop("type", None)
    if kind == "point_evals":
        points = tuple(tuple(float(c) for c in pt) for pt in spec.pop("points"))
        radius = float(spec.pop("radius", 0.0))
        if spec:
            raise CliError(f"unknown forward key(s): {', '.join(spec)}")
        return PointEvals(points, radius)
    if kind == "local_averages":
        balls = tuple(
            (tuple(float(c) for c in center), float(radius))
            for center, radius in spec.pop("balls")
        )
        if spec:
            raise CliError(f"unknown forward key(s): {', '.join(spec)}")
        return LocalAverages(balls)
    if kind == "composite":
        name = spec.pop("map")
        if name not in _COMPOSITE_MAPS:
            raise CliError(f"unknown composite map {name!r}; choose from {sorted(_COMPOSITE_MAPS)}")
        inner = tuple(_parse_forward(op) for op in spec.pop("inner"))
        if spec:
            raise CliError(f"unknown forward key(s): {', '.join(spec)}")
        dim = sum(op.output_dim for op in inner)
        return Composite(inner, _COMPOSITE_MAPS[name], dim, 1.0)
    raise CliError(f"unknown forward type {kind!r}")


def _parse_noise(spec: dict, dim: int):
    spec = dict(spec)
    kind = spec.pop("kind", None)
    scale = float(spec.pop("scale", 1.0))
    if spec:
        raise CliError(f"unknown noise key(s): {', '.join(spec)}")
    if kind == "gaussian":
        return GaussianIID(scale, dim)
    if kind == "cauchy":
        return CauchyIID(scale, dim)
    raise CliError(f"unknown noise kind {kind!r}")


def _fmt(value) -> str:
    if isinstance(value, float):
        # plain-float repr: shortest round-trip decimals (np.float64 wraps
        # its repr in numpy >= 2)
        return repr(float(value))
    return str(value)


def _write_csv(path: Path, header: list[str], rows: list[tuple]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(cell) for cell in row) + "\n")


def _write_json(path: Path, payload: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _summary(config: dict, seed: int, **results) -> dict:
    return {"version": _version_string(), "seed": seed, "config": config, **results}


def _load_config(path: str, expected_schema: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            cfg = json.load(fh)
    except FileNotFoundError as exc:
        raise CliError(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise CliError(f"config file {path} is not valid JSON: {exc}") from exc
    schema = cfg.get("schema", expected_schema)
    if schema != expected_schema:
        raise CliError(f"config schema {schema!r} does not match {expected_schema!r}")
    return cfg


def _prepare_out(args, resolved: dict) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_json(out / "config.resolved.json", resolved)
    return out


# ---------------------------------------------------------------------------
# subcommands


def cmd_sample_field(args) -> int:
    cfg = _load_config(args.config, "stablefield.sample_field/1")
    got = _take(
        cfg,
        {
            "alphas": [0.5, 1.0, 1.5, 1.9],
            "input_dim": 1,
            "width": 100_000,
            "scales": list(_PAPER_SCALES),
            "activation": {"kind": "clipped_linear"},
            "grid_points": 2001,
            "resolution": 201,
            "seeds": [0],
        },
        "sample_field config",
    )
    d = int(got["input_dim"])
    if d not in (1, 2):
        raise CliError("sample-field renders d in {1, 2} only")
    seed = args.seed if args.seed is not None else int(got["seeds"][0])
    seeds = [seed] if args.seed is not None else [int(s) for s in got["seeds"]]

    if d == 1:
        grid = np.linspace(-1.0, 1.0, int(got["grid_points"]))[:, None]
        domain = Domain.interval(-1.0, 1.0)
    else:
        res = int(got["resolution"])
        axis = np.linspace(-1.0, 1.0, res)
        mesh = np.stack(np.meshgrid(axis, axis, indexing="ij"), axis=-1).reshape(-1, 2)
        domain = Domain.ball((0.0, 0.0), 1.0)
        grid = mesh[domain.contains(mesh)]

    resolved = {**got, "input_dim": d, "seeds": seeds, "schema": cfg.get("schema")}
    out = _prepare_out(args, resolved)
    files = []
    for alpha in got["alphas"]:
        config = NetworkConfig(
            alpha=float(alpha),
            input_dim=d,
            widths=(int(got["width"]),),
            scales=tuple(float(s) for s in got["scales"]),
            activation=_parse_activation(got["activation"]),
        )
        for s in seeds:
            net = sample_network(config, RngStream(s).substream("field", repr(float(alpha))))
            sample = evaluate_grid(net, grid, domain)
            name = f"field_d{d}_alpha{float(alpha)!r}_seed{s}.csv"
            write_field_csv(sample, out / name)
            files.append(name)
    _write_json(out / "summary.json", _summary(resolved, seed, files=files))
    return EXIT_OK


def cmd_validate_params(args) -> int:
    cfg = _load_config(args.config, "stablefield.validate_params/1")
    got = _take(
        cfg,
        {
            "d": _REQUIRED,
            "lambda": _REQUIRED,
            "alpha": _REQUIRED,
            "s": _REQUIRED,
            "p": _REQUIRED,
            "s2": None,
            "p2": None,
        },
        "validate_params config",
    )
    report = validate_params(
        int(got["d"]),
        float(got["lambda"]),
        float(got["alpha"]),
        float(got["s"]),
        float(got["p"]),
        None if got["s2"] is None else float(got["s2"]),
        None if got["p2"] is None else float(got["p2"]),
    )
    resolved = {**got, "schema": cfg.get("schema")}
    out = _prepare_out(args, resolved)
    payload = _summary(
        resolved,
        args.seed if args.seed is not None else 0,
        checks=[
            {"name": c.name, "passed": c.passed, "detail": c.detail} for c in report.checks
        ],
        passed=report.passed,
    )
    _write_json(out / "validation.json", payload)
    if not report.passed:
        for c in report.failures():
            print(f"FAIL {c.name}: {c.detail}", file=sys.stderr)
        return EXIT_INVALID
    return EXIT_OK


def cmd_modulus(args) -> int:
    cfg = _load_config(args.config, "stablefield.modulus/1")
    got = _take(
        cfg,
        {
            "network": _REQUIRED,
            "p": _REQUIRED,
            "base_point": [0.0],
            "distances": _DEFAULT_DISTANCES,
            "reps": 2000,
            "seed": 0,
            "slope_range": None,
        },
        "modulus config",
    )
    network = _parse_network(got["network"])
    seed = args.seed if args.seed is not None else int(got["seed"])
    try:
        report = modulus_estimate(
            network,
            float(got["p"]),
            got["base_point"],
            [float(x) for x in got["distances"]],
            int(got["reps"]),
            RngStream(seed).substream("modulus"),
            threads=args.threads,
        )
    except ValueError as exc:
        raise CliError(str(exc)) from exc
    resolved = {**got, "schema": cfg.get("schema"), "seed": seed}
    out = _prepare_out(args, resolved)
    _write_csv(
        out / "modulus.csv",
        ["distance", "moment", "se", "median"],
        [
            (d, m, s, md)
            for d, m, s, md in zip(report.distances, report.moments, report.moment_ses, report.medians)
        ],
    )
    _write_json(
        out / "summary.json",
        _summary(
            resolved,
            seed,
            slope=report.slope,
            slope_se=report.slope_se,
            intercept=report.intercept,
            p=report.p,
            widths=list(report.widths),
        ),
    )
    if args.check and got["slope_range"] is not None:
        lo, hi = (float(x) for x in got["slope_range"])
        if not (lo <= report.slope <= hi):
            print(f"CHECK FAILED: slope {report.slope:.4f} outside [{lo}, {hi}]", file=sys.stderr)
            return EXIT_CHECK_FAILED
    return EXIT_OK


def cmd_norm_scan(args) -> int:
    cfg = _load_config(args.config, "stablefield.norm_scan/1")
    got = _take(
        cfg,
        {
            "network": _REQUIRED,
            "domain": {"kind": "interval", "lower": -1.0, "upper": 1.0},
            "s": _REQUIRED,
            "p": _REQUIRED,
            "widths": _REQUIRED,
            "reps": 200,
            "pairs": 2048,
            "points": 1024,
            "seed": 0,
        },
        "norm_scan config",
    )
    network = _parse_network(got["network"])
    domain = _parse_domain(got["domain"])
    seed = args.seed if args.seed is not None else int(got["seed"])
    try:
        params = SobolevParams(float(got["s"]), float(got["p"]), domain.dim)
        report = energy_bound_scan(
            network,
            domain,
            params,
            [int(w) for w in got["widths"]],
            int(got["reps"]),
            MonteCarloConfig(int(got["pairs"]), int(got["points"])),
            RngStream(seed).substream("scan"),
            threads=args.threads,
        )
    except ValueError as exc:
        raise CliError(str(exc)) from exc
    resolved = {**got, "schema": cfg.get("schema"), "seed": seed}
    out = _prepare_out(args, resolved)
    _write_csv(
        out / "energy_scan.csv",
        ["width", "mean_energy", "se", "median_energy"],
        [(r.width, r.mean_energy, r.se, r.median_energy) for r in report.rows],
    )
    _write_json(
        out / "summary.json",
        _summary(
            resolved,
            seed,
            slope=report.slope,
            slope_se=report.slope_se,
            max_min_ratio=report.max_min_ratio,
        ),
    )
    if args.check:
        ok = report.max_min_ratio < 2.0 and abs(report.slope) < 0.05
        if not ok:
            print(
                f"CHECK FAILED: ratio {report.max_min_ratio:.3f} (<2 required), "
                f"slope {report.slope:.4f} (|.|<0.05 required)",
                file=sys.stderr,
            )
            return EXIT_CHECK_FAILED
    return EXIT_OK


def _check_convergence(report) -> tuple[bool, str]:
    stats = np.asarray(report.statistics)
    errs = np.asarray(report.errors)
    for i in range(len(stats) - 1):
        slack = 2.0 * math.sqrt(errs[i] ** 2 + errs[i + 1] ** 2)
        if stats[i + 1] > stats[i] + slack:
            return False, f"statistic increases at width {report.widths[i + 1]}"
    # both sides of the final comparison are noisy near-zero statistics,
    # so the factor-2 rule carries the bootstrap band of each
    slack = 2.0 * math.sqrt(errs[-1] ** 2 + (2.0 * report.baseline_error) ** 2)
    if stats[-1] > 2.0 * report.baseline + slack:
        return False, (
            f"final statistic {stats[-1]:.5g} exceeds twice the baseline "
            f"{report.baseline:.5g} beyond the bootstrap band"
        )
    return True, ""


def _run_convergence_command(args, schema: str, local_avg: bool) -> int:
    cfg = _load_config(args.config, schema)
    spec = {
        "network": _REQUIRED,
        "widths": _REQUIRED,
        "h_ref": _REQUIRED,
        "reps": 4000,
        "n_boot": 200,
        "seed": 0,
    }
    if local_avg:
        spec.update(
            {
                "domain": {"kind": "interval", "lower": -1.0, "upper": 1.0},
                "balls": _REQUIRED,
                "quad_nodes": 64,
            }
        )
    else:
        spec["points"] = _REQUIRED
    got = _take(cfg, spec, f"{schema} config")
    network = _parse_network(got["network"])
    seed = args.seed if args.seed is not None else int(got["seed"])
    stream = RngStream(seed).substream("convergence")
    try:
        if local_avg:
            domain = _parse_domain(got["domain"])
            balls = [(np.asarray(c, dtype=float), float(r)) for c, r in got["balls"]]
            report = local_avg_convergence_study(
                network,
                domain,
                balls,
                [int(w) for w in got["widths"]],
                int(got["h_ref"]),
                int(got["reps"]),
                stream,
                QuadratureConfig("grid", int(got["quad_nodes"])),
                int(got["n_boot"]),
                threads=args.threads,
            )
        else:
            report = fdd_convergence_study(
                network,
                got["points"],
                [int(w) for w in got["widths"]],
                int(got["h_ref"]),
                int(got["reps"]),
                stream,
                int(got["n_boot"]),
                threads=args.threads,
            )
    except ValueError as exc:
        raise CliError(str(exc)) from exc
    resolved = {**got, "schema": cfg.get("schema"), "seed": seed}
    out = _prepare_out(args, resolved)
    _write_csv(
        out / "convergence.csv",
        ["width", "energy_distance", "se"],
        list(zip(report.widths, report.statistics, report.errors)),
    )
    _write_json(
        out / "summary.json",
        _summary(
            resolved,
            seed,
            baseline=report.baseline,
            baseline_se=report.baseline_error,
            h_ref=report.h_ref,
            meta=report.meta,
        ),
    )
    if args.check:
        ok, why = _check_convergence(report)
        if not ok:
            print(f"CHECK FAILED: {why}", file=sys.stderr)
            return EXIT_CHECK_FAILED
    return EXIT_OK


def cmd_fdd(args) -> int:
    return _run_convergence_command(args, "stablefield.fdd/1", local_avg=False)


def cmd_local_avg(args) -> int:
    return _run_convergence_command(args, "stablefield.local_avg/1", local_avg=True)


def cmd_tn_study(args) -> int:
    cfg = _load_config(args.config, "stablefield.tn_study/1")
    got = _take(
        cfg,
        {
            "network": _REQUIRED,
            "domain": {"kind": "interval", "lower": 0.0, "upper": 1.0},
            "s": _REQUIRED,
            "p": _REQUIRED,
            "levels": [3, 4, 5, 6, 7],
            "reps": 20,
            "quad_nodes": 64,
            "grid_cells": 1024,
            "seed": 0,
        },
        "tn_study config",
    )
    network = _parse_network(got["network"])
    domain = _parse_domain(got["domain"])
    seed = args.seed if args.seed is not None else int(got["seed"])
    try:
        params = SobolevParams(float(got["s"]), float(got["p"]), domain.dim)
        rows = tn_convergence_study(
            network,
            domain,
            params,
            [int(n) for n in got["levels"]],
            int(got["reps"]),
            RngStream(seed).substream("tn"),
            QuadratureConfig("grid", int(got["quad_nodes"])),
            int(got["grid_cells"]),
            threads=args.threads,
        )
    except ValueError as exc:
        raise CliError(str(exc)) from exc
    resolved = {**got, "schema": cfg.get("schema"), "seed": seed}
    out = _prepare_out(args, resolved)
    _write_csv(
        out / "tn_study.csv",
        ["level", "median_distance", "mean_distance"],
        [(r.level, r.median_distance, r.mean_distance) for r in rows],
    )
    medians = [r.median_distance for r in rows]
    _write_json(
        out / "summary.json",
        _summary(resolved, seed, medians=medians, strictly_decreasing=bool(np.all(np.diff(medians) < 0))),
    )
    if args.check and not np.all(np.diff(medians) < 0):
        print("CHECK FAILED: median reconstruction error is not strictly decreasing", file=sys.stderr)
        return EXIT_CHECK_FAILED
    return EXIT_OK


def cmd_lebesgue(args) -> int:
    cfg = _load_config(args.config, "stablefield.lebesgue/1")
    got = _take(
        cfg,
        {
            "network": _REQUIRED,
            "domain": {"kind": "interval", "lower": -1.0, "upper": 1.0},
            "x": [0.1],
            "p": _REQUIRED,
            "radii": [2.0 ** (-k) for k in range(3, 10)],
            "widths": [256, 16384],
            "reps": 2000,
            "quad_nodes": 64,
            "seed": 0,
        },
        "lebesgue config",
    )
    base = _parse_network(got["network"])
    domain = _parse_domain(got["domain"])
    seed = args.seed if args.seed is not None else int(got["seed"])
    tables = {}
    try:
        for w in got["widths"]:
            rows = lebesgue_point_study(
                with_width(base, int(w)),
                domain,
                got["x"],
                float(got["p"]),
                [float(r) for r in got["radii"]],
                int(got["reps"]),
                RngStream(seed).substream("lebesgue", int(w)),
                QuadratureConfig("grid", int(got["quad_nodes"])),
                threads=args.threads,
            )
            tables[int(w)] = rows
    except ValueError as exc:
        raise CliError(str(exc)) from exc
    resolved = {**got, "schema": cfg.get("schema"), "seed": seed}
    out = _prepare_out(args, resolved)
    csv_rows = [
        (w, r.radius, r.mean, r.se, r.median)
        for w, rows in sorted(tables.items())
        for r in rows
    ]
    _write_csv(out / "lebesgue.csv", ["width", "radius", "mean", "se", "median"], csv_rows)
    _write_json(out / "summary.json", _summary(resolved, seed, widths=sorted(tables)))
    if args.check:
        for w, rows in tables.items():
            means = np.array([r.mean for r in rows])
            ses = np.array([r.se for r in rows])
            for i in range(len(rows) - 1):
                slack = 2.0 * math.sqrt(ses[i] ** 2 + ses[i + 1] ** 2)
                if means[i + 1] < means[i] - slack:
                    print(f"CHECK FAILED: width {w} not decreasing toward r=0", file=sys.stderr)
                    return EXIT_CHECK_FAILED
        ws = sorted(tables)
        for r_a, r_b in zip(tables[ws[0]], tables[ws[-1]]):
            ratio = max(r_a.mean, r_b.mean) / min(r_a.mean, r_b.mean)
            if ratio > 2.0:
                print(
                    f"CHECK FAILED: widths disagree by factor {ratio:.2f} at radius {r_a.radius}",
                    file=sys.stderr,
                )
                return EXIT_CHECK_FAILED
    return EXIT_OK


def cmd_posterior(args) -> int:
    cfg = _load_config(args.config, "stablefield.posterior/1")
    got = _take(
        cfg,
        {
            "network": _REQUIRED,
            "domain": {"kind": "interval", "lower": -1.0, "upper": 1.0},
            "observation_file": _REQUIRED,
            "functionals": {},
            "n_draws": 100_000,
            "quad_nodes": 64,
            "dump_ensemble": False,
            "seed": 0,
        },
        "posterior config",
    )
    network = _parse_network(got["network"])
    domain = _parse_domain(got["domain"])
    obs_path = Path(got["observation_file"])
    if not obs_path.is_absolute():
        obs_path = Path(args.config).parent / obs_path
    try:
        with open(obs_path, "r", encoding="utf-8") as fh:
            obs = json.load(fh)
    except FileNotFoundError as exc:
        raise CliError(f"observation file not found: {obs_path}") from exc
    obs_got = _take(obs, {"forward": _REQUIRED, "u": _REQUIRED, "noise": _REQUIRED}, "observation file")
    forward = _parse_forward(obs_got["forward"])
    u = [float(x) for x in obs_got["u"]]
    noise = _parse_noise(obs_got["noise"], len(u))
    functionals = {name: _parse_forward(spec) for name, spec in got["functionals"].items()}
    seed = args.seed if args.seed is not None else int(got["seed"])

    try:
        ensemble = posterior_importance(
            network,
            domain,
            forward,
            noise,
            u,
            int(got["n_draws"]),
            RngStream(seed).substream("posterior"),
            QuadratureConfig("grid", int(got["quad_nodes"])),
            functionals=functionals,
            threads=args.threads,
        )
    except ValueError as exc:
        raise CliError(str(exc)) from exc

    estimates = {}
    for name in functionals:
        est, se = posterior_expectation(ensemble, name)
        estimates[name] = {"estimate": est, "se": se}
    resolved = {**got, "schema": cfg.get("schema"), "seed": seed}
    out = _prepare_out(args, resolved)
    _write_json(
        out / "posterior.json",
        _summary(resolved, seed, ess=ensemble.ess, n_draws=ensemble.size, estimates=estimates),
    )
    if got["dump_ensemble"]:
        header = ["log_weight"] + [f"g_{j + 1}" for j in range(ensemble.forward_images.shape[1])]
        header += list(functionals)
        rows = []
        for i in range(ensemble.size):
            row = [float(ensemble.log_weights[i])]
            row += [float(x) for x in ensemble.forward_images[i]]
            row += [float(ensemble.functional_values[name][i]) for name in functionals]
            rows.append(tuple(row))
        _write_csv(out / "ensemble.csv", header, rows)
    return EXIT_OK


def cmd_posterior_convergence(args) -> int:
    cfg = _load_config(args.config, "stablefield.posterior_convergence/1")
    got = _take(
        cfg,
        {
            "network": _REQUIRED,
            "domain": {"kind": "interval", "lower": -1.0, "upper": 1.0},
            "widths": _REQUIRED,
            "h_ref": _REQUIRED,
            "forward": _REQUIRED,
            "noise": _REQUIRED,
            "u": _REQUIRED,
            "functionals": _REQUIRED,
            "n_draws": 2000,
            "quad_nodes": 64,
            "seed": 0,
        },
        "posterior_convergence config",
    )
    network = _parse_network(got["network"])
    domain = _parse_domain(got["domain"])
    forward = _parse_forward(got["forward"])
    u = [float(x) for x in got["u"]]
    noise = _parse_noise(got["noise"], len(u))
    functionals = {name: _parse_forward(spec) for name, spec in got["functionals"].items()}
    seed = args.seed if args.seed is not None else int(got["seed"])
    try:
        report = posterior_convergence_study(
            network,
            domain,
            [int(w) for w in got["widths"]],
            int(got["h_ref"]),
            forward,
            noise,
            u,
            functionals,
            int(got["n_draws"]),
            RngStream(seed).substream("postconv"),
            QuadratureConfig("grid", int(got["quad_nodes"])),
            threads=args.threads,
        )
    except ValueError as exc:
        raise CliError(str(exc)) from exc
    resolved = {**got, "schema": cfg.get("schema"), "seed": seed}
    out = _prepare_out(args, resolved)
    rows = []
    disc = report.discrepancies
    pooled = report.pooled_ses
    for i, w in enumerate(report.widths):
        for j, name in enumerate(report.functional_names):
            rows.append(
                (
                    w,
                    name,
                    float(report.estimates[i, j]),
                    float(report.ses[i, j]),
                    float(disc[i, j]),
                    float(pooled[i, j]),
                    float(report.ess_per_width[i]),
                )
            )
    _write_csv(
        out / "posterior_convergence.csv",
        ["width", "functional", "estimate", "se", "discrepancy", "pooled_se", "ess"],
        rows,
    )
    _write_json(
        out / "summary.json",
        _summary(
            resolved,
            seed,
            h_ref=report.h_ref,
            ess_ref=report.ess_ref,
            ref_estimates={
                name: float(report.ref_estimates[j])
                for j, name in enumerate(report.functional_names)
            },
        ),
    )
    if args.check:
        for j, name in enumerate(report.functional_names):
            d_col = disc[:, j]
            p_col = pooled[:, j]
            for i in range(len(d_col) - 1):
                slack = 2.0 * math.sqrt(p_col[i] ** 2 + p_col[i + 1] ** 2)
                if d_col[i + 1] > d_col[i] + slack:
                    print(
                        f"CHECK FAILED: {name} discrepancy increases at width "
                        f"{report.widths[i + 1]}",
                        file=sys.stderr,
                    )
                    return EXIT_CHECK_FAILED
            if d_col[-1] > 3.0 * p_col[-1]:
                print(
                    f"CHECK FAILED: {name} final discrepancy {d_col[-1]:.4g} exceeds "
                    f"3 pooled se {3 * p_col[-1]:.4g}",
                    file=sys.stderr,
                )
                return EXIT_CHECK_FAILED
    return EXIT_OK


# ---------------------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stablefield",
        description="Reproducible experiments on heavy-tailed stable neural random fields",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    commands = {
        "sample-field": (cmd_sample_field, "render sample fields over a grid per stability index"),
        "validate-params": (cmd_validate_params, "check the admissibility inequalities"),
        "modulus": (cmd_modulus, "increment-moment scaling study"),
        "norm-scan": (cmd_norm_scan, "width-uniform smoothness energy scan"),
        "fdd": (cmd_fdd, "finite-dimensional convergence study"),
        "local-avg": (cmd_local_avg, "local-average convergence study"),
        "tn-study": (cmd_tn_study, "partition-of-unity reconstruction study"),
        "lebesgue": (cmd_lebesgue, "shrinking local-average (Lebesgue point) study"),
        "posterior": (cmd_posterior, "importance-sampling posterior for an observation file"),
        "posterior-convergence": (cmd_posterior_convergence, "posterior stability across widths"),
    }
    for name, (fn, help_text) in commands.items():
        sp = sub.add_parser(name, help=help_text)
        sp.add_argument("--config", required=True, help="JSON experiment config")
        sp.add_argument("--out", required=True, help="output directory")
        sp.add_argument("--seed", type=int, default=None, help="override the config seed")
        sp.add_argument("--threads", type=int, default=None, help="worker thread cap")
        sp.add_argument("--check", action="store_true", help="exit 3 when thresholds fail")
        sp.set_defaults(fn=fn)
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
