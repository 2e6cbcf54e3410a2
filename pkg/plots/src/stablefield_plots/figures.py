"""Publication-style figures from stablefield run directories.

Rendering is a pure function of the input files and the figure spec:
a fixed Agg backend, no timestamps in the image metadata, and a footer
carrying the producing run's seed and config hash.  Nothing here
recomputes statistics; panels show the emitted numbers verbatim.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
matplotlib.rcParams["svg.hashsalt"] = "stablefield-plots"
matplotlib.rcParams["svg.fonttype"] = "none"

import matplotlib.pyplot as plt
import numpy as np

from .io import (
    SchemaError,
    find_field_csvs,
    read_csv_columns,
    read_posterior,
    read_summary,
    run_footer,
)

def _metadata_for(path: Path) -> dict:
    """Strip mutable metadata so re-rendering is byte-identical."""
    if path.suffix == ".svg":
        return {"Date": None}
    if path.suffix == ".png":
        return {"Software": "stablefield-plots"}
    return {}


@dataclass(frozen=True)
class FigureSpec:
    """Output path plus layout/scale choices shared by all figures."""

    output: str
    panel_width: float = 3.2
    panel_height: float = 2.6
    dpi: int = 150
    log_x: bool = False
    log_y: bool = False
    title: str | None = None


def _finish(fig, spec: FigureSpec, footer: str) -> Path:
    fig.text(0.995, 0.005, footer, ha="right", va="bottom", fontsize=6, color="0.45")
    out = Path(spec.output)
    out.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out, dpi=spec.dpi, metadata=_metadata_for(out))
    plt.close(fig)
    return out


def plot_fields(run_dir, spec: FigureSpec) -> Path:
    """One panel per stability index: 1-d sample paths or 2-d heatmaps."""
    entries = find_field_csvs(run_dir)
    n = len(entries)
    fig, axes = plt.subplots(
        1, n, figsize=(spec.panel_width * n, spec.panel_height), squeeze=False
    )
    for ax, (alpha, seed, path) in zip(axes[0], entries):
        table = read_csv_columns(path, ("x_1", "value"))
        if "x_2" in table:
            _heatmap_panel(ax, table)
        else:
            ax.plot(table["x_1"], table["value"], lw=0.7, color="tab:blue")
            ax.set_xlabel("x")
        ax.set_title(f"alpha = {alpha:g}", fontsize=9)
    if spec.title:
        fig.suptitle(spec.title)
    fig.tight_layout()
    return _finish(fig, spec, run_footer(run_dir))


def _heatmap_panel(ax, table) -> None:
    x1 = table["x_1"]
    x2 = table["x_2"]
    vals = table["value"]
    xs = np.unique(x1)
    ys = np.unique(x2)
    grid = np.full((xs.size, ys.size), np.nan)
    ix = np.searchsorted(xs, x1)
    iy = np.searchsorted(ys, x2)
    grid[ix, iy] = vals
    # robust color range: stable fields have extreme outliers
    lo, hi = np.nanpercentile(vals, [2.0, 98.0])
    ax.imshow(
        grid.T,
        origin="lower",
        extent=(xs.min(), xs.max(), ys.min(), ys.max()),
        vmin=lo,
        vmax=hi,
        cmap="viridis",
        interpolation="nearest",
    )
    ax.set_xlabel("x1")
    ax.set_ylabel("x2")


def plot_modulus(run_dir, spec: FigureSpec) -> Path:
    """Log-log increment moments with the emitted fitted line and slope."""
    run_dir = Path(run_dir)
    table = read_csv_columns(run_dir / "modulus.csv", ("distance", "moment", "se"))
    summary = read_summary(run_dir)
    for key in ("slope", "slope_se", "intercept"):
        if key not in summary:
            raise SchemaError(f"{run_dir}/summary.json is missing required key {key!r}")
    fig, ax = plt.subplots(figsize=(spec.panel_width * 1.6, spec.panel_height * 1.4))
    ax.errorbar(
        table["distance"], table["moment"], yerr=table["se"],
        fmt="o", ms=4, lw=1, capsize=2, color="tab:blue", label="increment moment",
    )
    xs = np.array([table["distance"].min(), table["distance"].max()])
    fit = np.exp(summary["intercept"]) * xs ** summary["slope"]
    label = f"fit: slope {summary['slope']:.3f} +- {summary['slope_se']:.3f}"
    ax.plot(xs, fit, "--", color="tab:red", label=label)
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("separation")
    ax.set_ylabel("E |f(x) - f(y)|^p")
    ax.annotate(
        label, xy=(0.04, 0.92), xycoords="axes fraction", fontsize=9, color="tab:red"
    )
    ax.legend(fontsize=8, loc="lower right")
    if spec.title:
        ax.set_title(spec.title)
    fig.tight_layout()
    return _finish(fig, spec, run_footer(run_dir))


def plot_convergence(run_dir, spec: FigureSpec) -> Path:
    """Width-vs-statistic curve with error bars and the baseline band."""
    run_dir = Path(run_dir)
    table = read_csv_columns(run_dir / "convergence.csv", ("width", "energy_distance", "se"))
    summary = read_summary(run_dir)
    fig, ax = plt.subplots(figsize=(spec.panel_width * 1.6, spec.panel_height * 1.4))
    ax.errorbar(
        table["width"], table["energy_distance"], yerr=table["se"],
        fmt="o-", ms=4, lw=1, capsize=2, color="tab:blue", label="energy distance",
    )
    base = summary.get("baseline")
    if base is not None:
        base_se = summary.get("baseline_se", 0.0)
        ax.axhline(base, color="0.4", lw=1, ls=":", label="same-width baseline")
        ax.axhspan(base - 2 * base_se, base + 2 * base_se, color="0.8", alpha=0.5)
    ax.set_xscale("log", base=2)
    ax.set_xlabel("width")
    ax.set_ylabel("energy distance to wide reference")
    ax.legend(fontsize=8)
    if spec.title:
        ax.set_title(spec.title)
    fig.tight_layout()
    return _finish(fig, spec, run_footer(run_dir))


def plot_energy_scan(run_dir, spec: FigureSpec) -> Path:
    """Mean smoothness energy per width; flat is the expected shape."""
    run_dir = Path(run_dir)
    table = read_csv_columns(
        run_dir / "energy_scan.csv", ("width", "mean_energy", "se", "median_energy")
    )
    summary = read_summary(run_dir)
    fig, ax = plt.subplots(figsize=(spec.panel_width * 1.6, spec.panel_height * 1.4))
    ax.errorbar(
        table["width"], table["mean_energy"], yerr=table["se"],
        fmt="o-", ms=4, lw=1, capsize=2, color="tab:blue", label="mean energy",
    )
    ax.plot(table["width"], table["median_energy"], "s--", ms=3, lw=1,
            color="tab:green", label="median energy")
    slope = summary.get("slope")
    if slope is not None:
        ax.annotate(
            f"log-log slope {slope:.4f}",
            xy=(0.04, 0.92), xycoords="axes fraction", fontsize=9,
        )
    ax.set_xscale("log", base=2)
    ax.set_yscale("log")
    ax.set_xlabel("width")
    ax.set_ylabel("E ||f||^p")
    ax.legend(fontsize=8)
    if spec.title:
        ax.set_title(spec.title)
    fig.tight_layout()
    return _finish(fig, spec, run_footer(run_dir))


def plot_posterior(run_dir, spec: FigureSpec) -> Path:
    """Posterior functional estimates with standard errors and the ESS."""
    run_dir = Path(run_dir)
    payload = read_posterior(run_dir)
    names = sorted(payload["estimates"])
    if not names:
        raise SchemaError(f"{run_dir}/posterior.json contains no functional estimates")
    values = np.array([payload["estimates"][n]["estimate"] for n in names])
    ses = np.array([payload["estimates"][n]["se"] for n in names])
    fig, ax = plt.subplots(figsize=(spec.panel_width * 1.6, spec.panel_height * 1.4))
    pos = np.arange(len(names))
    ax.errorbar(pos, values, yerr=2 * ses, fmt="o", ms=5, capsize=3, color="tab:blue")
    ax.set_xticks(pos)
    ax.set_xticklabels(names, rotation=20, ha="right", fontsize=8)
    ax.set_ylabel("posterior mean (+- 2 se)")
    ax.annotate(
        f"ESS {payload['ess']:.0f} / {payload.get('n_draws', '?')}",
        xy=(0.04, 0.92), xycoords="axes fraction", fontsize=9,
    )
    if spec.title:
        ax.set_title(spec.title)
    fig.tight_layout()
    return _finish(fig, spec, run_footer(run_dir))
