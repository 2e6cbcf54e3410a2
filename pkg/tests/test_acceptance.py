"""Acceptance suite: one test per criterion, one printed line each.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the PASS lines
as they complete.  Every tolerance is pinned here; seeds are fixed so
the suite is deterministic.  The heavy studies keep the stated budgets
(replicates, widths, pair counts) and finish within their stated wall
times on a single core.
"""

import json
import math
import time
from pathlib import Path

import numpy as np
import pytest
from scipy import stats
from scipy.integrate import quad

from stablefield import (
    Composite,
    Domain,
    GaussianIID,
    LocalAverages,
    MonteCarloConfig,
    NetworkConfig,
    PointEvals,
    QuadratureConfig,
    RngStream,
    SobolevParams,
    StableParams,
    aggregate_stable,
    char_fn,
    clipped_linear,
    empirical_char_fn,
    energy_bound_scan,
    fdd_convergence_study,
    holder_power,
    lalpha_norm,
    lebesgue_point_study,
    local_avg_convergence_study,
    modulus_estimate,
    posterior_convergence_study,
    posterior_expectation,
    posterior_importance,
    quasinorm,
    sample_sas,
    tanh_activation,
    tiny_grid_oracle,
    tn_convergence_study,
    validate_params,
    with_width,
)
from stablefield.cli import main as cli_main

PAPER_SCALES = (1.0, 0.0, 5.0, 2.0)
INTERVAL = Domain.interval(-1.0, 1.0)


def report(number: int, name: str, ok: bool, detail: str, elapsed: float) -> None:
    status = "PASS" if ok else "FAIL"
    print(f"ACCEPTANCE {number:2d} {name}: {status} ({detail}; {elapsed:.1f}s)")


def test_criterion_01_sampler_fidelity():
    t0 = time.time()
    worst = 0.0
    for i, alpha in enumerate((0.7, 1.0, 1.5, 1.9)):
        params = StableParams(alpha, 1.0)
        draws = sample_sas(params, RngStream(100, i), size=1_000_000)
        for theta in (0.5, 1.0, 2.0):
            gap = abs(empirical_char_fn(draws, theta) - char_fn(params, theta))
            worst = max(worst, gap)
    elapsed = time.time() - t0
    ok = worst < 3e-3 and elapsed < 30.0
    report(1, "sampler fidelity", ok, f"max CF gap {worst:.2e}", elapsed)
    assert worst < 3e-3
    assert elapsed < 30.0


def test_criterion_02_stability_aggregation():
    t0 = time.time()
    alpha = 1.2
    params = StableParams(alpha, 1.0)
    coeffs = (1.0, 2.0, -1.0)
    agg = aggregate_stable(params, coeffs, RngStream(101), size=100_000)
    single = lalpha_norm(coeffs, alpha) * sample_sas(params, RngStream(102), size=100_000)
    pvalue = stats.ks_2samp(agg, single).pvalue
    elapsed = time.time() - t0
    ok = pvalue > 0.001 and elapsed < 10.0
    report(2, "stability aggregation", ok, f"KS p-value {pvalue:.3f}", elapsed)
    assert pvalue > 0.001
    assert elapsed < 10.0


def test_criterion_03_quasinorm_oracle():
    t0 = time.time()
    # independent oracle: reduce the double integral by translation
    # invariance and integrate with scipy before trusting the constant
    a = -0.5
    integral, err = quad(lambda t: 2.0 * (1.0 - t) * t ** a, 0.0, 1.0)
    assert err < 1e-8
    assert integral == pytest.approx(8.0 / 3.0, rel=1e-9)
    target = 0.5 + integral

    dom = Domain.interval(0.0, 1.0)
    params = SobolevParams(0.5, 1.0, 1)
    mc = MonteCarloConfig(pairs=1_000_000, points=200_000, lambda_hint=1.0)
    est = quasinorm(lambda pts: pts[:, 0], dom, params, mc, RngStream(103))
    rel = abs(est.total - target) / target
    elapsed = time.time() - t0
    ok = rel < 0.01 and elapsed < 20.0
    report(3, "quasinorm oracle", ok, f"total {est.total:.4f} vs {target:.4f} ({rel:.2%})", elapsed)
    assert rel < 0.01
    assert elapsed < 20.0


def test_criterion_04_modulus_slopes():
    t0 = time.time()
    distances = [2.0 ** (-k) for k in range(10, 2, -1)]
    # base point at the activation kink with zero input bias: the regime
    # where the modulus envelope binds
    rough = NetworkConfig(1.2, 1, (4096,), (1.0, 0.0, 0.5, 0.0), holder_power(0.5))
    rep_a = modulus_estimate(rough, 0.6, [0.0], distances, 2000, RngStream(11))
    lipschitz = NetworkConfig(1.5, 1, (4096,), (1.0, 0.0, 0.5, 0.0), clipped_linear())
    rep_b = modulus_estimate(lipschitz, 0.75, [0.0], distances, 2000, RngStream(12))
    elapsed = time.time() - t0
    ok_a = 0.20 <= rep_a.slope <= 0.40
    ok_b = 0.65 <= rep_b.slope <= 0.85
    report(
        4,
        "modulus slopes",
        ok_a and ok_b and elapsed < 600.0,
        f"rough {rep_a.slope:.3f} in [0.20, 0.40], lipschitz {rep_b.slope:.3f} in [0.65, 0.85]",
        elapsed,
    )
    assert ok_a, f"rough-activation slope {rep_a.slope:.3f} outside [0.20, 0.40]"
    assert ok_b, f"lipschitz slope {rep_b.slope:.3f} outside [0.65, 0.85]"
    assert elapsed < 600.0  # < 5 min each


def test_criterion_05_uniform_energy_bound():
    t0 = time.time()
    cfg = NetworkConfig(1.2, 1, (16,), PAPER_SCALES, clipped_linear())
    scan = energy_bound_scan(
        cfg,
        INTERVAL,
        SobolevParams(0.5, 0.8, 1),
        [16, 64, 256, 1024, 4096, 16384],
        200,
        MonteCarloConfig(2048, 1024),
        RngStream(5),
    )
    elapsed = time.time() - t0
    ok = scan.max_min_ratio < 2.0 and abs(scan.slope) < 0.05 and elapsed < 900.0
    report(
        5,
        "uniform energy bound",
        ok,
        f"ratio {scan.max_min_ratio:.3f} < 2, |log-log slope| {abs(scan.slope):.4f} < 0.05",
        elapsed,
    )
    assert scan.max_min_ratio < 2.0
    assert abs(scan.slope) < 0.05
    assert elapsed < 900.0


def _convergence_ok(rep) -> tuple[bool, str]:
    stats_ = np.asarray(rep.statistics)
    errs = np.asarray(rep.errors)
    for i in range(len(stats_) - 1):
        slack = 2.0 * math.sqrt(errs[i] ** 2 + errs[i + 1] ** 2)
        if stats_[i + 1] > stats_[i] + slack:
            return False, f"increase at width {rep.widths[i + 1]}"
    band = 2.0 * math.sqrt(errs[-1] ** 2 + (2.0 * rep.baseline_error) ** 2)
    if stats_[-1] > 2.0 * rep.baseline + band:
        return False, f"final {stats_[-1]:.4g} above 2x baseline {rep.baseline:.4g}"
    return True, f"final {stats_[-1]:.4g} vs baseline {rep.baseline:.4g}"


def test_criterion_06_fdd_convergence():
    t0 = time.time()
    cfg = NetworkConfig(1.2, 1, (64,), PAPER_SCALES, clipped_linear())
    points = [[-0.8], [-0.35], [0.1], [0.55], [0.9]]
    rep = fdd_convergence_study(
        cfg, points, [64, 256, 1024, 4096], 65536, 4000, RngStream(6), n_boot=200
    )
    ok, detail = _convergence_ok(rep)
    elapsed = time.time() - t0
    report(6, "finite-dimensional convergence", ok and elapsed < 1200.0, detail, elapsed)
    assert ok, detail
    assert elapsed < 1200.0


def test_criterion_07_local_average_convergence():
    t0 = time.time()
    cfg = NetworkConfig(1.2, 1, (64,), PAPER_SCALES, clipped_linear())
    balls = [((-0.5,), 0.3), ((0.1,), 0.2), ((0.6,), 0.25)]
    rep = local_avg_convergence_study(
        cfg,
        INTERVAL,
        balls,
        [64, 256, 1024, 4096],
        65536,
        4000,
        RngStream(7),
        QuadratureConfig("grid", 32),
        n_boot=200,
    )
    ok, detail = _convergence_ok(rep)
    elapsed = time.time() - t0
    report(7, "local-average convergence", ok and elapsed < 1200.0, detail, elapsed)
    assert ok, detail
    assert elapsed < 1200.0


def test_criterion_08_tn_convergence():
    t0 = time.time()
    cfg = NetworkConfig(1.2, 1, (512,), PAPER_SCALES, clipped_linear())
    rows = tn_convergence_study(
        cfg,
        Domain.interval(0.0, 1.0),
        SobolevParams(0.4, 0.8, 1),
        [3, 4, 5, 6, 7],
        20,
        RngStream(13),
        QuadratureConfig("grid", 64),
        grid_cells=1024,
    )
    medians = [r.median_distance for r in rows]
    decreasing = all(b < a for a, b in zip(medians, medians[1:]))
    elapsed = time.time() - t0
    report(
        8,
        "reconstruction operator convergence",
        decreasing and elapsed < 600.0,
        "medians " + " ".join(f"{m:.3f}" for m in medians),
        elapsed,
    )
    assert decreasing, f"medians not strictly decreasing: {medians}"
    assert elapsed < 600.0


def test_criterion_09_lebesgue_points():
    t0 = time.time()
    cfg = NetworkConfig(1.2, 1, (64,), PAPER_SCALES, clipped_linear())
    radii = [2.0 ** (-k) for k in range(3, 10)]
    tables = {}
    for i, width in enumerate((256, 16384)):
        tables[width] = lebesgue_point_study(
            with_width(cfg, width),
            INTERVAL,
            [0.1],
            0.8,
            radii,
            2000,
            RngStream(8, i),
            QuadratureConfig("grid", 32),
        )
    ok = True
    for width, rows in tables.items():
        for lo, hi in zip(rows, rows[1:]):  # rows sorted by increasing radius
            if lo.mean > hi.mean + 2.0 * math.sqrt(lo.se ** 2 + hi.se ** 2):
                ok = False
    ratios = [
        max(a.mean, b.mean) / min(a.mean, b.mean)
        for a, b in zip(tables[256], tables[16384])
    ]
    cross_ok = max(ratios) <= 2.0
    elapsed = time.time() - t0
    report(
        9,
        "lebesgue points",
        ok and cross_ok and elapsed < 600.0,
        f"decreasing toward r=0, max cross-width ratio {max(ratios):.2f}",
        elapsed,
    )
    assert ok, "local averages do not shrink toward r = 0"
    assert cross_ok, f"width disagreement {max(ratios):.2f} exceeds factor 2"
    assert elapsed < 600.0


def test_criterion_10_posterior_oracle_equivalence():
    t0 = time.time()
    cfg = NetworkConfig(1.0, 1, (1,), PAPER_SCALES, clipped_linear())
    forward = PointEvals(((0.3,),), radius=0.05)
    noise = GaussianIID(1.0, 1)
    u = [0.7]
    functionals = {"g": forward, "avg": LocalAverages((((-0.2,), 0.15),))}
    oracle = tiny_grid_oracle(cfg, INTERVAL, forward, noise, u, functionals, nodes_per_dim=96)
    ensemble = posterior_importance(
        cfg, INTERVAL, forward, noise, u, 100_000, RngStream(14), functionals=functionals
    )
    details = []
    ok = True
    for name in functionals:
        est, se = posterior_expectation(ensemble, name)
        val, err = oracle[name]
        close = abs(est - val) <= 2.0 * (se + err)
        ok = ok and close
        details.append(f"{name}: |{est:.4f}-{val:.4f}| vs 2({se:.4f}+{err:.4f})")
    elapsed = time.time() - t0
    report(10, "posterior oracle equivalence", ok and elapsed < 300.0, "; ".join(details), elapsed)
    assert ok, "; ".join(details)
    assert elapsed < 300.0


def _posterior_ok(rep) -> tuple[bool, str]:
    disc = rep.discrepancies
    pooled = rep.pooled_ses
    for j, name in enumerate(rep.functional_names):
        for i in range(disc.shape[0] - 1):
            slack = 2.0 * math.sqrt(pooled[i, j] ** 2 + pooled[i + 1, j] ** 2)
            if disc[i + 1, j] > disc[i, j] + slack:
                return False, f"{name} discrepancy grows at width {rep.widths[i + 1]}"
        if disc[-1, j] > 3.0 * pooled[-1, j]:
            return False, f"{name} final discrepancy {disc[-1, j]:.4g} above 3 pooled se"
    worst = float(np.max(disc[-1] / pooled[-1]))
    return True, f"max final discrepancy {worst:.2f} pooled se"


def test_criterion_11_posterior_convergence():
    t0 = time.time()
    forward = PointEvals(((-0.4,), (0.3,)), radius=0.1)
    noise = GaussianIID(0.7, 2)
    u = [0.5, -0.3]
    functionals = {
        "avg_left": LocalAverages((((-0.5,), 0.3),)),
        "avg_right": LocalAverages((((0.45,), 0.25),)),
        "lip": Composite((LocalAverages((((0.0,), 0.35),)),), np.tanh, 1),
    }
    shallow = NetworkConfig(1.2, 1, (64,), PAPER_SCALES, clipped_linear())
    rep_s = posterior_convergence_study(
        shallow, INTERVAL, [64, 256, 1024, 4096], 32768, forward, noise, u,
        functionals, 2000, RngStream(9), QuadratureConfig("grid", 32),
    )
    ok_s, detail_s = _posterior_ok(rep_s)
    t_shallow = time.time() - t0

    t1 = time.time()
    deep = NetworkConfig(1.2, 1, (16, 16), PAPER_SCALES, tanh_activation())
    rep_d = posterior_convergence_study(
        deep, INTERVAL, [16, 32, 64, 128], 512, forward, noise, u,
        functionals, 1500, RngStream(10), QuadratureConfig("grid", 32),
    )
    ok_d, detail_d = _posterior_ok(rep_d)
    t_deep = time.time() - t1
    elapsed = time.time() - t0
    ok = ok_s and ok_d and t_shallow < 1800.0 and t_deep < 1800.0
    report(
        11,
        "posterior convergence",
        ok,
        f"shallow [{detail_s}], deep tanh L=2 [{detail_d}]",
        elapsed,
    )
    assert ok_s, detail_s
    assert ok_d, detail_d
    assert t_shallow < 1800.0 and t_deep < 1800.0


def test_criterion_12_cli_reproducibility(tmp_path):
    t0 = time.time()
    configs = {
        "sample_field": {
            "schema": "stablefield.sample_field/1",
            "alphas": [1.5],
            "width": 2000,
            "grid_points": 201,
            "seeds": [3],
        },
        "modulus": {
            "schema": "stablefield.modulus/1",
            "network": {
                "alpha": 1.2,
                "widths": [64],
                "scales": [1.0, 0.0, 5.0, 2.0],
                "activation": {"kind": "clipped_linear"},
            },
            "p": 0.6,
            "distances": [0.03125, 0.125, 0.5],
            "reps": 50,
        },
        "fdd": {
            "schema": "stablefield.fdd/1",
            "network": {
                "alpha": 1.2,
                "widths": [16],
                "scales": [1.0, 0.0, 5.0, 2.0],
                "activation": {"kind": "clipped_linear"},
            },
            "points": [[0.1], [0.5]],
            "widths": [8, 16],
            "h_ref": 64,
            "reps": 100,
            "n_boot": 30,
        },
    }
    commands = {"sample_field": "sample-field", "modulus": "modulus", "fdd": "fdd"}
    csvs = {
        "sample_field": "field_d1_alpha1.5_seed7.csv",
        "modulus": "modulus.csv",
        "fdd": "convergence.csv",
    }
    ok = True
    for key, cfg in configs.items():
        path = tmp_path / f"{key}.json"
        path.write_text(json.dumps(cfg))
        outs = []
        for run, threads in (("a", "1"), ("b", "3")):
            out = tmp_path / f"{key}_{run}"
            code = cli_main(
                [commands[key], "--config", str(path), "--out", str(out),
                 "--seed", "7", "--threads", threads]
            )
            assert code == 0
            outs.append((out / csvs[key]).read_bytes())
        ok = ok and outs[0] == outs[1]
    elapsed = time.time() - t0
    report(12, "cli reproducibility", ok, "bit-identical CSVs across runs and thread counts", elapsed)
    assert ok


# hand-checked admissibility table: (d, lambda, alpha, s, p) and the
# exact set of failing core checks; verified against the inequalities
# alpha in (d/(d+l), 2), p in (d/(d+l), alpha), s in (0, l), p > d/(d+s)
CORE_CASES = [
    ((1, 1.0, 1.5, 0.5, 0.8), set()),
    ((1, 1.0, 1.5, 0.5, 0.6), {"p_vs_s"}),
    ((1, 1.0, 1.5, 0.5, 0.5), {"p_range", "p_vs_s"}),
    ((1, 1.0, 2.0, 0.5, 0.8), {"alpha_range"}),
    ((1, 1.0, 0.5, 0.3, 0.8), {"alpha_range", "p_range"}),
    ((1, 1.0, 1.9, 0.99, 1.0), set()),
    ((1, 1.0, 1.9, 1.0, 1.0), {"s_range"}),
    ((1, 0.5, 1.5, 0.3, 0.8), set()),
    ((1, 0.5, 1.5, 0.6, 0.8), {"s_range"}),
    ((1, 0.5, 0.7, 0.3, 0.69), {"p_vs_s"}),
    ((2, 1.0, 1.5, 0.5, 0.9), set()),
    ((2, 1.0, 1.5, 0.5, 0.75), {"p_vs_s"}),
    ((3, 0.5, 0.8, 0.3, 0.9), {"alpha_range", "p_range", "p_vs_s"}),
    ((3, 1.0, 1.0, 0.5, 0.9), set()),
    ((3, 1.0, 1.0, 0.2, 0.9), {"p_vs_s"}),
    ((1, 0.75, 1.2, 0.6, 0.7), set()),
    ((1, 0.75, 1.2, 0.7, 0.58), {"p_vs_s"}),
    ((2, 0.8, 1.9, 0.7, 1.5), set()),
    ((2, 0.8, 1.9, 0.7, 1.95), {"p_range"}),
    ((1, 1.0, 1.2, 0.5, 1.2), {"p_range"}),
    ((1, 1.0, 0.4, 0.3, 0.45), {"alpha_range", "p_range", "p_vs_s"}),
    ((1, 1.0, 1.5, 0.9, 0.8), set()),
    ((1, 1.0, 1.5, 0.05, 0.8), {"p_vs_s"}),
    ((1, 1.0, 1.01, 0.5, 1.0), set()),
    ((1, 1.0, 1.0, 0.5, 1.0), {"p_range"}),
    ((2, 1.0, 0.7, 0.5, 0.68), {"p_vs_s"}),
    ((2, 1.0, 0.7, 0.9, 1.0), {"p_range"}),
    ((5, 1.0, 1.0, 0.9, 0.95), set()),
    ((5, 0.2, 1.0, 0.1, 0.97), {"p_vs_s"}),
    ((1, 1.0, 1.99, 0.5, 1.98), set()),
    ((1, 1.0, 1.99, 0.5, 1.99), {"p_range"}),
    ((1, 0.9, 1.8, 0.85, 1.0), set()),
    ((1, 0.9, 1.8, 0.95, 1.0), {"s_range"}),
    ((2, 0.5, 1.2, 0.25, 0.85), {"p_vs_s"}),
    ((2, 0.5, 1.2, 0.45, 0.9), set()),
    ((1, 1.0, 1.5, -0.1, 0.8), {"s_range", "p_vs_s"}),
    ((1, 1.0, 1.5, 0.5, 2.5), {"p_range"}),
    ((4, 1.0, 1.9, 0.8, 1.5), set()),
]

# embedding cases: core params plus a target pair (s2, p2), expecting
# (continuous, compact); source index s - d/p computed by hand
EMBEDDING_CASES = [
    # d=1, (s,p)=(0.5,1.0): index -1/2
    ((1, 1.0, 1.8, 0.5, 1.0), (1.0 / 6.0, 1.5), (True, False)),
    ((1, 1.0, 1.8, 0.5, 1.0), (0.1, 1.5), (False, True)),
    ((1, 1.0, 1.8, 0.5, 1.0), (0.3, 1.5), (False, False)),
    ((1, 1.0, 1.8, 0.5, 1.0), (0.4, 0.9), (False, False)),  # p2 < p
    ((1, 1.0, 1.8, 0.5, 1.0), (0.6, 1.5), (False, False)),  # s2 > s
    # d=1, (s,p)=(0.5,0.8): index 0.5 - 1.25 = -0.75
    ((1, 1.0, 1.5, 0.5, 0.8), (0.25, 1.0), (True, False)),
    # d=3, (s,p)=(0.5,0.9): index 0.5 - 10/3
    ((3, 1.0, 1.0, 0.5, 0.9), (0.1, 1.0), (False, True)),
    # d=1 source again: target exactly on the line with p2 = 4/3
    ((1, 1.0, 1.8, 0.5, 1.0), (0.25, 4.0 / 3.0), (True, False)),
    ((1, 1.0, 1.8, 0.5, 1.0), (0.05, 2.0), (False, False)),  # supercritical
    ((1, 1.0, 1.8, 0.5, 1.0), (0.01, 1.2), (False, True)),
    ((1, 1.0, 1.8, 0.5, 1.0), (0.5, 1.2), (False, False)),  # s2 = s
    ((1, 1.0, 1.8, 0.5, 1.0), (0.45, 1.0), (False, False)),  # p2 = p
]


def test_criterion_13_parameter_gate():
    t0 = time.time()
    assert len(CORE_CASES) + len(EMBEDDING_CASES) == 50
    core_names = ("alpha_range", "p_range", "s_range", "p_vs_s")
    for args, expected_failures in CORE_CASES:
        rep = validate_params(*args)
        failures = {c.name for c in rep.failures() if c.name in core_names}
        assert failures == expected_failures, f"{args}: got {failures}, want {expected_failures}"
    for args, (s2, p2), (want_cont, want_comp) in EMBEDDING_CASES:
        rep = validate_params(*args, s2=s2, p2=p2)
        by_name = {c.name: c.passed for c in rep.checks}
        assert by_name["embedding_continuous"] is want_cont, (args, s2, p2)
        assert by_name["embedding_compact"] is want_comp, (args, s2, p2)
    elapsed = time.time() - t0
    ok = elapsed < 1.0
    report(13, "parameter gate", ok, f"{len(CORE_CASES) + len(EMBEDDING_CASES)} hand-checked cases", elapsed)
    assert elapsed < 1.0
