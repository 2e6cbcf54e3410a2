"""Empirical verification suites for the wide-network limit theory.

Every study here is a statistics-producing experiment: increments of the
field against the modulus-of-continuity envelope, width-uniformity of
the expected smoothness energy, distributional convergence of point
evaluations and local averages toward a very-wide reference network, the
Lebesgue-point property of local averages, and convergence of the
partition-of-unity reconstruction.  Convergence is always judged
relative to a same-distribution baseline computed with the identical
statistic, never against an absolute threshold: the infinite-width
process has no samplable closed form, so a width far beyond the studied
range serves as its proxy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.spatial.distance import cdist

from .function_space import (
    Domain,
    FieldFn,
    MonteCarloConfig,
    QuadratureConfig,
    SobolevParams,
    ball_quadrature,
    quasinorm,
    quasinorm_grid_1d,
    seminorm_integral_from_values,
    seminorm_pair_sample,
    tn_operator,
    validate_params,
)
from .network import (
    NetworkConfig,
    NetworkRealization,
    _activation_inplace,
    evaluate_values,
    sample_network,
    truncate_widths,
    with_width,
)
from .parallel import parallel_map
from .rng import RngStream


@dataclass(frozen=True)
class ModulusReport:
    """Increment moments E|f(x) - f(x + delta e)|^p across separations."""

    distances: tuple[float, ...]
    moments: tuple[float, ...]
    moment_ses: tuple[float, ...]
    medians: tuple[float, ...]
    slope: float
    slope_se: float
    intercept: float
    p: float
    widths: tuple[int, ...]

    def __post_init__(self):
        dists = np.asarray(self.distances)
        if np.any(dists <= 0.0) or np.any(np.diff(dists) <= 0.0):
            raise ValueError("distances must be positive and strictly increasing")
        if np.any(np.asarray(self.moments) <= 0.0):
            raise ValueError("moment estimates must be positive")


@dataclass(frozen=True)
class ConvergenceReport:
    """Per-width two-sample statistics against a wide reference."""

    widths: tuple[int, ...]
    statistics: tuple[float, ...]
    errors: tuple[float, ...]
    baseline: float
    baseline_error: float
    h_ref: int
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        widths = np.asarray(self.widths)
        if np.any(np.diff(widths) <= 0):
            raise ValueError("widths must be strictly increasing")
        if self.h_ref <= int(widths[-1]):
            raise ValueError("reference width must exceed every studied width")


@dataclass(frozen=True)
class EnergyScanRow:
    width: int
    mean_energy: float
    se: float
    median_energy: float


@dataclass(frozen=True)
class EnergyScanReport:
    rows: tuple[EnergyScanRow, ...]
    slope: float
    slope_se: float
    max_min_ratio: float


def _ols_slope(x: np.ndarray, y: np.ndarray) -> tuple[float, float, float]:
    """Least-squares slope, its standard error, and the intercept."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    xc = x - x.mean()
    sxx = float(xc @ xc)
    slope = float(xc @ y) / sxx
    intercept = float(y.mean() - slope * x.mean())
    resid = y - (intercept + slope * x)
    dof = max(x.size - 2, 1)
    slope_se = math.sqrt(float(resid @ resid) / dof / sxx)
    return slope, slope_se, intercept


def modulus_estimate(
    config: NetworkConfig,
    p: float,
    base_point,
    distances: Sequence[float],
    reps: int,
    rng: RngStream,
    direction=None,
    threads: int | None = None,
) -> ModulusReport:
    """Estimate E|f(x) - f(x + delta e)|^p over a grid of separations.

    Each separation is probed with ``reps`` fresh networks; the log-log
    slope of the fitted moments is the empirical modulus exponent (the
    envelope predicts lambda*p for rough activations, p with a
    logarithmic correction for Lipschitz ones).
    """
    if not 0.0 < p < config.alpha:
        raise ValueError(
            f"increment moments need p in (0, alpha): got p={p}, alpha={config.alpha}"
        )
    distances = tuple(sorted(float(x) for x in distances))
    if distances[0] <= 0.0 or distances[-1] > 1.0:
        raise ValueError("distances must lie in (0, 1]")
    base = np.atleast_1d(np.asarray(base_point, dtype=np.float64))
    if direction is None:
        direction = np.zeros(config.input_dim)
        direction[0] = 1.0
    direction = np.asarray(direction, dtype=np.float64)
    direction = direction / np.linalg.norm(direction)

    def one_rep(args) -> float:
        k, rep = args
        stream = rng.substream("modulus", k, rep)
        pts = np.vstack([base, base + distances[k] * direction])
        vals = evaluate_values(sample_network(config, stream), pts)
        return abs(vals[0] - vals[1]) ** p

    jobs = [(k, rep) for k in range(len(distances)) for rep in range(reps)]
    flat = parallel_map(one_rep, jobs, threads)
    samples = np.asarray(flat).reshape(len(distances), reps).T

    moments = samples.mean(axis=0)
    ses = samples.std(axis=0, ddof=1) / math.sqrt(reps)
    medians = np.median(samples, axis=0)
    slope, slope_se, intercept = _ols_slope(np.log(distances), np.log(moments))
    return ModulusReport(
        distances=distances,
        moments=tuple(moments),
        moment_ses=tuple(ses),
        medians=tuple(medians),
        slope=slope,
        slope_se=slope_se,
        intercept=intercept,
        p=p,
        widths=config.widths,
    )


def _nested_width_values(
    wide: NetworkRealization, widths: tuple[int, ...], points: np.ndarray
) -> np.ndarray:
    """Shallow field values at every truncation width, one feature pass.

    Returns (len(widths), n_points); row i is the width-widths[i] network
    obtained by keeping the leading neurons of ``wide``.  Neuron sums are
    accumulated once per point block via cumulative segment sums, instead
    of re-evaluating each truncated network.
    """
    config = wide.config
    act = config.activation
    u = wide.input_matrix
    v = wide.hidden_matrices[0][0]
    a = wide.biases[0]
    b = wide.output_bias
    boundaries = np.concatenate([[0], widths[:-1]])
    scales = np.array([w ** (-1.0 / config.alpha) for w in widths])

    n = points.shape[0]
    out = np.empty((len(widths), n))
    chunk = max(1, 262_144 // widths[-1])
    for start in range(0, n, chunk):
        block = points[start : start + chunk]
        pre = u @ block.T
        pre += a[:, None]
        weighted = _activation_inplace(act, pre)
        weighted *= v[:, None]
        segments = np.add.reduceat(weighted, boundaries, axis=0)
        partial = np.cumsum(segments, axis=0)
        out[:, start : start + block.shape[0]] = scales[:, None] * partial + b
    return out


def _energy_profile_shallow(
    wide: NetworkRealization,
    widths: tuple[int, ...],
    domain: Domain,
    params: SobolevParams,
    mc: MonteCarloConfig,
    mc_stream: RngStream,
) -> np.ndarray:
    """Per-width quasinorm^p for one wide draw, sharing the MC sample.

    Consumes the same streams as quasinorm() on each truncated network,
    so it is value-equal to the generic per-width path (up to summation
    order); the shared features make it affordable at large widths.
    """
    lp_gen = mc_stream.substream("lp").generator()
    lp_points = domain.sample_uniform(mc.points, lp_gen)
    pairs = seminorm_pair_sample(domain, params, mc, mc_stream.substream("semi"))
    k = pairs.x.shape[0]
    all_points = np.vstack([lp_points, pairs.x, pairs.y])

    values = _nested_width_values(wide, widths, all_points)
    if not np.all(np.isfinite(values)):
        raise ValueError("non-finite field value in energy scan")
    energies = np.empty(len(widths))
    vol = domain.volume
    for i in range(len(widths)):
        lp_mean = float(np.mean(np.abs(values[i, : mc.points]) ** params.p))
        lp = (vol * lp_mean) ** (1.0 / params.p) if lp_mean > 0 else 0.0
        integral, _ = seminorm_integral_from_values(
            pairs,
            values[i, mc.points : mc.points + k],
            values[i, mc.points + k :],
            params.p,
        )
        semi = integral ** (1.0 / params.p) if integral > 0 else 0.0
        energies[i] = (lp + semi) ** params.p
    return energies


def energy_bound_scan(
    config: NetworkConfig,
    domain: Domain,
    params: SobolevParams,
    widths: Sequence[int],
    reps: int,
    mc: MonteCarloConfig,
    rng: RngStream,
    threads: int | None = None,
) -> EnergyScanReport:
    """Mean quasinorm energy E||f^H||^p across widths.

    The theory bounds the energy uniformly in width; the report carries
    the regression slope against log H, which should be statistically
    indistinguishable from zero.  Replicates share randomness across
    widths (a wide draw is truncated to the narrower ones, and the
    quasinorm Monte Carlo points are reused), which removes almost all
    replicate noise from the slope.
    """
    lam = config.activation.holder_exponent
    report = validate_params(domain.dim, lam, config.alpha, params.s, params.p)
    if not report.passed:
        details = "; ".join(c.detail for c in report.failures())
        raise ValueError(f"invalid parameter combination: {details}")
    widths = tuple(sorted(int(w) for w in widths))
    if mc.lambda_hint is None:
        mc = MonteCarloConfig(mc.pairs, mc.points, lambda_hint=lam)

    def one_rep(rep: int) -> np.ndarray:
        wide = sample_network(with_width(config, widths[-1]), rng.substream("rep", rep))
        mc_stream = rng.substream("mc", rep)
        if config.depth == 1:
            return _energy_profile_shallow(wide, widths, domain, params, mc, mc_stream)
        energies = np.empty(len(widths))
        for i, w in enumerate(widths):
            net = truncate_widths(wide, (w,) * config.depth)
            est = quasinorm(
                lambda pts: evaluate_values(net, pts), domain, params, mc, mc_stream
            )
            energies[i] = est.total ** params.p
        return energies

    table = np.asarray(parallel_map(one_rep, list(range(reps)), threads))
    means = table.mean(axis=0)
    ses = table.std(axis=0, ddof=1) / math.sqrt(reps)
    medians = np.median(table, axis=0)
    # scale-free drift: slope of log mean energy against log width (a
    # slope bound in raw units would depend on the energy scale)
    log_w = np.log(widths)
    slope, _, _ = _ols_slope(log_w, np.log(means))
    gen = rng.substream("slope_boot").generator()
    boot = np.empty(200)
    for b in range(200):
        idx = gen.integers(0, reps, reps)
        boot[b], _, _ = _ols_slope(log_w, np.log(table[idx].mean(axis=0)))
    rows = tuple(
        EnergyScanRow(w, float(m), float(s), float(md))
        for w, m, s, md in zip(widths, means, ses, medians)
    )
    return EnergyScanReport(
        rows=rows,
        slope=slope,
        slope_se=float(boot.std(ddof=1)),
        max_min_ratio=float(means.max() / means.min()),
    )


def energy_distance(sample_a, sample_b) -> float:
    """V-statistic energy distance 2 E||A-B|| - E||A-A'|| - E||B-B'||.

    Nonnegative, zero exactly when the empirical distributions coincide.
    """
    a = np.atleast_2d(np.asarray(sample_a, dtype=np.float64))
    b = np.atleast_2d(np.asarray(sample_b, dtype=np.float64))
    if a.shape[0] == 0 or b.shape[0] == 0:
        raise ValueError("energy distance needs non-empty samples")
    if a.shape[1] != b.shape[1]:
        raise ValueError(f"dimension mismatch: {a.shape[1]} vs {b.shape[1]}")
    cross = float(cdist(a, b).mean())
    within_a = float(cdist(a, a).mean())
    within_b = float(cdist(b, b).mean())
    return max(2.0 * cross - within_a - within_b, 0.0)


def energy_distance_bootstrap(
    sample_a, sample_b, rng: RngStream, n_boot: int = 200
) -> tuple[float, float]:
    """Energy distance plus a bootstrap standard error.

    Resampled statistics reuse the cached distance matrices through
    multinomial count vectors, so the bootstrap costs matrix-vector
    products rather than fresh pairwise distances.
    """
    a = np.atleast_2d(np.asarray(sample_a, dtype=np.float64))
    b = np.atleast_2d(np.asarray(sample_b, dtype=np.float64))
    if a.shape[1] != b.shape[1]:
        raise ValueError(f"dimension mismatch: {a.shape[1]} vs {b.shape[1]}")
    n, m = a.shape[0], b.shape[0]
    d_ab = cdist(a, b).astype(np.float32)
    d_aa = cdist(a, a).astype(np.float32)
    d_bb = cdist(b, b).astype(np.float32)
    value = 2.0 * float(d_ab.mean()) - float(d_aa.mean()) - float(d_bb.mean())

    gen = rng.generator()
    boots = np.empty(n_boot)
    for i in range(n_boot):
        ca = gen.multinomial(n, np.full(n, 1.0 / n)).astype(np.float32)
        cb = gen.multinomial(m, np.full(m, 1.0 / m)).astype(np.float32)
        cross = float(ca @ (d_ab @ cb)) / (n * m)
        wa = float(ca @ (d_aa @ ca)) / (n * n)
        wb = float(cb @ (d_bb @ cb)) / (m * m)
        boots[i] = 2.0 * cross - wa - wb
    return max(value, 0.0), float(boots.std(ddof=1))


def _functional_values(
    config: NetworkConfig,
    nodes: np.ndarray,
    weights_blocks: list[tuple[slice, np.ndarray]] | None,
    reps: int,
    rng: RngStream,
    tag: str,
    threads: int | None = None,
    field_override: FieldFn | None = None,
) -> np.ndarray:
    """(reps, M) matrix of per-replicate functional coordinates.

    With ``weights_blocks`` None the coordinates are raw point values;
    otherwise coordinate j is the weighted node sum of block j (a local
    average).  Each replicate draws a fresh network from its substream.
    ``field_override`` (a test hook) replaces every replicate's field
    with a fixed deterministic function.
    """

    def one_rep(rep: int) -> np.ndarray:
        if field_override is None:
            net = sample_network(config, rng.substream(tag, rep))
            vals = evaluate_values(net, nodes)
        else:
            vals = np.asarray(field_override(nodes), dtype=np.float64)
        if weights_blocks is None:
            return vals
        return np.array([w @ vals[sl] for sl, w in weights_blocks])

    return np.asarray(parallel_map(one_rep, list(range(reps)), threads))


def fdd_convergence_study(
    config: NetworkConfig,
    points,
    widths: Sequence[int],
    h_ref: int,
    reps: int,
    rng: RngStream,
    n_boot: int = 200,
    threads: int | None = None,
) -> ConvergenceReport:
    """Energy distance of (f^H(x_1), ..., f^H(x_n)) to the wide proxy.

    The baseline entry is the self-distance between two independent
    clouds at the reference width: convergence claims are judged against
    it, since the statistic has a positive small-sample bias.
    """
    points = np.atleast_2d(np.asarray(points, dtype=np.float64))
    widths = tuple(sorted(int(w) for w in widths))
    if h_ref <= widths[-1]:
        raise ValueError("reference width must exceed every studied width")

    ref = _functional_values(with_width(config, h_ref), points, None, reps, rng, "ref", threads)
    ref2 = _functional_values(with_width(config, h_ref), points, None, reps, rng, "ref2", threads)
    baseline, baseline_se = energy_distance_bootstrap(ref, ref2, rng.substream("boot", "base"), n_boot)

    stats, errs = [], []
    for w in widths:
        cloud = _functional_values(
            with_width(config, w), points, None, reps, rng, f"w{w}", threads
        )
        val, se = energy_distance_bootstrap(cloud, ref, rng.substream("boot", w), n_boot)
        stats.append(val)
        errs.append(se)

    return ConvergenceReport(
        widths=widths,
        statistics=tuple(stats),
        errors=tuple(errs),
        baseline=baseline,
        baseline_error=baseline_se,
        h_ref=int(h_ref),
        meta={"points": points.tolist(), "reps": reps, "kind": "point_evaluations"},
    )


def _ball_blocks(
    domain: Domain, balls: Sequence[tuple], quadrature: QuadratureConfig
) -> tuple[np.ndarray, list[tuple[slice, np.ndarray]]]:
    """Stack per-ball quadrature nodes; remember each ball's slice."""
    nodes_list, blocks = [], []
    start = 0
    for center, radius in balls:
        pts, w = ball_quadrature(domain, center, radius, quadrature)
        nodes_list.append(pts)
        blocks.append((slice(start, start + pts.shape[0]), w))
        start += pts.shape[0]
    return np.vstack(nodes_list), blocks


def local_avg_convergence_study(
    config: NetworkConfig,
    domain: Domain,
    balls: Sequence[tuple],
    widths: Sequence[int],
    h_ref: int,
    reps: int,
    rng: RngStream,
    quadrature: QuadratureConfig = QuadratureConfig(),
    n_boot: int = 200,
    threads: int | None = None,
    field_override: FieldFn | None = None,
) -> ConvergenceReport:
    """As the point-evaluation study, with ball averages as coordinates."""
    widths = tuple(sorted(int(w) for w in widths))
    if h_ref <= widths[-1]:
        raise ValueError("reference width must exceed every studied width")
    nodes, blocks = _ball_blocks(domain, balls, quadrature)

    ref = _functional_values(
        with_width(config, h_ref), nodes, blocks, reps, rng, "ref", threads, field_override
    )
    ref2 = _functional_values(
        with_width(config, h_ref), nodes, blocks, reps, rng, "ref2", threads, field_override
    )
    baseline, baseline_se = energy_distance_bootstrap(ref, ref2, rng.substream("boot", "base"), n_boot)

    stats, errs = [], []
    for w in widths:
        cloud = _functional_values(
            with_width(config, w), nodes, blocks, reps, rng, f"w{w}", threads, field_override
        )
        val, se = energy_distance_bootstrap(cloud, ref, rng.substream("boot", w), n_boot)
        stats.append(val)
        errs.append(se)

    return ConvergenceReport(
        widths=widths,
        statistics=tuple(stats),
        errors=tuple(errs),
        baseline=baseline,
        baseline_error=baseline_se,
        h_ref=int(h_ref),
        meta={"balls": [(list(np.atleast_1d(c)), r) for c, r in balls], "reps": reps,
              "kind": "local_averages"},
    )


@dataclass(frozen=True)
class LebesgueRow:
    radius: float
    mean: float
    se: float
    median: float


def lebesgue_point_study(
    config: NetworkConfig,
    domain: Domain,
    x,
    p: float,
    radii: Sequence[float],
    reps: int,
    rng: RngStream,
    quadrature: QuadratureConfig = QuadratureConfig(),
    threads: int | None = None,
    field_override: FieldFn | None = None,
) -> tuple[LebesgueRow, ...]:
    """Mean of (|f - f(x)| averaged over B(x, r))^p across shrinking r.

    The averages vanish as r -> 0 at a rate uniform in width, which is
    what makes smoothed point evaluation a sound observation model.
    """
    lam = config.activation.holder_exponent
    lower = domain.dim / (domain.dim + lam)
    if not lower < p < config.alpha:
        raise ValueError(
            f"needs p in (d/(d+lambda), alpha) = ({lower:.6g}, {config.alpha}); got {p}"
        )
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    radii = tuple(sorted(float(r) for r in radii))
    balls = [(x, r) for r in radii]
    nodes, blocks = _ball_blocks(domain, balls, quadrature)
    all_nodes = np.vstack([x[None, :], nodes])

    def one_rep(rep: int) -> np.ndarray:
        if field_override is None:
            net = sample_network(config, rng.substream("lebesgue", rep))
            vals = evaluate_values(net, all_nodes)
        else:
            vals = np.asarray(field_override(all_nodes), dtype=np.float64)
        fx = vals[0]
        rest = vals[1:]
        return np.array([(w @ np.abs(rest[sl] - fx)) ** p for sl, w in blocks])

    table = np.asarray(parallel_map(one_rep, list(range(reps)), threads))
    means = table.mean(axis=0)
    ses = table.std(axis=0, ddof=1) / math.sqrt(reps)
    medians = np.median(table, axis=0)
    return tuple(
        LebesgueRow(r, float(m), float(s), float(md))
        for r, m, s, md in zip(radii, means, ses, medians)
    )


@dataclass(frozen=True)
class TnRow:
    level: int
    median_distance: float
    mean_distance: float


def tn_convergence_study(
    config: NetworkConfig,
    domain: Domain,
    params: SobolevParams,
    levels: Sequence[int],
    reps: int,
    rng: RngStream,
    quadrature: QuadratureConfig = QuadratureConfig(),
    grid_cells: int = 1024,
    threads: int | None = None,
    field_override: FieldFn | None = None,
) -> tuple[TnRow, ...]:
    """Reconstruction error ||T^n f - f||^(p ^ 1) across cover levels.

    Distances use the deterministic 1-d grid quasinorm so medians across
    replicates are noise-free given the sampled fields.
    """
    lam = config.activation.holder_exponent
    report = validate_params(domain.dim, lam, config.alpha, params.s, params.p)
    if not report.passed:
        details = "; ".join(c.detail for c in report.failures())
        raise ValueError(f"invalid parameter combination: {details}")
    if domain.dim != 1:
        raise ValueError("the reconstruction study is implemented for 1-d domains")
    levels = tuple(sorted(int(n) for n in levels))
    power = min(params.p, 1.0)

    def one_rep(rep: int) -> np.ndarray:
        if field_override is None:
            net = sample_network(config, rng.substream("tn", rep))
            f: FieldFn = lambda pts: evaluate_values(net, pts)
        else:
            f = field_override
        out = np.empty(len(levels))
        for i, n in enumerate(levels):
            tn = tn_operator(f, domain, n, quadrature)
            diff: FieldFn = lambda pts: f(pts) - tn(pts)
            est = quasinorm_grid_1d(diff, domain, params, grid_cells)
            out[i] = est.total ** power
        return out

    table = np.asarray(parallel_map(one_rep, list(range(reps)), threads))
    medians = np.median(table, axis=0)
    means = table.mean(axis=0)
    return tuple(
        TnRow(n, float(md), float(m)) for n, md, m in zip(levels, medians, means)
    )
