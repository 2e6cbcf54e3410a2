"""Symmetric alpha-stable sampling and analytic characteristic functions.

A symmetric alpha-stable law SaS(alpha, sigma) is fixed here by its
characteristic function

    E[exp(i theta u)] = exp(-(sigma |theta|)^alpha),

with stability index alpha in (0, 2] and scale sigma > 0.  Note the
convention at the Gaussian endpoint: SaS(2, sigma) has characteristic
function exp(-sigma^2 theta^2) and hence variance 2 sigma^2, which
differs from N(0, sigma^2) by a factor sqrt(2).

Sampling uses the Chambers-Mallows-Stuck transform specialised to the
symmetric case.  Draws for alpha < 0.3 are formed in log-magnitude plus
sign and saturate to the largest finite float (counted and logged)
instead of overflowing to inf.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .rng import RngStream

logger = logging.getLogger(__name__)

# alpha this close to 1 is routed through the exact Cauchy branch; the
# generic CMS formula suffers catastrophic cancellation there.
_CAUCHY_WINDOW = 1e-6
# below this alpha, draws are assembled in log space to survive the tails
_LOG_SPACE_ALPHA = 0.3
_MAX_FLOAT = np.finfo(np.float64).max

_saturation_count = 0


def saturation_count() -> int:
    """Number of draws saturated to +-max-finite since the last reset."""
    return _saturation_count


def reset_saturation_count() -> None:
    global _saturation_count
    _saturation_count = 0


@dataclass(frozen=True)
class StableParams:
    """Stability index and scale of a symmetric stable law."""

    alpha: float
    sigma: float

    def __post_init__(self):
        if not (0.0 < self.alpha <= 2.0):
            raise ValueError(f"stability index must lie in (0, 2], got {self.alpha}")
        if not self.sigma > 0.0:
            raise ValueError(f"scale must be positive, got {self.sigma}")


def char_fn(params: StableParams, theta):
    """Characteristic function exp(-(sigma*|theta|)^alpha) at ``theta``."""
    theta = np.asarray(theta, dtype=np.float64)
    out = np.exp(-((params.sigma * np.abs(theta)) ** params.alpha))
    return out if out.ndim else float(out)


def empirical_char_fn(samples, theta: float) -> float:
    """Real part of the empirical characteristic function, mean cos(theta*u).

    The imaginary part vanishes in law for symmetric samples; use
    :func:`empirical_char_fn_imag` as the companion diagnostic.
    """
    samples = np.asarray(samples, dtype=np.float64)
    if samples.size == 0:
        raise ValueError("empirical characteristic function of an empty sample")
    return float(np.mean(np.cos(theta * samples)))


def empirical_char_fn_imag(samples, theta: float) -> float:
    """Imaginary part mean sin(theta*u); a symmetry diagnostic near 0."""
    samples = np.asarray(samples, dtype=np.float64)
    if samples.size == 0:
        raise ValueError("empirical characteristic function of an empty sample")
    return float(np.mean(np.sin(theta * samples)))


def _cms_log_magnitude(alpha: float, v, w):
    """log|X| and sign for the generic CMS transform at stability alpha."""
    sin_av = np.sin(alpha * v)
    log_mag = (
        np.log(np.abs(sin_av))
        - np.log(np.cos(v)) / alpha
        + ((1.0 - alpha) / alpha) * (np.log(np.cos(v - alpha * v)) - np.log(w))
    )
    return log_mag, np.sign(sin_av)


def sample_sas(params: StableParams, rng: RngStream, size=None):
    """Draw from SaS(alpha, sigma) via the symmetric CMS transform.

    Returns a scalar when ``size`` is None, else an array of that shape.
    The alpha = 1 case is the exact Cauchy formula sigma*tan(V); alpha = 2
    reduces to a centered Gaussian with variance 2 sigma^2.
    """
    gen = rng.generator()
    return _sample_sas_gen(params, gen, size)


def _sample_sas_gen(params: StableParams, gen: np.random.Generator, size=None):
    """Sampler core taking a live generator (shared by batch samplers)."""
    global _saturation_count
    alpha, sigma = params.alpha, params.sigma
    shape = () if size is None else size
    v = gen.uniform(-math.pi / 2.0, math.pi / 2.0, size=shape)

    if abs(alpha - 1.0) < _CAUCHY_WINDOW:
        out = sigma * np.tan(v)
        return float(out) if size is None else out

    w = gen.standard_exponential(size=shape)
    if alpha >= _LOG_SPACE_ALPHA:
        sin_av = np.sin(alpha * v)
        x = (
            sin_av
            / np.cos(v) ** (1.0 / alpha)
            * (np.cos(v - alpha * v) / w) ** ((1.0 - alpha) / alpha)
        )
        out = sigma * x
        return float(out) if size is None else out

    log_mag, sign = _cms_log_magnitude(alpha, v, w)
    log_mag = log_mag + math.log(sigma)
    saturated = log_mag > math.log(_MAX_FLOAT)
    n_sat = int(np.count_nonzero(saturated))
    if n_sat:
        _saturation_count += n_sat
        logger.warning("saturated %d stable draw(s) to +-max-finite (alpha=%g)", n_sat, alpha)
    out = sign * np.exp(np.where(saturated, math.log(_MAX_FLOAT), log_mag))
    return float(out) if size is None else out


def lalpha_norm(coeffs, alpha: float) -> float:
    """(sum_i |theta_i|^alpha)^(1/alpha), the stable aggregation scale."""
    coeffs = np.asarray(coeffs, dtype=np.float64)
    return float(np.sum(np.abs(coeffs) ** alpha) ** (1.0 / alpha))


def aggregate_stable(params: StableParams, coeffs, rng: RngStream, size=None):
    """sum_i theta_i u_i with u_i iid SaS(alpha, sigma).

    Equal in law to lalpha_norm(coeffs, alpha) * SaS(alpha, sigma); the
    identity is what makes stable weights aggregate across a hidden layer.
    """
    coeffs = np.asarray(coeffs, dtype=np.float64)
    if coeffs.size == 0:
        raise ValueError("aggregate_stable needs at least one coefficient")
    shape = (coeffs.size,) if size is None else (size, coeffs.size)
    draws = _sample_sas_gen(params, rng.generator(), size=shape)
    out = draws @ coeffs
    return float(out) if size is None else out


def hill_tail_estimate(samples, k: int) -> float:
    """Hill estimator of the tail index from the k largest |samples|.

    Returns +inf for degenerate inputs whose top order statistics are all
    equal (e.g. constant samples), where the log-spacings vanish.
    """
    samples = np.abs(np.asarray(samples, dtype=np.float64))
    n = samples.size
    if k <= 0:
        raise ValueError("k must be positive")
    if k >= n:
        raise ValueError(f"k={k} must be smaller than the sample count {n}")
    top = np.sort(samples)[n - k - 1:]
    threshold = top[0]
    if threshold <= 0.0 or np.all(top == threshold):
        return math.inf
    mean_log_excess = float(np.mean(np.log(top[1:]) - np.log(threshold)))
    if mean_log_excess == 0.0:
        return math.inf
    return 1.0 / mean_log_excess
