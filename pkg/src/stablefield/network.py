"""Stable-weighted random neural fields.

A network of hidden widths ``(H_1, ..., H_L)`` on input dimension ``d``
is built layer by layer,

    f1(x)      = U x + a1,
    f_{l+1}(x) = H_l^(-1/alpha) * V_l phi(f_l(x)) + a_{l+1},

with all weights and biases independent symmetric alpha-stable draws.
The scalar output is the last entry; the shallow single-hidden-layer
model is exactly the L = 1 case, with the output bias playing the role
of the scalar bias b.  The ``H^(-1/alpha)`` factor is the stable
analogue of the central-limit normalisation: it is precisely what keeps
the law of f(x) width-independent when the activations saturate.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .function_space import Domain, FieldSample
from .rng import RngStream
from .stable import StableParams, _sample_sas_gen

# entries per chunk when streaming a layer over grid points; sized so a
# layer block stays cache-resident on a single core
_CHUNK_ENTRIES = 524_288


@dataclass(frozen=True)
class ActivationSpec:
    """Activation with its continuity certificate.

    ``holder_exponent`` (in (0, 1]) and ``growth_exponent`` (in [0, 1))
    are the two branches of the bound

        |phi(x) - phi(y)| <= holder_constant * |x-y|^holder_exponent   (|x-y| < 1)
        |phi(x) - phi(y)| <= tail_constant   * |x-y|^growth_exponent   (|x-y| >= 1)

    Linearly growing activations (growth exponent >= 1, e.g. ReLU) are
    rejected: their wide limits live in a different scaling regime.
    """

    kind: str
    holder_exponent: float
    growth_exponent: float
    holder_constant: float
    tail_constant: float

    def __post_init__(self):
        if self.kind not in ("clipped_linear", "tanh", "holder_power"):
            raise ValueError(f"unknown activation kind {self.kind!r}")
        if not (0.0 < self.holder_exponent <= 1.0):
            raise ValueError("holder exponent must lie in (0, 1]")
        if not (0.0 <= self.growth_exponent < 1.0):
            raise ValueError(
                "growth exponent must lie in [0, 1); linearly growing "
                "activations such as ReLU are out of scope"
            )


def clipped_linear() -> ActivationSpec:
    """x -> x / max(|x|, 1): 1-Lipschitz, bounded by 1."""
    return ActivationSpec("clipped_linear", 1.0, 0.0, 1.0, 2.0)


def tanh_activation() -> ActivationSpec:
    return ActivationSpec("tanh", 1.0, 0.0, 1.0, 2.0)


def holder_power(exponent: float) -> ActivationSpec:
    """x -> sign(x) * min(|x|, 1)^exponent, the canonical rough activation.

    Genuinely exponent-Hoelder at the origin (and bounded by 1), so it
    exercises the sub-Lipschitz branch of the regularity theory.
    """
    if not (0.0 < exponent < 1.0):
        raise ValueError("holder_power exponent must lie in (0, 1)")
    return ActivationSpec("holder_power", exponent, 0.0, 2.0, 2.0)


def activation_apply(spec: ActivationSpec, x):
    x = np.asarray(x, dtype=np.float64)
    if spec.kind == "clipped_linear":
        # x / max(|x|, 1) is exactly clipping to [-1, 1]
        out = np.clip(x, -1.0, 1.0)
    elif spec.kind == "tanh":
        out = np.tanh(x)
    else:
        out = np.sign(x) * np.minimum(np.abs(x), 1.0) ** spec.holder_exponent
    return out if out.ndim else float(out)


def _activation_inplace(spec: ActivationSpec, x: np.ndarray) -> np.ndarray:
    """In-place variant for the evaluation hot path."""
    if spec.kind == "clipped_linear":
        return np.clip(x, -1.0, 1.0, out=x)
    if spec.kind == "tanh":
        return np.tanh(x, out=x)
    sign = np.sign(x)
    np.abs(x, out=x)
    np.minimum(x, 1.0, out=x)
    np.power(x, spec.holder_exponent, out=x)
    x *= sign
    return x


@dataclass(frozen=True)
class NetworkConfig:
    """Architecture and weight-law hyperparameters.

    ``widths`` lists the hidden-layer widths; a single entry is the
    shallow model.  ``scales`` is (sigma_v, sigma_b, sigma_u, sigma_a):
    hidden weights, output bias, input weights, hidden biases.  The bias
    scales may be zero (degenerate, exactly-zero biases).
    """

    alpha: float
    input_dim: int
    widths: tuple[int, ...]
    scales: tuple[float, float, float, float]
    activation: ActivationSpec

    def __post_init__(self):
        object.__setattr__(self, "widths", tuple(int(w) for w in self.widths))
        object.__setattr__(self, "scales", tuple(float(s) for s in self.scales))
        if not (0.0 < self.alpha < 2.0):
            raise ValueError(f"stability index must lie in (0, 2), got {self.alpha}")
        if self.input_dim < 1:
            raise ValueError("input dimension must be >= 1")
        if len(self.widths) < 1 or any(w < 1 for w in self.widths):
            raise ValueError("all hidden widths must be >= 1")
        sigma_v, sigma_b, sigma_u, sigma_a = self.scales
        if sigma_v <= 0.0 or sigma_u <= 0.0:
            raise ValueError("sigma_v and sigma_u must be positive")
        if sigma_b < 0.0 or sigma_a < 0.0:
            raise ValueError("bias scales must be >= 0")

    @property
    def sigma_v(self) -> float:
        return self.scales[0]

    @property
    def sigma_b(self) -> float:
        return self.scales[1]

    @property
    def sigma_u(self) -> float:
        return self.scales[2]

    @property
    def sigma_a(self) -> float:
        return self.scales[3]

    @property
    def depth(self) -> int:
        return len(self.widths)


def with_width(config: NetworkConfig, width: int) -> NetworkConfig:
    """Copy of ``config`` with every hidden layer set to ``width``."""
    return dataclasses.replace(config, widths=(int(width),) * config.depth)


@dataclass(frozen=True)
class NetworkRealization:
    """One concrete draw of all weights and biases.

    ``input_matrix`` is (H_1, d); ``hidden_matrices[l]`` maps layer l+1
    to l+2 with shape (H_{l+2}, H_{l+1}) and the last one has a single
    row; ``biases[l]`` has length H_{l+1}, the last being the scalar
    output bias.
    """

    config: NetworkConfig
    input_matrix: np.ndarray
    hidden_matrices: tuple[np.ndarray, ...]
    biases: tuple[np.ndarray, ...]

    def __post_init__(self):
        widths = self.config.widths
        full = (self.config.input_dim,) + widths + (1,)
        if self.input_matrix.shape != (full[1], full[0]):
            raise ValueError("input matrix shape inconsistent with config")
        if len(self.hidden_matrices) != len(widths):
            raise ValueError("expected one hidden matrix per hidden layer")
        for ell, mat in enumerate(self.hidden_matrices):
            if mat.shape != (full[ell + 2], full[ell + 1]):
                raise ValueError(f"hidden matrix {ell} shape inconsistent with config")
        if len(self.biases) != len(widths) + 1:
            raise ValueError("expected a bias vector per layer plus the output bias")
        for ell, vec in enumerate(self.biases):
            if vec.shape != (full[ell + 1],):
                raise ValueError(f"bias vector {ell} shape inconsistent with config")

    @property
    def output_bias(self) -> float:
        return float(self.biases[-1][0])


def _draw_group(params_alpha: float, sigma: float, shape, gen) -> np.ndarray:
    """iid SaS(alpha, sigma) array; a zero scale short-circuits to zeros."""
    if sigma == 0.0:
        return np.zeros(shape)
    return _sample_sas_gen(StableParams(params_alpha, sigma), gen, size=shape)


def sample_network(config: NetworkConfig, rng: RngStream) -> NetworkRealization:
    """Draw all weight groups from their stable laws.

    Each group uses its own substream, so realizations are bitwise
    reproducible and a wide draw restricted to its leading neurons (see
    :func:`truncate_widths`) has exactly the narrow-network law.
    """
    alpha = config.alpha
    widths = config.widths
    full = (config.input_dim,) + widths + (1,)
    input_matrix = _draw_group(
        alpha, config.sigma_u, (full[1], full[0]), rng.substream("input").generator()
    )
    hidden = tuple(
        _draw_group(
            alpha,
            config.sigma_v,
            (full[ell + 2], full[ell + 1]),
            rng.substream("hidden", ell).generator(),
        )
        for ell in range(len(widths))
    )
    biases = []
    for ell in range(len(widths)):
        biases.append(
            _draw_group(alpha, config.sigma_a, (full[ell + 1],), rng.substream("bias", ell).generator())
        )
    biases.append(_draw_group(alpha, config.sigma_b, (1,), rng.substream("output_bias").generator()))
    return NetworkRealization(config, input_matrix, hidden, tuple(biases))


def truncate_widths(realization: NetworkRealization, widths: Sequence[int]) -> NetworkRealization:
    """Restrict a realization to its leading neurons per hidden layer.

    Because entries are iid, the truncated realization is distributed
    exactly as a fresh draw at the smaller widths; width sweeps built
    this way share randomness across widths (common random numbers).
    """
    widths = tuple(int(w) for w in widths)
    old = realization.config.widths
    if len(widths) != len(old):
        raise ValueError("truncation must preserve the number of hidden layers")
    if any(w > o for w, o in zip(widths, old)):
        raise ValueError("truncation widths must not exceed the original widths")
    config = dataclasses.replace(realization.config, widths=widths)
    full = (config.input_dim,) + widths + (1,)
    input_matrix = realization.input_matrix[: full[1], :]
    hidden = tuple(
        mat[: full[ell + 2], : full[ell + 1]]
        for ell, mat in enumerate(realization.hidden_matrices)
    )
    biases = tuple(vec[: full[ell + 1]] for ell, vec in enumerate(realization.biases))
    return NetworkRealization(config, input_matrix, hidden, biases)


def _forward(realization: NetworkRealization, points: np.ndarray) -> np.ndarray:
    """Layer recursion for a block of points, one layer held at a time."""
    config = realization.config
    act = config.activation
    scale = -1.0 / config.alpha
    state = realization.input_matrix @ points.T
    state += realization.biases[0][:, None]
    for ell, mat in enumerate(realization.hidden_matrices):
        h = config.widths[ell]
        state = mat @ _activation_inplace(act, state)
        state *= h ** scale
        state += realization.biases[ell + 1][:, None]
    return state[0]


def evaluate(realization: NetworkRealization, x) -> float:
    """Exact field value at a single input point."""
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    if x.shape != (realization.config.input_dim,):
        raise ValueError(
            f"input has length {x.shape[0]}, expected {realization.config.input_dim}"
        )
    return float(_forward(realization, x[None, :])[0])


def evaluate_values(realization: NetworkRealization, grid) -> np.ndarray:
    """Field values on an (n, d) array of points, streamed in chunks."""
    grid = np.asarray(grid, dtype=np.float64)
    if grid.ndim == 1:
        grid = grid[:, None]
    if grid.shape[0] == 0:
        return np.zeros(0)
    if grid.shape[1] != realization.config.input_dim:
        raise ValueError(
            f"grid points have length {grid.shape[1]}, "
            f"expected {realization.config.input_dim}"
        )
    widest = max(realization.config.widths)
    chunk = max(1, _CHUNK_ENTRIES // widest)
    out = np.empty(grid.shape[0])
    for start in range(0, grid.shape[0], chunk):
        block = grid[start : start + chunk]
        out[start : start + chunk] = _forward(realization, block)
    return out


def evaluate_grid(realization: NetworkRealization, grid, domain: Domain | None = None) -> FieldSample:
    """Vectorized :func:`evaluate` over a list of points."""
    grid = np.asarray(grid, dtype=np.float64)
    if grid.ndim == 1:
        grid = grid[:, None]
    values = evaluate_values(realization, grid)
    return FieldSample(grid=grid, values=values, domain=domain)


def write_field_csv(sample: FieldSample, path) -> None:
    """CSV export with columns x_1..x_d, value (round-trip decimals)."""
    d = sample.grid.shape[1] if sample.grid.size else 1
    header = ",".join([f"x_{j + 1}" for j in range(d)] + ["value"])
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(header + "\n")
        for row, val in zip(sample.grid, sample.values):
            cells = [repr(float(c)) for c in row] + [repr(float(val))]
            fh.write(",".join(cells) + "\n")
