"""Equiangular sampling grids on S^2 and SO(3) with exact quadrature.

Both grids place 2b nodes per angle at

    alpha_j = 2 pi j / (2b),  beta_k = pi (2k+1) / (4b),  gamma_j = alpha_j,

so no node sits on a pole.  The beta weights are the closed-form
Driscoll-Healy weights

    w_dh[k] = (2/b) sin(beta_k) sum_{p<b} sin((2p+1) beta_k) / (2p+1),

which integrate sin(beta) P_l(cos beta) exactly for all l < 2b.  All
integrals in this package are against the normalized measures
d(alpha) sin(beta) d(beta) / (4 pi) on S^2 and
d(alpha) sin(beta) d(beta) d(gamma) / (8 pi^2) on SO(3), so the stored
weights are rescaled to sum to 1 and a grid sum uses the per-point weight
w[k]/(2b) on S^2 and w[k]/(2b)^2 on SO(3).

Grids are immutable after construction and safe to share across threads.
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .exceptions import DimensionMismatchError, InvalidBandwidthError


@dataclass(frozen=True)
class S2Grid:
    b: int
    alpha: np.ndarray  # (2b,)
    beta: np.ndarray  # (2b,)
    weights: np.ndarray  # (2b,), sums to 1


@dataclass(frozen=True)
class SO3Grid:
    b: int
    alpha: np.ndarray  # (2b,)
    beta: np.ndarray  # (2b,)
    gamma: np.ndarray  # (2b,)
    weights: np.ndarray  # (2b,), sums to 1


def _check_bandwidth(b) -> int:
    if not isinstance(b, (int, np.integer)) or isinstance(b, bool) or b < 1:
        raise InvalidBandwidthError(f"bandwidth must be a positive integer, got {b!r}")
    return int(b)


@lru_cache(maxsize=None)
def beta_nodes(b: int) -> np.ndarray:
    b = _check_bandwidth(b)
    beta = np.pi * (2.0 * np.arange(2 * b) + 1.0) / (4.0 * b)
    beta.setflags(write=False)
    return beta


@lru_cache(maxsize=None)
def alpha_nodes(b: int) -> np.ndarray:
    b = _check_bandwidth(b)
    alpha = 2.0 * np.pi * np.arange(2 * b) / (2.0 * b)
    alpha.setflags(write=False)
    return alpha


@lru_cache(maxsize=None)
def beta_weights(b: int) -> np.ndarray:
    """Normalized beta quadrature weights (sum 1, i.e. Driscoll-Healy / 2)."""
    b = _check_bandwidth(b)
    beta = beta_nodes(b)
    p = 2.0 * np.arange(b) + 1.0  # odd integers 1, 3, ..., 2b-1
    w = (2.0 / b) * np.sin(beta) * (np.sin(np.outer(beta, p)) @ (1.0 / p))
    w *= 0.5
    w.setflags(write=False)
    return w


def make_s2_grid(b: int) -> S2Grid:
    b = _check_bandwidth(b)
    return S2Grid(b=b, alpha=alpha_nodes(b), beta=beta_nodes(b), weights=beta_weights(b))


def make_so3_grid(b: int) -> SO3Grid:
    b = _check_bandwidth(b)
    a = alpha_nodes(b)
    return SO3Grid(b=b, alpha=a, beta=beta_nodes(b), gamma=a, weights=beta_weights(b))


def _values_of(f, ndim_grid: int) -> tuple[np.ndarray, int]:
    """Accept a Signal wrapper or a bare array; return (values, bandwidth)."""
    vals = np.asarray(getattr(f, "values", f), dtype=np.float64)
    if vals.ndim < ndim_grid:
        raise DimensionMismatchError(f"expected at least {ndim_grid} grid axes, got shape {vals.shape}")
    n = vals.shape[-1]
    if n % 2 or any(s != n for s in vals.shape[-ndim_grid:]):
        raise DimensionMismatchError(f"grid axes must all equal 2b, got shape {vals.shape}")
    return vals, n // 2


def integrate_s2(f) -> np.ndarray:
    """Normalized integral over S^2, one value per leading (channel) index.

    Exact (to rounding) for signals band-limited at the grid bandwidth.
    """
    vals, b = _values_of(f, 2)
    return vals.mean(axis=-2) @ beta_weights(b)


def integrate_so3(f) -> np.ndarray:
    """Normalized integral over SO(3), one value per leading index."""
    vals, b = _values_of(f, 3)
    return vals.mean(axis=(-3, -1)) @ beta_weights(b)
