"""Spherical harmonics and Wigner d/D evaluation.

Conventions (these fix every transform in the package):

* Harmonics are orthonormal against the NORMALIZED S^2 measure,
  so Y^0_0 = 1 and Y^m_l(alpha, beta) = Pbar^m_l(cos beta) e^{i m alpha}
  with Pbar^m_l = sqrt((2l+1) (l-m)!/(l+m)!) P^m_l, Condon-Shortley phase
  included in P^m_l.
* Wigner D is the ZYZ matrix element

      D^l_{mn}(alpha, beta, gamma) = e^{-i m alpha} d^l_{mn}(beta) e^{-i n gamma}

  of the operator (U(R) f)(x) = f(R^{-1} x), so D is a homomorphism:
  D(R1) D(R2) = D(R1 R2), each d(beta) is real orthogonal, and
  Pbar^m_l(cos beta) = sqrt(2l+1) d^l_{m0}(beta).

Tables are evaluated by a three-term upward recursion in l (stable far past
l = 64), cached per bandwidth, returned read-only, and safe for concurrent
reads.
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import kernels, sgrid
from .exceptions import DimensionMismatchError
from .rotations import EulerZYZ


@dataclass(frozen=True)
class LegendreTable:
    """Pbar^m_l at the grid beta nodes; values[l, m+(b-1), k], zero for |m| > l."""

    b: int
    values: np.ndarray  # (b, 2b-1, 2b)


@dataclass(frozen=True)
class WignerTable:
    """d^l_{mn} at the grid beta nodes; values[l, m+(b-1), n+(b-1), k]."""

    b: int
    values: np.ndarray  # (b, 2b-1, 2b-1, 2b)


def legendre_values(b: int, beta: np.ndarray) -> np.ndarray:
    """Pbar^m_l(cos beta) as (b, 2b-1, len(beta))."""
    col = kernels.wigner_table(b, beta, n_zero_only=True)[:, :, 0, :]
    scale = np.sqrt(2.0 * np.arange(b) + 1.0)
    return col * scale[:, None, None]


def wigner_d_values(b: int, beta: np.ndarray) -> np.ndarray:
    """d^l_{mn}(beta) as (b, 2b-1, 2b-1, len(beta))."""
    return kernels.wigner_table(b, beta, n_zero_only=False)


@lru_cache(maxsize=None)
def grid_legendre(b: int) -> np.ndarray:
    v = legendre_values(b, sgrid.beta_nodes(b))
    v.setflags(write=False)
    return v


@lru_cache(maxsize=None)
def grid_wigner_d(b: int) -> np.ndarray:
    v = wigner_d_values(b, sgrid.beta_nodes(b))
    v.setflags(write=False)
    return v


def legendre_table(b: int) -> LegendreTable:
    return LegendreTable(b=b, values=grid_legendre(b))


def wigner_d_table(b: int) -> WignerTable:
    return WignerTable(b=b, values=grid_wigner_d(b))


def wigner_D_matrices(b: int, rot: EulerZYZ) -> np.ndarray:
    """Padded stack of D^l(rot) for l < b, shape (b, 2b-1, 2b-1) complex."""
    d = wigner_d_values(b, np.array([rot.beta]))[..., 0]
    m = np.arange(-(b - 1), b)
    return np.exp(-1j * m * rot.alpha)[:, None] * d * np.exp(-1j * m * rot.gamma)[None, :]


def wigner_D(l: int, m: int, n: int, rot: EulerZYZ) -> complex:
    """Single matrix element D^l_{mn}(rot)."""
    if l < 0 or abs(m) > l or abs(n) > l:
        raise DimensionMismatchError(f"invalid Wigner indices l={l}, m={m}, n={n}")
    b = l + 1
    c = b - 1
    return complex(wigner_D_matrices(b, rot)[l, c + m, c + n])
