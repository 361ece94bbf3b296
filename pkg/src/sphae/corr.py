"""Cross-correlation on S^2 and SO(3) via the spectral correlation theorem.

`s2_correlate(f, h)` evaluates C(R) = integral_{S^2} h(R^{-1} x) f(x) dx on
the SO(3) grid: per degree the coefficient block is the outer product

    Chat_l[m, n] = conj(fhat^m_l) hhat^n_l / (2l + 1),

followed by one inverse SO(3) transform.  (For real signals this equals the
outer-product form of the correlation theorem; the conjugate placement is
the one that makes the correlation equivariant: rotating f by R rotates the
output volume by R.)  `so3_correlate` is the block-matrix analogue

    Chat_l = fhat_l hhat_l^dagger / (2l + 1).

Multi-channel inputs sum the per-degree blocks over channels, producing a
single correlation volume (one aligning rotation for all channels).

`*_bruteforce` are the slow quadrature oracles: they rotate h spectrally to
every grid rotation and take the quadrature inner product with f.  Tests
hold the fast path to them.
"""

from __future__ import annotations

import numpy as np

from . import sgrid
from .exceptions import DimensionMismatchError
from .rotations import EulerZYZ
from .spectral import (
    S2Signal,
    S2Spectrum,
    SO3Signal,
    SO3Spectrum,
    pad_spectrum_arr,
    rotate_s2_spectrum_arr,
    rotate_so3_spectrum_arr,
    s2_analyze_arr,
    s2_synthesize_arr,
    so3_analyze_arr,
    so3_synthesize_arr,
    truncate_spectrum_arr,
)


def _inv_two_l_plus_one(b: int) -> np.ndarray:
    return 1.0 / (2.0 * np.arange(b) + 1.0)


def _as_s2_spectrum_arr(f) -> tuple[np.ndarray, int]:
    if isinstance(f, S2Signal):
        return s2_analyze_arr(f.values, f.b), f.b
    if isinstance(f, S2Spectrum):
        return np.asarray(f.coeffs, dtype=np.complex128), f.b
    raise DimensionMismatchError(f"expected S2 signal or spectrum, got {type(f).__name__}")


def _as_so3_spectrum_arr(f) -> tuple[np.ndarray, int]:
    if isinstance(f, SO3Signal):
        return so3_analyze_arr(f.values, f.b), f.b
    if isinstance(f, SO3Spectrum):
        return np.asarray(f.coeffs, dtype=np.complex128), f.b
    raise DimensionMismatchError(f"expected SO3 signal or spectrum, got {type(f).__name__}")


# ---------------------------------------------------------------------------
# spectral kernels on bare coefficient arrays (also used by the nn layers)
# ---------------------------------------------------------------------------


def s2_corr_spectrum_arr(F: np.ndarray, H: np.ndarray, b_out: int) -> np.ndarray:
    """Per-degree outer products, channel-summed; (..., C, b, M) x2 -> (..., b_out, M, M)."""
    b_c = min(F.shape[-2], H.shape[-2], b_out)
    Ft = truncate_spectrum_arr(F, b_c, mats=1)
    Ht = truncate_spectrum_arr(H, b_c, mats=1)
    C = np.einsum("...clm,...cln->...lmn", np.conj(Ft), Ht, optimize=True)
    C *= _inv_two_l_plus_one(b_c)[:, None, None]
    return pad_spectrum_arr(C, b_out, mats=2) if b_out > b_c else C


def so3_corr_spectrum_arr(F: np.ndarray, H: np.ndarray, b_out: int) -> np.ndarray:
    """Per-degree block products; (..., C, b, M, M) x2 -> (..., b_out, M, M).

    No 1/(2l+1) here: the SO(3) inner product already carries the (2l+1)
    weight that synthesis reapplies, unlike the orthonormal S^2 pairing.
    """
    b_c = min(F.shape[-3], H.shape[-3], b_out)
    Ft = truncate_spectrum_arr(F, b_c, mats=2)
    Ht = truncate_spectrum_arr(H, b_c, mats=2)
    C = np.einsum("...clmk,...clnk->...lmn", Ft, np.conj(Ht), optimize=True)
    return pad_spectrum_arr(C, b_out, mats=2) if b_out > b_c else C


# ---------------------------------------------------------------------------
# public operations
# ---------------------------------------------------------------------------


def _check_channels(cf: int, ch: int) -> None:
    if cf != ch:
        raise DimensionMismatchError(f"channel mismatch: {cf} vs {ch}")


def s2_correlate(f, h, b_out: int | None = None) -> SO3Signal:
    """Correlation volume of a spherical signal f with a filter h."""
    F, bf = _as_s2_spectrum_arr(f)
    H, bh = _as_s2_spectrum_arr(h)
    _check_channels(F.shape[0], H.shape[0])
    b_out = b_out if b_out is not None else min(bf, bh)
    C = s2_corr_spectrum_arr(F, H, b_out)
    return SO3Signal(values=so3_synthesize_arr(C)[None], b=b_out)


def so3_correlate(f, h, b_out: int | None = None) -> SO3Signal:
    """Correlation volume of an SO(3) signal f with a filter h."""
    F, bf = _as_so3_spectrum_arr(f)
    H, bh = _as_so3_spectrum_arr(h)
    _check_channels(F.shape[0], H.shape[0])
    b_out = b_out if b_out is not None else min(bf, bh)
    C = so3_corr_spectrum_arr(F, H, b_out)
    return SO3Signal(values=so3_synthesize_arr(C)[None], b=b_out)


def argmax_so3(c) -> tuple[EulerZYZ, float]:
    """Grid point of the maximum sample (channels summed if present).

    Ties break toward the smallest (k_beta, j_alpha, j_gamma) index triple.
    """
    vals = np.asarray(getattr(c, "values", c), dtype=np.float64)
    if vals.ndim == 4:
        vals = vals.sum(axis=0)
    if vals.ndim != 3:
        raise DimensionMismatchError(f"argmax_so3 expects a (2b)^3 volume, got {vals.shape}")
    b = vals.shape[-1] // 2
    vmax = vals.max()
    cand = np.argwhere(vals == vmax)  # rows are (j_alpha, k_beta, j_gamma)
    order = np.lexsort((cand[:, 2], cand[:, 0], cand[:, 1]))
    j1, k, j2 = (int(v) for v in cand[order[0]])
    rot = EulerZYZ(
        alpha=float(sgrid.alpha_nodes(b)[j1]),
        beta=float(sgrid.beta_nodes(b)[k]),
        gamma=float(sgrid.alpha_nodes(b)[j2]),
    )
    return rot, float(vmax)


def argmax_so3_refined(C_spec: np.ndarray, b_out: int, rounds: int = 3):
    """Dense peak search on a correlation spectrum: zero-padded synthesis at
    b_out, grid argmax, then `rounds` of 3x3x3 local grid search with halving
    spacing via exact spectral point evaluation.

    Used by evaluation (aligned PSNR); the training loss keeps the plain
    one-transform grid argmax.
    """
    from .spectral import so3_eval_many

    vol = so3_synthesize_arr(pad_spectrum_arr(C_spec, b_out, mats=2) if b_out > C_spec.shape[-3] else C_spec)
    best, val = argmax_so3(vol)
    step_a = np.pi / (2.0 * b_out)
    step_b = np.pi / (4.0 * b_out)
    offs = np.array([-1.0, 0.0, 1.0])
    for _ in range(rounds):
        da, db, dg = np.meshgrid(offs * step_a, offs * step_b, offs * step_a, indexing="ij")
        cand = np.stack(
            [best.alpha + da.ravel(), np.clip(best.beta + db.ravel(), 0.0, np.pi), best.gamma + dg.ravel()],
            axis=1,
        )
        vals = so3_eval_many(C_spec, cand).real
        k = int(np.argmax(vals))
        if vals[k] > val:
            val = float(vals[k])
            best = EulerZYZ(float(cand[k, 0]) % (2 * np.pi), float(cand[k, 1]), float(cand[k, 2]) % (2 * np.pi))
        step_a /= 2.0
        step_b /= 2.0
    return best, val


# ---------------------------------------------------------------------------
# brute-force quadrature oracles (slow; used by tests and selftest)
# ---------------------------------------------------------------------------


def s2_correlate_bruteforce(f, h, b_out: int) -> SO3Signal:
    """Eq-by-definition correlation: rotate h to every grid rotation, integrate."""
    F, _ = _as_s2_spectrum_arr(f)
    H, _ = _as_s2_spectrum_arr(h)
    _check_channels(F.shape[0], H.shape[0])
    g = sgrid.make_so3_grid(b_out)
    n = 2 * b_out
    out = np.empty((n, n, n))
    f_grid = s2_synthesize_arr(F)
    for k, beta in enumerate(g.beta):
        for j1, alpha in enumerate(g.alpha):
            for j2, gamma in enumerate(g.gamma):
                rot = EulerZYZ(alpha, beta, gamma)
                h_rot = s2_synthesize_arr(rotate_s2_spectrum_arr(H, rot))
                out[j1, k, j2] = np.sum(sgrid.integrate_s2(f_grid * h_rot))
    return SO3Signal(values=out[None], b=b_out)


def so3_correlate_bruteforce(f, h, b_out: int) -> SO3Signal:
    F, _ = _as_so3_spectrum_arr(f)
    H, _ = _as_so3_spectrum_arr(h)
    _check_channels(F.shape[0], H.shape[0])
    g = sgrid.make_so3_grid(b_out)
    n = 2 * b_out
    out = np.empty((n, n, n))
    f_grid = so3_synthesize_arr(F)
    for k, beta in enumerate(g.beta):
        for j1, alpha in enumerate(g.alpha):
            for j2, gamma in enumerate(g.gamma):
                rot = EulerZYZ(alpha, beta, gamma)
                h_rot = so3_synthesize_arr(rotate_so3_spectrum_arr(H, rot))
                out[j1, k, j2] = np.sum(sgrid.integrate_so3(f_grid * h_rot))
    return SO3Signal(values=out[None], b=b_out)
