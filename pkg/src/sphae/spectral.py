"""Fourier analysis/synthesis on S^2 and SO(3), bandwidth changes, rotation.

Transform pair on S^2 (normalized measure, orthonormal harmonics):

    fhat^m_l = integral f conj(Y^m_l) dx          (analysis)
    f(x)     = sum_{l<b} sum_{|m|<=l} fhat^m_l Y^m_l(x)   (synthesis)

and on SO(3):

    fhat^{mn}_l = integral f conj(D^l_{mn}) dX
    f(R)        = sum_l (2l+1) sum_{mn} fhat^{mn}_l D^l_{mn}(R)

Both are separable over the grid: an FFT over alpha (and gamma), then a
weighted Legendre/Wigner-d contraction over beta — O(b^3)/O(b^4) per channel.
Analysis is exact for band-limited inputs thanks to the grid weights, so
analysis and synthesis are mutual inverses to rounding.

The `*_arr` functions operate on bare arrays with arbitrary leading batch
axes; the wrapper operations at the bottom take the typed single-sample
containers.  The `*_vjp` functions are the backpropagation adjoints of the
corresponding forwards as real-linear maps (complex cotangents follow the
grad_z = 2 dL/d(conj z) convention).

All operations are pure: inputs are never mutated and precomputed tables are
shared read-only, so concurrent calls on distinct inputs are safe.
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import harmonics, sgrid
from .exceptions import DimensionMismatchError, InvalidBandwidthError, NonRealSignalError
from .rotations import EulerZYZ

# ---------------------------------------------------------------------------
# typed containers
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class S2Signal:
    """Real multi-channel signal sampled on the 2b x 2b S^2 grid."""

    values: np.ndarray  # (C, 2b, 2b) float64, axes (channel, alpha, beta)
    b: int

    def __post_init__(self):
        v = self.values
        if v.ndim != 3 or v.shape[1:] != (2 * self.b, 2 * self.b):
            raise DimensionMismatchError(f"S2Signal needs (C, {2*self.b}, {2*self.b}), got {v.shape}")
        if not np.isfinite(v).all():
            raise DimensionMismatchError("S2Signal contains non-finite values")

    @property
    def channels(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class S2Spectrum:
    """Harmonic coefficients fhat^m_l, padded layout (C, b, 2b-1)."""

    coeffs: np.ndarray  # complex128, m stored at index m + (b-1)
    b: int

    def __post_init__(self):
        c = self.coeffs
        if c.ndim != 3 or c.shape[1:] != (self.b, 2 * self.b - 1):
            raise DimensionMismatchError(f"S2Spectrum needs (C, {self.b}, {2*self.b-1}), got {c.shape}")

    @property
    def channels(self) -> int:
        return self.coeffs.shape[0]


@dataclass(frozen=True)
class SO3Signal:
    """Real multi-channel signal on the 2b x 2b x 2b SO(3) grid."""

    values: np.ndarray  # (C, 2b, 2b, 2b) float64, axes (channel, alpha, beta, gamma)
    b: int

    def __post_init__(self):
        v = self.values
        n = 2 * self.b
        if v.ndim != 4 or v.shape[1:] != (n, n, n):
            raise DimensionMismatchError(f"SO3Signal needs (C, {n}, {n}, {n}), got {v.shape}")
        if not np.isfinite(v).all():
            raise DimensionMismatchError("SO3Signal contains non-finite values")

    @property
    def channels(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class SO3Spectrum:
    """Wigner coefficients fhat^{mn}_l, padded layout (C, b, 2b-1, 2b-1)."""

    coeffs: np.ndarray
    b: int

    def __post_init__(self):
        c = self.coeffs
        M = 2 * self.b - 1
        if c.ndim != 4 or c.shape[1:] != (self.b, M, M):
            raise DimensionMismatchError(f"SO3Spectrum needs (C, {self.b}, {M}, {M}), got {c.shape}")

    @property
    def channels(self) -> int:
        return self.coeffs.shape[0]


# ---------------------------------------------------------------------------
# index plumbing between centered-m layout and FFT bin order
# ---------------------------------------------------------------------------


@lru_cache(maxsize=None)
def _phase_matrix(b: int) -> np.ndarray:
    """E[j, m] = exp(-i m alpha_j), shape (2b, 2b-1), m centered.

    The alpha/gamma stages of every transform are small dense DFTs restricted
    to the 2b-1 live orders; batched zgemm against this matrix beats FFTs on
    zero-padded bins for the shapes this package sees.
    """
    from . import sgrid

    m = np.arange(-(b - 1), b)
    E = np.exp(-1j * np.outer(sgrid.alpha_nodes(b), m))
    E.setflags(write=False)
    return E


def _flatten_lead(x: np.ndarray, core: int):
    lead = x.shape[: x.ndim - core]
    return x.reshape((-1,) + x.shape[x.ndim - core :]), lead


def _bandwidth_of_grid(x: np.ndarray, axes: int) -> int:
    n = x.shape[-1]
    if n < 2 or n % 2 or any(x.shape[-i] != n for i in range(1, axes + 1)):
        raise DimensionMismatchError(f"grid axes must all equal 2b, got {x.shape}")
    return n // 2


def _bandwidth_of_spec(S: np.ndarray, mats: int) -> int:
    b = S.shape[-mats - 1]
    if b < 1 or any(S.shape[-i] != 2 * b - 1 for i in range(1, mats + 1)):
        raise DimensionMismatchError(f"spectrum axes must be (b, 2b-1...), got {S.shape}")
    return b


# ---------------------------------------------------------------------------
# S^2 transforms on bare arrays
# ---------------------------------------------------------------------------

from . import kernels  # noqa: E402  (after containers to keep reading order)


def s2_analyze_arr(x: np.ndarray, b: int | None = None) -> np.ndarray:
    """(..., 2b, 2b) real -> (..., b, 2b-1) complex coefficients."""
    x = np.asarray(x, dtype=np.float64)
    bb = _bandwidth_of_grid(x, 2)
    if b is not None and b != bb:
        raise DimensionMismatchError(f"expected bandwidth {b}, grid has {bb}")
    b = bb
    E = _phase_matrix(b)
    xf, lead = _flatten_lead(x, 2)
    # conj(Y^m_l) carries e^{-i m alpha}: contract with E[j, m] over j
    F = np.matmul(E.T.copy(), xf.astype(np.complex128)) / (2.0 * b)  # (B, M, K)
    F *= sgrid.beta_weights(b)
    S = kernels.s2_analysis(harmonics.grid_legendre(b), F)
    return S.reshape(lead + S.shape[1:])


def s2_synthesize_arr(S: np.ndarray, b: int | None = None) -> np.ndarray:
    """(..., b, 2b-1) coefficients -> (..., 2b, 2b) real grid samples."""
    S = np.asarray(S, dtype=np.complex128)
    bb = _bandwidth_of_spec(S, 1)
    if b is not None and b != bb:
        raise DimensionMismatchError(f"expected bandwidth {b}, spectrum has {bb}")
    b = bb
    Sf, lead = _flatten_lead(S, 2)
    G = kernels.s2_synthesis(harmonics.grid_legendre(b), Sf)  # (B, M, K)
    y = np.matmul(np.conj(_phase_matrix(b)), G).real  # Y^m_l carries e^{+i m alpha}
    return y.reshape(lead + y.shape[1:])


def s2_analyze_vjp(gS: np.ndarray) -> np.ndarray:
    """Adjoint of s2_analyze_arr: spectrum cotangent -> grid cotangent."""
    gS = np.asarray(gS, dtype=np.complex128)
    b = _bandwidth_of_spec(gS, 1)
    Sf, lead = _flatten_lead(gS, 2)
    G = kernels.s2_synthesis(harmonics.grid_legendre(b), Sf)
    G *= sgrid.beta_weights(b) / (2.0 * b)
    y = np.matmul(np.conj(_phase_matrix(b)), G).real
    return y.reshape(lead + y.shape[1:])


def s2_synthesize_vjp(gy: np.ndarray) -> np.ndarray:
    """Adjoint of s2_synthesize_arr: grid cotangent -> spectrum cotangent."""
    gy = np.asarray(gy, dtype=np.float64)
    b = _bandwidth_of_grid(gy, 2)
    gyf, lead = _flatten_lead(gy, 2)
    F = np.matmul(_phase_matrix(b).T.copy(), gyf.astype(np.complex128))
    S = kernels.s2_analysis(harmonics.grid_legendre(b), F)
    return S.reshape(lead + S.shape[1:])


# ---------------------------------------------------------------------------
# SO(3) transforms on bare arrays
# ---------------------------------------------------------------------------


def _two_l_plus_one(b: int) -> np.ndarray:
    return 2.0 * np.arange(b) + 1.0


def _alpha_gamma_forward(x: np.ndarray, b: int) -> np.ndarray:
    """(B, 2b, K, 2b) -> (B, M, K, M): G[m,k,n] = sum e^{+i(m a_j1 + n g_j2)} x / (2b)^2.

    Two single large GEMMs (contraction axis moved last) rather than numpy's
    broadcast matmul, which would launch thousands of tiny per-slice GEMMs.
    """
    E = _phase_matrix(b)
    n2 = 2 * b
    B, _, K, _ = x.shape
    M = n2 - 1
    T = (x.reshape(-1, n2) @ E.conj()).reshape(B, n2, K, M)  # over j2
    T = np.ascontiguousarray(T.transpose(0, 2, 3, 1))  # (B, K, M_n, j1)
    G = (T.reshape(-1, n2) @ E.conj()).reshape(B, K, M, M)  # over j1 -> m last
    G = G.transpose(0, 3, 1, 2) / (2.0 * b) ** 2  # (B, M_m, K, M_n)
    return np.ascontiguousarray(G)


def _alpha_gamma_inverse(H: np.ndarray, b: int) -> np.ndarray:
    """(B, M, K, M) -> (B, 2b, K, 2b) real: y = sum e^{-i(m a_j1 + n g_j2)} H."""
    E = _phase_matrix(b)
    n2 = 2 * b
    B, M, K, _ = H.shape
    T = (H.reshape(-1, M) @ E.T).reshape(B, M, K, n2)  # over n
    T = np.ascontiguousarray(T.transpose(0, 2, 3, 1))  # (B, K, j2, m)
    y = (T.reshape(-1, M) @ E.T).real.reshape(B, K, n2, n2)  # over m -> j1 last
    return np.ascontiguousarray(y.transpose(0, 3, 1, 2))  # (B, j1, K, j2)


def so3_analyze_arr(x: np.ndarray, b: int | None = None) -> np.ndarray:
    """(..., 2b, 2b, 2b) real -> (..., b, 2b-1, 2b-1) complex coefficients."""
    x = np.asarray(x, dtype=np.float64)
    bb = _bandwidth_of_grid(x, 3)
    if b is not None and b != bb:
        raise DimensionMismatchError(f"expected bandwidth {b}, grid has {bb}")
    b = bb
    xf, lead = _flatten_lead(x, 3)
    G = _alpha_gamma_forward(xf, b)
    G *= sgrid.beta_weights(b)[:, None]
    S = kernels.so3_analysis(harmonics.grid_wigner_d(b), G)
    return S.reshape(lead + S.shape[1:])


def so3_synthesize_arr(S: np.ndarray, b: int | None = None) -> np.ndarray:
    """(..., b, 2b-1, 2b-1) coefficients -> (..., 2b, 2b, 2b) real samples."""
    S = np.asarray(S, dtype=np.complex128)
    bb = _bandwidth_of_spec(S, 2)
    if b is not None and b != bb:
        raise DimensionMismatchError(f"expected bandwidth {b}, spectrum has {bb}")
    b = bb
    St = S * _two_l_plus_one(b)[:, None, None]
    Sf, lead = _flatten_lead(St, 3)
    H = kernels.so3_synthesis(harmonics.grid_wigner_d(b), Sf)
    y = _alpha_gamma_inverse(H, b)
    return y.reshape(lead + y.shape[1:])


def so3_analyze_vjp(gS: np.ndarray) -> np.ndarray:
    """Adjoint of so3_analyze_arr: the weighted e^{-i}-phase resynthesis."""
    gS = np.asarray(gS, dtype=np.complex128)
    b = _bandwidth_of_spec(gS, 2)
    Sf, lead = _flatten_lead(gS, 3)
    H = kernels.so3_synthesis(harmonics.grid_wigner_d(b), Sf)
    H *= sgrid.beta_weights(b)[:, None] / (2.0 * b) ** 2
    y = _alpha_gamma_inverse(H, b)
    return y.reshape(lead + y.shape[1:])


def so3_synthesize_vjp(gy: np.ndarray) -> np.ndarray:
    """Adjoint of so3_synthesize_arr: the unweighted e^{+i}-phase reanalysis."""
    gy = np.asarray(gy, dtype=np.float64)
    b = _bandwidth_of_grid(gy, 3)
    gyf, lead = _flatten_lead(gy, 3)
    G = _alpha_gamma_forward(gyf, b) * (2.0 * b) ** 2
    S = kernels.so3_analysis(harmonics.grid_wigner_d(b), G)
    S = S.reshape(lead + S.shape[1:])
    return S * _two_l_plus_one(b)[:, None, None]


# ---------------------------------------------------------------------------
# bandwidth changes
# ---------------------------------------------------------------------------


def truncate_spectrum_arr(S: np.ndarray, b_out: int, mats: int = 1) -> np.ndarray:
    """Drop degrees/orders >= b_out (center crop of the padded layout).

    `mats` is 1 for S^2 spectra (one order axis) and 2 for SO(3) block spectra.
    """
    b_in = _bandwidth_of_spec(S, mats)
    if b_out > b_in:
        raise DimensionMismatchError(f"truncate: b_out={b_out} exceeds b_in={b_in}")
    if b_out < 1:
        raise InvalidBandwidthError(f"b_out must be >= 1, got {b_out}")
    lo, hi = b_in - b_out, b_in + b_out - 1  # centered order crop
    if mats == 1:
        return np.ascontiguousarray(S[..., :b_out, lo:hi])
    return np.ascontiguousarray(S[..., :b_out, lo:hi, lo:hi])


def pad_spectrum_arr(S: np.ndarray, b_out: int, mats: int = 1) -> np.ndarray:
    """Zero-extend degrees/orders up to b_out."""
    b_in = _bandwidth_of_spec(S, mats)
    if b_out < b_in:
        raise DimensionMismatchError(f"pad: b_out={b_out} below b_in={b_in}")
    grow = b_out - b_in
    pad = [(0, 0)] * (S.ndim - mats - 1) + [(0, grow)] + [(grow, grow)] * mats
    return np.pad(S, pad)


# ---------------------------------------------------------------------------
# exact spectral rotation
# ---------------------------------------------------------------------------


def rotate_s2_spectrum_arr(S: np.ndarray, rot: EulerZYZ) -> np.ndarray:
    """fhat_l -> D_l(rot) fhat_l: the coefficients of f(R^{-1} x)."""
    b = _bandwidth_of_spec(S, 1)
    D = harmonics.wigner_D_matrices(b, rot)
    return np.einsum("lmn,...ln->...lm", D, S, optimize=True)


def rotate_so3_spectrum_arr(S: np.ndarray, rot: EulerZYZ) -> np.ndarray:
    """ghat_l -> conj(D_l(rot)) ghat_l: the coefficients of g(R^{-1} X)."""
    b = _bandwidth_of_spec(S, 2)
    D = harmonics.wigner_D_matrices(b, rot)
    return np.einsum("lmk,...lkn->...lmn", np.conj(D), S, optimize=True)


def rotate_s2_spectrum_batch(S: np.ndarray, rots: list[EulerZYZ]) -> np.ndarray:
    """Per-sample rotation of a batch: S (B, ..., b, M), one rotation each.

    Builds all Wigner-d blocks with a single recursion call, which is much
    faster than per-sample rotate_s2_spectrum_arr in inner loops.
    """
    b = _bandwidth_of_spec(S, 1)
    if S.shape[0] != len(rots):
        raise DimensionMismatchError(f"{len(rots)} rotations for batch of {S.shape[0]}")
    from . import kernels

    betas = np.array([r.beta for r in rots])
    d = kernels.wigner_table(b, betas)  # (b, M, M, B)
    m = np.arange(-(b - 1), b)
    ea = np.exp(-1j * np.outer([r.alpha for r in rots], m))  # (B, M)
    eg = np.exp(-1j * np.outer([r.gamma for r in rots], m))
    expand = (slice(None),) + (None,) * (S.ndim - 3)
    Sn = S * eg[expand + (None, slice(None))]  # fold e^{-i n gamma} into n axis
    out = np.einsum("lmnk,k...ln->k...lm", d, Sn, optimize=True)
    return out * ea[expand + (None, slice(None))]


# ---------------------------------------------------------------------------
# valid-slot masks for the padded layouts
# ---------------------------------------------------------------------------


@lru_cache(maxsize=None)
def order_mask_s2(b: int) -> np.ndarray:
    """(b, 2b-1) bool, True where |m| <= l."""
    m = np.abs(np.arange(-(b - 1), b))
    mask = m[None, :] <= np.arange(b)[:, None]
    mask.setflags(write=False)
    return mask


@lru_cache(maxsize=None)
def order_mask_so3(b: int) -> np.ndarray:
    """(b, 2b-1, 2b-1) bool, True where |m|, |n| <= l."""
    s2 = order_mask_s2(b)
    mask = s2[:, :, None] & s2[:, None, :]
    mask.setflags(write=False)
    return mask


# ---------------------------------------------------------------------------
# real-signal symmetry
# ---------------------------------------------------------------------------


def conj_flip_s2(S: np.ndarray) -> np.ndarray:
    """(-1)^m conj(fhat^{-m}_l): equals fhat^m_l for spectra of real signals."""
    b = _bandwidth_of_spec(S, 1)
    m = np.arange(-(b - 1), b)
    return np.where(m % 2 == 0, 1.0, -1.0) * np.conj(S[..., ::-1])


def conj_flip_so3(S: np.ndarray) -> np.ndarray:
    """(-1)^{m-n} conj(fhat^{-m,-n}_l) for the block layout."""
    b = _bandwidth_of_spec(S, 2)
    m = np.arange(-(b - 1), b)
    sign = np.where((m[:, None] - m[None, :]) % 2 == 0, 1.0, -1.0)
    return sign * np.conj(S[..., ::-1, ::-1])


def real_symmetry_defect(S: np.ndarray, mats: int = 1) -> float:
    flip = conj_flip_so3(S) if mats == 2 else conj_flip_s2(S)
    return float(np.abs(S - flip).max(initial=0.0))


def symmetrize_spectrum(S: np.ndarray, mats: int = 1) -> np.ndarray:
    """Project onto the real-signal symmetric subspace (orthogonal projection)."""
    flip = conj_flip_so3(S) if mats == 2 else conj_flip_s2(S)
    return 0.5 * (S + flip)


def _check_real_spectrum(S: np.ndarray, mats: int = 1) -> None:
    defect = real_symmetry_defect(S, mats)
    scale = max(1.0, float(np.abs(S).max(initial=0.0)))
    if defect > 1e-6 * scale:
        raise NonRealSignalError(
            f"spectrum violates real-signal conjugate symmetry (defect {defect:.3e})"
        )


# ---------------------------------------------------------------------------
# energy bookkeeping (Parseval)
# ---------------------------------------------------------------------------


def spectrum_energy_s2(S: np.ndarray) -> np.ndarray:
    """sum_{lm} |fhat|^2 per leading index; equals the grid norm^2 of f."""
    return np.sum(np.abs(S) ** 2, axis=(-2, -1))


def spectrum_energy_so3(S: np.ndarray) -> np.ndarray:
    """sum_l (2l+1) sum_{mn} |fhat|^2 per leading index."""
    b = _bandwidth_of_spec(S, 2)
    return np.einsum("...lmn,l->...", np.abs(S) ** 2, _two_l_plus_one(b), optimize=True)


def signal_energy_s2(x) -> np.ndarray:
    """Quadrature norm^2 (normalized measure) of grid samples."""
    vals = np.asarray(getattr(x, "values", x), dtype=np.float64)
    return sgrid.integrate_s2(vals**2)


def signal_energy_so3(x) -> np.ndarray:
    vals = np.asarray(getattr(x, "values", x), dtype=np.float64)
    return sgrid.integrate_so3(vals**2)


# ---------------------------------------------------------------------------
# point evaluation (used by tests and the alignment oracle)
# ---------------------------------------------------------------------------


def so3_eval_at(S: np.ndarray, rot: EulerZYZ) -> np.ndarray:
    """Evaluate the SO(3) synthesis sum at one rotation, per leading index."""
    b = _bandwidth_of_spec(S, 2)
    D = harmonics.wigner_D_matrices(b, rot) * _two_l_plus_one(b)[:, None, None]
    return np.einsum("...lmn,lmn->...", S, D, optimize=True)


def so3_eval_many(S: np.ndarray, eulers: np.ndarray) -> np.ndarray:
    """Evaluate at a batch of rotations (K, 3) -> (..., K); one d-table call."""
    b = _bandwidth_of_spec(S, 2)
    eulers = np.atleast_2d(np.asarray(eulers, dtype=np.float64))
    from . import kernels

    d = kernels.wigner_table(b, eulers[:, 1])  # (b, M, M, K)
    m = np.arange(-(b - 1), b)
    ea = np.exp(-1j * np.outer(eulers[:, 0], m))  # (K, M)
    eg = np.exp(-1j * np.outer(eulers[:, 2], m))
    St = S * _two_l_plus_one(b)[:, None, None]
    return np.einsum("...lmn,lmnk,km,kn->...k", St, d, ea, eg, optimize=True)


# ---------------------------------------------------------------------------
# typed wrappers
# ---------------------------------------------------------------------------


def s2_analyze(f: S2Signal) -> S2Spectrum:
    return S2Spectrum(coeffs=s2_analyze_arr(f.values, f.b), b=f.b)


def s2_synthesize(F: S2Spectrum) -> S2Signal:
    _check_real_spectrum(F.coeffs)
    return S2Signal(values=s2_synthesize_arr(F.coeffs, F.b), b=F.b)


def so3_analyze(f: SO3Signal) -> SO3Spectrum:
    return SO3Spectrum(coeffs=so3_analyze_arr(f.values, f.b), b=f.b)


def so3_synthesize(F: SO3Spectrum) -> SO3Signal:
    _check_real_spectrum(F.coeffs, mats=2)
    return SO3Signal(values=so3_synthesize_arr(F.coeffs, F.b), b=F.b)


def truncate_spectrum(F, b_out: int):
    if isinstance(F, S2Spectrum):
        return S2Spectrum(coeffs=truncate_spectrum_arr(F.coeffs, b_out, mats=1), b=b_out)
    if isinstance(F, SO3Spectrum):
        return SO3Spectrum(coeffs=truncate_spectrum_arr(F.coeffs, b_out, mats=2), b=b_out)
    raise DimensionMismatchError(f"not a spectrum: {type(F).__name__}")


def pad_spectrum(F, b_out: int):
    if isinstance(F, S2Spectrum):
        return S2Spectrum(coeffs=pad_spectrum_arr(F.coeffs, b_out, mats=1), b=b_out)
    if isinstance(F, SO3Spectrum):
        return SO3Spectrum(coeffs=pad_spectrum_arr(F.coeffs, b_out, mats=2), b=b_out)
    raise DimensionMismatchError(f"not a spectrum: {type(F).__name__}")


def rotate_s2(f, rot: EulerZYZ):
    """Rotate a signal or spectrum on S^2: returns the same kind."""
    if isinstance(f, S2Signal):
        F = s2_analyze_arr(f.values, f.b)
        return S2Signal(values=s2_synthesize_arr(rotate_s2_spectrum_arr(F, rot), f.b), b=f.b)
    if isinstance(f, S2Spectrum):
        return S2Spectrum(coeffs=rotate_s2_spectrum_arr(f.coeffs, rot), b=f.b)
    raise DimensionMismatchError(f"rotate_s2 expects an S2 signal or spectrum, got {type(f).__name__}")


def rotate_so3(f, rot: EulerZYZ):
    """Rotate (left-translate) a signal or spectrum on SO(3)."""
    if isinstance(f, SO3Signal):
        F = so3_analyze_arr(f.values, f.b)
        return SO3Signal(values=so3_synthesize_arr(rotate_so3_spectrum_arr(F, rot), f.b), b=f.b)
    if isinstance(f, SO3Spectrum):
        return SO3Spectrum(coeffs=rotate_so3_spectrum_arr(f.coeffs, rot), b=f.b)
    raise DimensionMismatchError(f"rotate_so3 expects an SO3 signal or spectrum, got {type(f).__name__}")
