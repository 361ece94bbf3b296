"""Differentiable layers with hand-written forward/backward pairs.

Every `*_forward` returns (output, ctx); the matching `*_backward` takes the
output cotangent and ctx and returns the input cotangent plus parameter
cotangents.  Gradients are plain partial derivatives with respect to array
entries; complex cotangents use grad_z = 2 dL/d(conj z), so a complex
parameter's gradient is dL/d(Re) + i dL/d(Im) entrywise.

Layers operate on bare arrays with a leading (batch, channel) pair of axes;
batch may be any shape prefix.  Convolution filters live directly in the
spectral domain at b_f = min(b_in, b_out) (degrees above that bound cannot
contribute, so they are not parameterized), and the per-degree correlation
blocks from `corr` implement the forward maps.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import sgrid
from .exceptions import DimensionMismatchError
from .spectral import (
    order_mask_s2,
    order_mask_so3,
    pad_spectrum_arr,
    s2_analyze_arr,
    s2_analyze_vjp,
    so3_analyze_arr,
    so3_analyze_vjp,
    so3_synthesize_arr,
    so3_synthesize_vjp,
    symmetrize_spectrum,
    truncate_spectrum_arr,
)

# ---------------------------------------------------------------------------
# parameter containers and initialization
# ---------------------------------------------------------------------------


@dataclass
class S2ConvParams:
    """Spectral filters hhat^m_l: complex (C_out, C_in, b_f, 2b_f-1), plus bias."""

    weight: np.ndarray
    bias: np.ndarray

    @property
    def b(self) -> int:
        return self.weight.shape[2]


@dataclass
class SO3ConvParams:
    """Block filters hhat^{mn}_l: complex (C_out, C_in, b_f, M, M), plus bias."""

    weight: np.ndarray
    bias: np.ndarray

    @property
    def b(self) -> int:
        return self.weight.shape[2]


@dataclass
class DenseParams:
    weight: np.ndarray  # (n_out, n_in)
    bias: np.ndarray  # (n_out,)


def _spectral_std(c_in: int, b: int) -> np.ndarray:
    """Per-degree filter std 1/sqrt(C_in (2l+1) b): keeps output variance O(1)."""
    return 1.0 / np.sqrt(c_in * (2.0 * np.arange(b) + 1.0) * b)


def init_s2conv(rng: np.random.Generator, c_out: int, c_in: int, b_f: int) -> S2ConvParams:
    M = 2 * b_f - 1
    std = _spectral_std(c_in, b_f)[:, None]
    w = (rng.standard_normal((c_out, c_in, b_f, M)) + 1j * rng.standard_normal((c_out, c_in, b_f, M)))
    w *= std / np.sqrt(2.0)
    w *= order_mask_s2(b_f)
    w = symmetrize_spectrum(w, mats=1)
    return S2ConvParams(weight=w, bias=np.zeros(c_out))


def init_so3conv(rng: np.random.Generator, c_out: int, c_in: int, b_f: int) -> SO3ConvParams:
    M = 2 * b_f - 1
    std = _spectral_std(c_in, b_f)[:, None, None]
    w = rng.standard_normal((c_out, c_in, b_f, M, M)) + 1j * rng.standard_normal(
        (c_out, c_in, b_f, M, M)
    )
    w *= std / np.sqrt(2.0)
    w *= order_mask_so3(b_f)
    w = symmetrize_spectrum(w, mats=2)
    return SO3ConvParams(weight=w, bias=np.zeros(c_out))


def init_dense(rng: np.random.Generator, n_out: int, n_in: int) -> DenseParams:
    return DenseParams(weight=rng.standard_normal((n_out, n_in)) / np.sqrt(n_in), bias=np.zeros(n_out))


# ---------------------------------------------------------------------------
# spherical convolution: S^2 input -> SO(3) feature map
# ---------------------------------------------------------------------------


def _inv_two_l_plus_one(b: int) -> np.ndarray:
    return 1.0 / (2.0 * np.arange(b) + 1.0)


# Per-degree BLAS contractions for the convolution block products.  The
# padded einsum forms are clearer but an order of magnitude slower on these
# shapes (c_einsum does not vectorize them), so each degree becomes a GEMM.


def _s2_blocks_fwd(Fb: np.ndarray, W: np.ndarray) -> np.ndarray:
    """C[b,o,l,m,n] = sum_i conj(F[b,i,l,m]) W[o,i,l,n]."""
    B, Ci, b_f, M = Fb.shape
    Co = W.shape[0]
    out = np.empty((B, Co, b_f, M, M), dtype=np.complex128)
    for l in range(b_f):
        t = np.tensordot(np.conj(Fb[:, :, l]), W[:, :, l], axes=([1], [1]))  # (B,M,o,N)
        out[:, :, l] = t.transpose(0, 2, 1, 3)
    return out


def _s2_blocks_gw(Fb: np.ndarray, gC: np.ndarray) -> np.ndarray:
    """gW[o,i,l,n] = sum_{b,m} F[b,i,l,m] gC[b,o,l,m,n]."""
    B, Ci, b_f, M = Fb.shape
    Co = gC.shape[1]
    out = np.empty((Co, Ci, b_f, M), dtype=np.complex128)
    for l in range(b_f):
        t = np.tensordot(Fb[:, :, l], gC[:, :, l], axes=([0, 2], [0, 2]))  # (i,o,n)
        out[:, :, l] = t.transpose(1, 0, 2)
    return out


def _s2_blocks_gf(W: np.ndarray, gCc: np.ndarray) -> np.ndarray:
    """gF[b,i,l,m] = sum_{o,n} W[o,i,l,n] conj(gC)[b,o,l,m,n]."""
    B = gCc.shape[0]
    Co, Ci, b_f, M = W.shape
    out = np.empty((B, Ci, b_f, M), dtype=np.complex128)
    for l in range(b_f):
        t = np.tensordot(gCc[:, :, l], W[:, :, l], axes=([1, 3], [0, 2]))  # (B,m,i)
        out[:, :, l] = t.transpose(0, 2, 1)
    return out


def _so3_blocks_fwd(Fb: np.ndarray, Wc: np.ndarray) -> np.ndarray:
    """C[b,o,l,m,n] = sum_{i,k} F[b,i,l,m,k] conj(W)[o,i,l,n,k]."""
    B, Ci, b_f, M, _ = Fb.shape
    Co = Wc.shape[0]
    out = np.empty((B, Co, b_f, M, M), dtype=np.complex128)
    for l in range(b_f):
        t = np.tensordot(Fb[:, :, l], Wc[:, :, l], axes=([1, 3], [1, 3]))  # (B,m,o,n)
        out[:, :, l] = t.transpose(0, 2, 1, 3)
    return out


def _so3_blocks_gw(Fb: np.ndarray, gCc: np.ndarray) -> np.ndarray:
    """gW[o,i,l,n,k] = sum_{b,m} F[b,i,l,m,k] conj(gC)[b,o,l,m,n]."""
    B, Ci, b_f, M, _ = Fb.shape
    Co = gCc.shape[1]
    out = np.empty((Co, Ci, b_f, M, M), dtype=np.complex128)
    for l in range(b_f):
        t = np.tensordot(gCc[:, :, l], Fb[:, :, l], axes=([0, 2], [0, 2]))  # (o,n,i,k)
        out[:, :, l] = t.transpose(0, 2, 1, 3)
    return out


def _so3_blocks_gf(W: np.ndarray, gC: np.ndarray) -> np.ndarray:
    """gF[b,i,l,m,k] = sum_{o,n} W[o,i,l,n,k] gC[b,o,l,m,n]."""
    B = gC.shape[0]
    Co, Ci, b_f, M, _ = W.shape
    out = np.empty((B, Ci, b_f, M, M), dtype=np.complex128)
    for l in range(b_f):
        t = np.tensordot(gC[:, :, l], W[:, :, l], axes=([1, 3], [0, 2]))  # (B,m,i,k)
        out[:, :, l] = t.transpose(0, 2, 1, 3)
    return out


def s2conv_forward(x: np.ndarray, p: S2ConvParams, b_out: int):
    """x (..., C_in, 2b_in, 2b_in) -> y (..., C_out, 2b_out, 2b_out, 2b_out)."""
    b_in = x.shape[-1] // 2
    b_f = p.b
    if b_f != min(b_in, b_out):
        raise DimensionMismatchError(f"filters at b={b_f}, expected min({b_in},{b_out})")
    if x.shape[-3] != p.weight.shape[1]:
        raise DimensionMismatchError(f"C_in mismatch: {x.shape[-3]} vs {p.weight.shape[1]}")
    F = s2_analyze_arr(x)
    Ft = truncate_spectrum_arr(F, b_f, mats=1)
    lead = Ft.shape[: Ft.ndim - 3]
    Fb = Ft.reshape((-1,) + Ft.shape[-3:])
    C = _s2_blocks_fwd(Fb, p.weight)
    C *= _inv_two_l_plus_one(b_f)[:, None, None]
    if b_out > b_f:
        C = pad_spectrum_arr(C, b_out, mats=2)
    y = so3_synthesize_arr(C) + p.bias[:, None, None, None]
    ctx = (Fb, lead, b_in, b_out, b_f, p.weight)
    return y.reshape(lead + y.shape[1:]), ctx


def s2conv_backward(gy: np.ndarray, ctx):
    Fb, lead, b_in, b_out, b_f, W = ctx
    gyb = gy.reshape((-1,) + gy.shape[gy.ndim - 4 :])
    gbias = gyb.sum(axis=(0, 2, 3, 4))
    gC = so3_synthesize_vjp(gyb)
    gC = truncate_spectrum_arr(gC, b_f, mats=2)
    gC = gC * _inv_two_l_plus_one(b_f)[:, None, None]
    gW = _s2_blocks_gw(Fb, gC)
    gFt = _s2_blocks_gf(W, np.conj(gC))
    gF = pad_spectrum_arr(gFt, b_in, mats=1)
    gx = s2_analyze_vjp(gF)
    return gx.reshape(lead + gx.shape[1:]), gW, gbias


# ---------------------------------------------------------------------------
# SO(3) convolution
# ---------------------------------------------------------------------------


def so3conv_forward(x: np.ndarray, p: SO3ConvParams, b_out: int):
    """x (..., C_in, (2b_in)^3) -> y (..., C_out, (2b_out)^3)."""
    b_in = x.shape[-1] // 2
    b_f = p.b
    if b_f != min(b_in, b_out):
        raise DimensionMismatchError(f"filters at b={b_f}, expected min({b_in},{b_out})")
    if x.shape[-4] != p.weight.shape[1]:
        raise DimensionMismatchError(f"C_in mismatch: {x.shape[-4]} vs {p.weight.shape[1]}")
    F = so3_analyze_arr(x)
    Ft = truncate_spectrum_arr(F, b_f, mats=2)
    lead = Ft.shape[: Ft.ndim - 4]
    Fb = Ft.reshape((-1,) + Ft.shape[-4:])
    C = _so3_blocks_fwd(Fb, np.conj(p.weight))
    if b_out > b_f:
        C = pad_spectrum_arr(C, b_out, mats=2)
    y = so3_synthesize_arr(C) + p.bias[:, None, None, None]
    ctx = (Fb, lead, b_in, b_out, b_f, p.weight)
    return y.reshape(lead + y.shape[1:]), ctx


def so3conv_backward(gy: np.ndarray, ctx):
    Fb, lead, b_in, b_out, b_f, W = ctx
    gyb = gy.reshape((-1,) + gy.shape[gy.ndim - 4 :])
    gbias = gyb.sum(axis=(0, 2, 3, 4))
    gC = so3_synthesize_vjp(gyb)
    gC = truncate_spectrum_arr(gC, b_f, mats=2)
    gW = _so3_blocks_gw(Fb, np.conj(gC))
    gFt = _so3_blocks_gf(W, gC)
    gF = pad_spectrum_arr(gFt, b_in, mats=2)
    gx = so3_analyze_vjp(gF)
    return gx.reshape(lead + gx.shape[1:]), gW, gbias


# ---------------------------------------------------------------------------
# pointwise and reduction layers
# ---------------------------------------------------------------------------


def relu_forward(x: np.ndarray):
    mask = x > 0
    return np.where(mask, x, 0.0), mask


def relu_backward(gy: np.ndarray, mask: np.ndarray) -> np.ndarray:
    return np.where(mask, gy, 0.0)


def invariant_pool_forward(x: np.ndarray):
    """SO(3) feature map (..., C, (2b)^3) -> per-channel integral (..., C).

    The value equals the degree-0 Fourier coefficient, hence is exactly
    rotation-invariant for band-limited inputs.
    """
    b = x.shape[-1] // 2
    z = x.mean(axis=(-3, -1)) @ sgrid.beta_weights(b)
    return z, (b, x.shape)


def invariant_pool_backward(gz: np.ndarray, ctx) -> np.ndarray:
    b, shape = ctx
    w = sgrid.beta_weights(b) / (2 * b) ** 2
    gx = gz[..., None, None, None] * w[:, None]
    return np.broadcast_to(gx, shape).copy()


def gamma_integrate_forward(x: np.ndarray):
    """SO(3) map (..., C, 2b, 2b, 2b) -> S^2 map (..., C, 2b, 2b): mean over gamma."""
    return x.mean(axis=-1), x.shape


def gamma_integrate_backward(gy: np.ndarray, shape) -> np.ndarray:
    return np.broadcast_to(gy[..., None] / shape[-1], shape).copy()


def dense_forward(x: np.ndarray, p: DenseParams):
    if x.shape[-1] != p.weight.shape[1]:
        raise DimensionMismatchError(f"dense: got {x.shape[-1]} features, weight wants {p.weight.shape[1]}")
    return x @ p.weight.T + p.bias, (x, p.weight)


def dense_backward(gy: np.ndarray, ctx):
    x, W = ctx
    xb = x.reshape(-1, x.shape[-1])
    gyb = gy.reshape(-1, gy.shape[-1])
    gW = gyb.T @ xb
    gb = gyb.sum(axis=0)
    gx = gy @ W
    return gx, gW, gb
