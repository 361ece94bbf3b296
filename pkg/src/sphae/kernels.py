"""Hot numeric kernels with numba and pure-numpy implementations.

Every function here is a plain array contraction; the dispatchers at the
bottom pick the numba or numpy path per `sphae.backend`.  Index layout used
throughout the package:

    b       bandwidth, degrees l = 0..b-1
    M       2b-1 orders, m stored at index m + (b-1)
    K       number of beta nodes (2b on a grid, 1 for point evaluation)

    Legendre table   P[l, m+c, k]          float64, zero for |m| > l
    Wigner-d table   d[l, m+c, n+c, k]     float64, zero outside |m|,|n| <= l
    S2 spectra       S[B, l, m+c]          complex128
    SO(3) spectra    S[B, l, m+c, n+c]     complex128
    alpha-Fourier    F[B, m+c, k]          complex128
    alpha/gamma-Fourier  G[B, m+c, k, n+c] complex128

with c = b-1.  The batch axis B is a single flattened leading dimension.
"""

import math

import numpy as np

from . import backend

# ---------------------------------------------------------------------------
# Wigner little-d recursion
#
# Upward three-term recurrence in l at fixed (m, n), seeded at
# l0 = max(|m|, |n|) with the closed-form boundary values.  This is the
# standard stable way to tabulate d for bandwidths well past 64; the naive
# factorial sum loses all precision around l ~ 30-40.
# ---------------------------------------------------------------------------


def _seed_coeffs(m: int, n: int):
    """Sign, sqrt-binomial prefactor and half-angle powers of d^{l0}_{mn}."""
    l0 = max(abs(m), abs(n))
    if abs(n) >= abs(m):
        if n >= 0:
            sign = 1.0
            pref = math.exp(
                0.5 * (math.lgamma(2 * l0 + 1) - math.lgamma(l0 - m + 1) - math.lgamma(l0 + m + 1))
            )
            pc, ps = l0 + m, l0 - m
        else:
            sign = -1.0 if (l0 + m) % 2 else 1.0
            pref = math.exp(
                0.5 * (math.lgamma(2 * l0 + 1) - math.lgamma(l0 + m + 1) - math.lgamma(l0 - m + 1))
            )
            pc, ps = l0 - m, l0 + m
    else:
        if m >= 0:
            sign = -1.0 if (l0 - n) % 2 else 1.0
            pref = math.exp(
                0.5 * (math.lgamma(2 * l0 + 1) - math.lgamma(l0 - n + 1) - math.lgamma(l0 + n + 1))
            )
            pc, ps = l0 + n, l0 - n
        else:
            sign = 1.0
            pref = math.exp(
                0.5 * (math.lgamma(2 * l0 + 1) - math.lgamma(l0 + n + 1) - math.lgamma(l0 - n + 1))
            )
            pc, ps = l0 - n, l0 + n
    return sign * pref, pc, ps


def _wigner_table_np(b: int, beta: np.ndarray, n_zero_only: bool = False) -> np.ndarray:
    K = beta.size
    M = 2 * b - 1
    c = b - 1
    x = np.cos(beta)
    ch = np.cos(beta / 2.0)
    sh = np.sin(beta / 2.0)
    if n_zero_only:
        out = np.zeros((b, M, 1, K))
        n_range = (0,)
    else:
        out = np.zeros((b, M, M, K))
        n_range = range(-b + 1, b)
    for m in range(-b + 1, b):
        for n in n_range:
            l0 = max(abs(m), abs(n))
            pref, pc, ps = _seed_coeffs(m, n)
            d_prev = np.zeros(K)
            d_cur = pref * ch**pc * sh**ps
            ni = 0 if n_zero_only else c + n
            out[l0, c + m, ni] = d_cur
            for l in range(l0, b - 1):
                if l == 0:
                    d_next = x * d_cur
                else:
                    num = (2 * l + 1) * (l * (l + 1) * x - m * n) * d_cur
                    num -= (l + 1) * math.sqrt((l * l - m * m) * (l * l - n * n)) * d_prev
                    den = l * math.sqrt(
                        ((l + 1) ** 2 - m * m) * ((l + 1) ** 2 - n * n)
                    )
                    d_next = num / den
                out[l + 1, c + m, ni] = d_next
                d_prev, d_cur = d_cur, d_next
    return out


# ---------------------------------------------------------------------------
# numpy contraction fallbacks
# ---------------------------------------------------------------------------


def _s2_analysis_np(P, F):
    return np.einsum("lmk,bmk->blm", P, F, optimize=True)


def _s2_synthesis_np(P, S):
    return np.einsum("lmk,blm->bmk", P, S, optimize=True)


def _so3_analysis_np(d, G):
    return np.einsum("lmnk,bmkn->blmn", d, G, optimize=True)


def _so3_synthesis_np(d, S):
    return np.einsum("lmnk,blmn->bmkn", d, S, optimize=True)


# ---------------------------------------------------------------------------
# numba versions
# ---------------------------------------------------------------------------

if backend.HAS_NUMBA:
    from numba import njit, prange

    @njit(cache=True)
    def _sqrt_binom_nb(n, k):
        return math.exp(0.5 * (math.lgamma(n + 1) - math.lgamma(k + 1) - math.lgamma(n - k + 1)))

    @njit(cache=True)
    def _wigner_table_nb(b, beta, n_zero_only):
        K = beta.size
        M = 2 * b - 1
        c = b - 1
        x = np.cos(beta)
        ch = np.cos(beta / 2.0)
        sh = np.sin(beta / 2.0)
        N = 1 if n_zero_only else M
        out = np.zeros((b, M, N, K))
        for m in range(-b + 1, b):
            n_lo = 0 if n_zero_only else -b + 1
            n_hi = 1 if n_zero_only else b
            for n in range(n_lo, n_hi):
                l0 = max(abs(m), abs(n))
                if abs(n) >= abs(m):
                    if n >= 0:
                        sign = 1.0
                        pref = _sqrt_binom_nb(2 * l0, l0 - m)
                        pc, ps = l0 + m, l0 - m
                    else:
                        sign = -1.0 if (l0 + m) % 2 else 1.0
                        pref = _sqrt_binom_nb(2 * l0, l0 + m)
                        pc, ps = l0 - m, l0 + m
                else:
                    if m >= 0:
                        sign = -1.0 if (l0 - n) % 2 else 1.0
                        pref = _sqrt_binom_nb(2 * l0, l0 - n)
                        pc, ps = l0 + n, l0 - n
                    else:
                        sign = 1.0
                        pref = _sqrt_binom_nb(2 * l0, l0 + n)
                        pc, ps = l0 - n, l0 + n
                d_prev = np.zeros(K)
                d_cur = np.empty(K)
                for k in range(K):
                    d_cur[k] = sign * pref * ch[k] ** pc * sh[k] ** ps
                ni = 0 if n_zero_only else c + n
                for k in range(K):
                    out[l0, c + m, ni, k] = d_cur[k]
                for l in range(l0, b - 1):
                    d_next = np.empty(K)
                    if l == 0:
                        for k in range(K):
                            d_next[k] = x[k] * d_cur[k]
                    else:
                        cb = (l + 1.0) * math.sqrt(
                            float(l * l - m * m) * float(l * l - n * n)
                        )
                        den = float(l) * math.sqrt(
                            float((l + 1) ** 2 - m * m) * float((l + 1) ** 2 - n * n)
                        )
                        for k in range(K):
                            d_next[k] = (
                                (2 * l + 1.0) * (l * (l + 1.0) * x[k] - m * n) * d_cur[k]
                                - cb * d_prev[k]
                            ) / den
                    for k in range(K):
                        out[l + 1, c + m, ni, k] = d_next[k]
                    d_prev = d_cur
                    d_cur = d_next
        return out

    @njit(cache=True, parallel=True)
    def _s2_analysis_nb(P, F):
        B = F.shape[0]
        b, M, K = P.shape
        c = b - 1
        out = np.zeros((B, b, M), np.complex128)
        for bi in prange(B):
            for l in range(b):
                for mi in range(c - l, c + l + 1):
                    acc = 0.0 + 0.0j
                    for k in range(K):
                        acc += P[l, mi, k] * F[bi, mi, k]
                    out[bi, l, mi] = acc
        return out

    @njit(cache=True, parallel=True)
    def _s2_synthesis_nb(P, S):
        B = S.shape[0]
        b, M, K = P.shape
        c = b - 1
        out = np.zeros((B, M, K), np.complex128)
        for bi in prange(B):
            for mi in range(M):
                for l in range(abs(mi - c), b):
                    s = S[bi, l, mi]
                    for k in range(K):
                        out[bi, mi, k] += s * P[l, mi, k]
        return out

    @njit(cache=True, parallel=True)
    def _so3_analysis_nb(d, G):
        B = G.shape[0]
        b, M, _, K = d.shape
        c = b - 1
        out = np.zeros((B, b, M, M), np.complex128)
        for bi in prange(B):
            for l in range(b):
                for mi in range(c - l, c + l + 1):
                    for ni in range(c - l, c + l + 1):
                        acc = 0.0 + 0.0j
                        for k in range(K):
                            acc += d[l, mi, ni, k] * G[bi, mi, k, ni]
                        out[bi, l, mi, ni] = acc
        return out

    @njit(cache=True, parallel=True)
    def _so3_synthesis_nb(d, S):
        B = S.shape[0]
        b, M, _, K = d.shape
        c = b - 1
        out = np.zeros((B, M, K, M), np.complex128)
        for bi in prange(B):
            for l in range(b):
                for mi in range(c - l, c + l + 1):
                    for ni in range(c - l, c + l + 1):
                        s = S[bi, l, mi, ni]
                        for k in range(K):
                            out[bi, mi, k, ni] += s * d[l, mi, ni, k]
        return out


# ---------------------------------------------------------------------------
# dispatchers
# ---------------------------------------------------------------------------


def wigner_table(b: int, beta: np.ndarray, n_zero_only: bool = False) -> np.ndarray:
    """d^l_{mn}(beta_k) as (b, 2b-1, 2b-1, K); (b, 2b-1, 1, K) if n_zero_only."""
    beta = np.ascontiguousarray(beta, dtype=np.float64)
    if backend.use_numba():
        return _wigner_table_nb(b, beta, n_zero_only)
    return _wigner_table_np(b, beta, n_zero_only)


def s2_analysis(P: np.ndarray, F: np.ndarray) -> np.ndarray:
    """out[B,l,m] = sum_k P[l,m,k] F[B,m,k]."""
    if backend.use_numba():
        return _s2_analysis_nb(P, np.ascontiguousarray(F))
    return _s2_analysis_np(P, F)


def s2_synthesis(P: np.ndarray, S: np.ndarray) -> np.ndarray:
    """out[B,m,k] = sum_l P[l,m,k] S[B,l,m]."""
    if backend.use_numba():
        return _s2_synthesis_nb(P, np.ascontiguousarray(S))
    return _s2_synthesis_np(P, S)


def so3_analysis(d: np.ndarray, G: np.ndarray) -> np.ndarray:
    """out[B,l,m,n] = sum_k d[l,m,n,k] G[B,m,k,n]."""
    if backend.use_numba():
        return _so3_analysis_nb(d, np.ascontiguousarray(G))
    return _so3_analysis_np(d, G)


def so3_synthesis(d: np.ndarray, S: np.ndarray) -> np.ndarray:
    """out[B,m,k,n] = sum_l d[l,m,n,k] S[B,l,m,n]."""
    if backend.use_numba():
        return _so3_synthesis_nb(d, np.ascontiguousarray(S))
    return _so3_synthesis_np(d, S)
