"""Executable invariant suites: the package's property claims as checks.

`run(level)` executes every check and returns (name, passed, detail) rows;
the CLI prints one line per check and exits nonzero on any failure.  The
fast level keeps bandwidths small (a few seconds); full adds the large-b
round trips, the l=64 recursion stability check and brute-force correlation
oracles.
"""

from __future__ import annotations

import numpy as np
from numpy.polynomial import legendre as npleg

from . import corr, harmonics, sgrid
from . import spectral as sp
from .loss import rotinv_loss_arr
from .model import Model, ModelConfig
from .rotations import EulerZYZ, angle_distance, compose, random_rotation


def _rand_s2(rng, C, b):
    S = (rng.standard_normal((C, b, 2 * b - 1)) + 1j * rng.standard_normal((C, b, 2 * b - 1)))
    S *= sp.order_mask_s2(b)
    return sp.symmetrize_spectrum(S, mats=1)


def _rand_so3(rng, C, b):
    M = 2 * b - 1
    S = rng.standard_normal((C, b, M, M)) + 1j * rng.standard_normal((C, b, M, M))
    S *= sp.order_mask_so3(b)
    return sp.symmetrize_spectrum(S, mats=2)


def check_quadrature(b: int = 8):
    beta, w = sgrid.beta_nodes(b), sgrid.beta_weights(b)
    errs = [abs(w.sum() - 1.0)]
    for l in range(1, 2 * b):
        c = np.zeros(l + 1)
        c[l] = 1.0
        errs.append(abs(np.sum(w * npleg.legval(np.cos(beta), c))))
    worst = max(errs)
    return worst < 1e-10, f"worst Legendre quadrature error {worst:.2e}"


def check_s2_roundtrip(b: int = 8):
    rng = np.random.default_rng(1)
    S = _rand_s2(rng, 2, b)
    x = sp.s2_synthesize_arr(S)
    err = np.abs(sp.s2_analyze_arr(x) - S).max() / np.abs(S).max()
    return err < 1e-10, f"relative round-trip error {err:.2e}"


def check_so3_roundtrip(b: int = 4):
    rng = np.random.default_rng(2)
    S = _rand_so3(rng, 2, b)
    x = sp.so3_synthesize_arr(S)
    err = np.abs(sp.so3_analyze_arr(x) - S).max() / np.abs(S).max()
    return err < 1e-10, f"relative round-trip error {err:.2e}"


def check_parseval(b: int = 8):
    rng = np.random.default_rng(3)
    S = _rand_s2(rng, 1, b)
    x = sp.s2_synthesize_arr(S)
    e1 = abs(sp.spectrum_energy_s2(S).sum() - sp.signal_energy_s2(x).sum())
    S3 = _rand_so3(rng, 1, max(2, b // 2))
    x3 = sp.so3_synthesize_arr(S3)
    e2 = abs(sp.spectrum_energy_so3(S3).sum() - sp.signal_energy_so3(x3).sum())
    scale = sp.spectrum_energy_s2(S).sum() + sp.spectrum_energy_so3(S3).sum()
    return (e1 + e2) / scale < 1e-9, f"energy mismatch {e1:.2e} (S2), {e2:.2e} (SO3)"


def check_wigner_orthogonality(b: int = 16):
    d = harmonics.grid_wigner_d(b)
    c = b - 1
    worst = 0.0
    for l in (1, b // 2, b - 1):
        blk = d[l, c - l : c + l + 1, c - l : c + l + 1, :]
        for k in range(0, 2 * b, max(1, b // 2)):
            M = blk[:, :, k]
            worst = max(worst, float(np.abs(M @ M.T - np.eye(2 * l + 1)).max()))
    d0 = harmonics.wigner_d_values(b, np.array([0.0]))[..., 0]
    eye_err = 0.0
    for l in range(b):
        blk = d0[l, c - l : c + l + 1, c - l : c + l + 1]
        eye_err = max(eye_err, float(np.abs(blk - np.eye(2 * l + 1)).max()))
    ok = worst < 1e-9 and eye_err < 1e-12
    return ok, f"orthogonality {worst:.2e}, d(0)=I error {eye_err:.2e}"


def check_rotation_group_action(b: int = 8):
    rng = np.random.default_rng(4)
    S = _rand_s2(rng, 1, b)
    R1, R2 = random_rotation(rng), random_rotation(rng)
    lhs = sp.rotate_s2_spectrum_arr(sp.rotate_s2_spectrum_arr(S, R2), R1)
    rhs = sp.rotate_s2_spectrum_arr(S, compose(R1, R2))
    e1 = np.abs(lhs - rhs).max()
    back = sp.rotate_s2_spectrum_arr(sp.rotate_s2_spectrum_arr(S, R1), R1.inverse())
    e2 = np.abs(back - S).max()
    return max(e1, e2) < 1e-9, f"composition {e1:.2e}, inverse {e2:.2e}"


def check_equivariance(b: int = 6, trials: int = 5):
    rng = np.random.default_rng(5)
    worst = 0.0
    for _ in range(trials):
        f = sp.S2Signal(values=sp.s2_synthesize_arr(_rand_s2(rng, 1, b)), b=b)
        h = sp.S2Signal(values=sp.s2_synthesize_arr(_rand_s2(rng, 1, b)), b=b)
        R = random_rotation(rng)
        lhs = corr.s2_correlate(sp.rotate_s2(f, R), h, b)
        rhs = sp.rotate_so3(corr.s2_correlate(f, h, b), R)
        worst = max(worst, float(np.abs(lhs.values - rhs.values).max() / np.abs(rhs.values).max()))
    return worst < 1e-9, f"worst relative deviation {worst:.2e}"


def check_corr_oracle(b: int = 3):
    rng = np.random.default_rng(6)
    f = sp.S2Signal(values=sp.s2_synthesize_arr(_rand_s2(rng, 1, b)), b=b)
    h = sp.S2Signal(values=sp.s2_synthesize_arr(_rand_s2(rng, 1, b)), b=b)
    e1 = np.abs(corr.s2_correlate(f, h, b).values - corr.s2_correlate_bruteforce(f, h, b).values).max()
    f3 = sp.SO3Signal(values=sp.so3_synthesize_arr(_rand_so3(rng, 1, b)), b=b)
    h3 = sp.SO3Signal(values=sp.so3_synthesize_arr(_rand_so3(rng, 1, b)), b=b)
    e2 = np.abs(corr.so3_correlate(f3, h3, b).values - corr.so3_correlate_bruteforce(f3, h3, b).values).max()
    return max(e1, e2) < 1e-8, f"S2 {e1:.2e}, SO3 {e2:.2e} vs quadrature"


def check_latent_invariance(b: int = 6, trials: int = 5):
    cfg = ModelConfig(b_in=b, enc_channels=(3, 4), enc_bandwidths=(max(2, b // 2), 2),
                      latent_dim=6, dec_channels=(3, 1), dec_bandwidths=(max(2, b // 2), b),
                      use_relu=False)
    m = Model(cfg, seed=7)
    rng = np.random.default_rng(8)
    worst = 0.0
    for _ in range(trials):
        x = sp.s2_synthesize_arr(_rand_s2(rng, 1, b))[None]
        R = random_rotation(rng)
        xr = sp.s2_synthesize_arr(sp.rotate_s2_spectrum_arr(sp.s2_analyze_arr(x), R))
        dz = np.abs(m.encode_arr(x) - m.encode_arr(xr)).max()
        worst = max(worst, float(dz))
    return worst < 1e-10, f"worst latent deviation {worst:.2e}"


def check_alignment_recovery(b: int = 16, trials: int = 5):
    rng = np.random.default_rng(9)
    tol = np.pi / b
    worst = 0.0
    for _ in range(trials):
        f = sp.S2Signal(values=sp.s2_synthesize_arr(_rand_s2(rng, 1, b)), b=b)
        R = random_rotation(rng)
        while abs(np.cos(R.beta)) > 0.99:
            R = random_rotation(rng)
        Rhat, _ = corr.argmax_so3(corr.s2_correlate(sp.rotate_s2(f, R), f, b))
        err = max(angle_distance(Rhat.alpha, R.alpha), abs(Rhat.beta - R.beta),
                  angle_distance(Rhat.gamma, R.gamma))
        worst = max(worst, err)
    return worst <= tol, f"worst per-angle error {worst:.3f} (tol {tol:.3f})"


def check_loss_invariance(b: int = 8, trials: int = 5):
    rng = np.random.default_rng(10)
    worst = 0.0
    for _ in range(trials):
        f = sp.s2_synthesize_arr(_rand_s2(rng, 1, b))[None]
        g = sp.s2_synthesize_arr(_rand_s2(rng, 1, b))[None]
        base, _, _ = rotinv_loss_arr(f, g)
        R1, R2 = random_rotation(rng), random_rotation(rng)
        fr = sp.s2_synthesize_arr(sp.rotate_s2_spectrum_arr(sp.s2_analyze_arr(f), R1))
        gr = sp.s2_synthesize_arr(sp.rotate_s2_spectrum_arr(sp.s2_analyze_arr(g), R2))
        rot, _, _ = rotinv_loss_arr(fr, gr)
        scale = float(sp.signal_energy_s2(f[0]).sum())
        worst = max(worst, abs(float(base[0]) - float(rot[0])) / scale)
    return worst < 5e-2, f"worst relative loss shift {worst:.2e}"


FAST_CHECKS = [
    ("quadrature-exactness", check_quadrature),
    ("s2-roundtrip", check_s2_roundtrip),
    ("so3-roundtrip", check_so3_roundtrip),
    ("parseval", check_parseval),
    ("wigner-orthogonality", check_wigner_orthogonality),
    ("rotation-group-action", check_rotation_group_action),
    ("correlation-equivariance", check_equivariance),
    ("latent-invariance", check_latent_invariance),
    ("loss-invariance", check_loss_invariance),
]

FULL_CHECKS = FAST_CHECKS + [
    ("correlation-vs-quadrature", check_corr_oracle),
    ("s2-roundtrip-b32", lambda: check_s2_roundtrip(32)),
    ("so3-roundtrip-b12", lambda: check_so3_roundtrip(12)),
    ("wigner-orthogonality-b65", lambda: check_wigner_orthogonality(65)),
    ("alignment-recovery", check_alignment_recovery),
]


def run(level: str = "fast"):
    checks = FAST_CHECKS if level == "fast" else FULL_CHECKS
    results = []
    for name, fn in checks:
        try:
            ok, detail = fn()
        except Exception as exc:  # a crash is a failure, not an abort
            ok, detail = False, f"raised {type(exc).__name__}: {exc}"
        results.append((name, bool(ok), detail))
    return results
