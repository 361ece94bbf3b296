"""Wall-time benchmark of the transform and correlation kernels.

Rows compare the numba and pure-numpy backends on identical inputs (the
fallback path is selected the same way `SPHAE_BACKEND=numpy` would select
it), so `sphae bench` doubles as the backend-parity speed report.
"""

from __future__ import annotations

import time

import numpy as np

from . import backend
from . import spectral as sp
from .corr import s2_corr_spectrum_arr, so3_corr_spectrum_arr

OPS = ("s2fft", "so3fft", "s2corr", "so3corr")


def _setup(op: str, b: int, rng):
    if op == "s2fft":
        x = rng.standard_normal((1, 2 * b, 2 * b))
        return lambda: sp.s2_analyze_arr(sp.s2_synthesize_arr(sp.s2_analyze_arr(x)))
    if op == "so3fft":
        x = rng.standard_normal((1, 2 * b, 2 * b, 2 * b))
        return lambda: sp.so3_synthesize_arr(sp.so3_analyze_arr(x))
    if op == "s2corr":
        F = sp.s2_analyze_arr(rng.standard_normal((1, 2 * b, 2 * b)))
        H = sp.s2_analyze_arr(rng.standard_normal((1, 2 * b, 2 * b)))
        return lambda: sp.so3_synthesize_arr(s2_corr_spectrum_arr(F, H, b))
    if op == "so3corr":
        F = sp.so3_analyze_arr(rng.standard_normal((1, 2 * b, 2 * b, 2 * b)))
        H = sp.so3_analyze_arr(rng.standard_normal((1, 2 * b, 2 * b, 2 * b)))
        return lambda: sp.so3_synthesize_arr(so3_corr_spectrum_arr(F, H, b))
    raise ValueError(f"unknown op {op!r} (expected one of {OPS})")


def run(ops, bandwidths, reps: int = 5, backends=None):
    """Returns rows (op, bandwidth, backend, reps, mean_ms, min_ms)."""
    if backends is None:
        backends = ("numba", "numpy") if backend.HAS_NUMBA else ("numpy",)
    rows = []
    for op in ops:
        for b in bandwidths:
            fn = _setup(op, int(b), np.random.default_rng(0))
            for be in backends:
                with backend.override(be):
                    fn()  # warm tables and JIT outside the timed region
                    times = []
                    for _ in range(reps):
                        t0 = time.perf_counter()
                        fn()
                        times.append(time.perf_counter() - t0)
                rows.append(
                    (op, int(b), be, reps, 1e3 * float(np.mean(times)), 1e3 * float(np.min(times)))
                )
    return rows
