"""Kernel backend selection.

The transform inner loops exist twice: a numba ``@njit`` version and a pure
numpy einsum version.  ``SPHAE_BACKEND`` picks one at import time:

    SPHAE_BACKEND=auto    use numba when importable (default)
    SPHAE_BACKEND=numba   require numba, fail loudly if missing
    SPHAE_BACKEND=numpy   force the pure-numpy fallback

`use_numba()` is re-read on every kernel call, so tests and the benchmark
can flip the active backend at runtime with `override()`.
"""

import contextlib
import os

_VALID = ("auto", "numba", "numpy")

_env = os.environ.get("SPHAE_BACKEND", "auto").strip().lower()
if _env not in _VALID:
    raise ValueError(f"SPHAE_BACKEND must be one of {_VALID}, got {_env!r}")

if _env == "numpy":
    HAS_NUMBA = False
else:
    try:
        import numba  # noqa: F401

        HAS_NUMBA = True
    except ImportError:
        if _env == "numba":
            raise
        HAS_NUMBA = False

_active = "numba" if HAS_NUMBA else "numpy"


def use_numba() -> bool:
    return _active == "numba"


def active_backend() -> str:
    return _active


def set_backend(name: str) -> None:
    global _active
    if name not in ("numba", "numpy"):
        raise ValueError(f"backend must be 'numba' or 'numpy', got {name!r}")
    if name == "numba" and not HAS_NUMBA:
        raise RuntimeError("numba backend requested but numba is not importable")
    _active = name


@contextlib.contextmanager
def override(name: str):
    """Temporarily switch the active backend (used by `sphae bench`)."""
    prev = _active
    set_backend(name)
    try:
        yield
    finally:
        set_backend(prev)


def set_num_threads(n: int) -> None:
    """Cap numba worker threads; no-op on the numpy backend."""
    if HAS_NUMBA and n >= 1:
        import numba

        numba.set_num_threads(min(n, numba.config.NUMBA_NUM_THREADS))
