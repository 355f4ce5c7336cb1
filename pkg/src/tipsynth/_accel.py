"""Backend switch for the per-pixel kernels.

Numba is used when importable unless ``TIPSYNTH_PURE_NUMPY`` is set to a
non-empty value other than ``0``. ``NUMBA_DISABLE_JIT`` is honoured as well.
"""
import os

_flag = os.environ.get("TIPSYNTH_PURE_NUMPY", "")
_force_numpy = _flag not in ("", "0") or os.environ.get("NUMBA_DISABLE_JIT", "0") not in ("", "0")

try:
    if _force_numpy:
        raise ImportError
    import numba

    HAVE_NUMBA = True
    njit = numba.njit(cache=True, nogil=True)
except ImportError:
    HAVE_NUMBA = False

    def njit(func):
        return func


BACKEND = "numba" if HAVE_NUMBA else "numpy"
