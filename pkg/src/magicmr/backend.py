"""Kernel backend selection.

The hot per-SNP kernels exist twice: a numba @njit build and a pure-numpy
build with identical contracts. The numba build is used when available
unless the environment variable MAGICMR_NO_NUMBA is set to a non-empty
value other than "0". `benchmarks/bench_kernels.py` compares the two.
"""

import os

from . import _kernels_numpy

ENV_FLAG = "MAGICMR_NO_NUMBA"


def numba_disabled_by_env():
    value = os.environ.get(ENV_FLAG, "")
    return value not in ("", "0")


def _load():
    if numba_disabled_by_env():
        return _kernels_numpy, "numpy"
    try:
        from . import _kernels_numba
    except ImportError:
        return _kernels_numpy, "numpy"
    return _kernels_numba, "numba"


kernels, BACKEND = _load()


def active_backend():
    """Name of the kernel backend in use: "numba" or "numpy"."""
    return BACKEND
