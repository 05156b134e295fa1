"""Kernel backend selection.

Hot inner loops live in :mod:`damsim.kernels` and are compiled with numba's
``@njit`` by default.  Setting the environment variable ``DAMSIM_BACKEND=numpy``
before import keeps the same functions as plain Python/numpy, which is slow but
has no compilation step and no numba dependency at runtime.  Both paths execute
the identical function bodies, so results are bit-equal.
"""

import os

_choice = os.environ.get("DAMSIM_BACKEND", "numba").strip().lower()

if _choice not in ("numba", "numpy"):
    raise ValueError(f"DAMSIM_BACKEND must be 'numba' or 'numpy', got {_choice!r}")

if _choice == "numba":
    try:
        import numba
    except ImportError:
        numba = None
        _choice = "numpy"
else:
    numba = None

USE_NUMBA = _choice == "numba"


def backend() -> str:
    """Active kernel backend, 'numba' or 'numpy'."""
    return _choice


def jit_kernel(func):
    """Compile ``func`` with njit, or return it unchanged on the numpy backend."""
    if USE_NUMBA:
        return numba.njit(cache=True)(func)
    return func


def jit_parallel(func):
    """Like :func:`jit_kernel` but with numba's parallel loop support."""
    if USE_NUMBA:
        return numba.njit(cache=True, parallel=True)(func)
    return func


# numba must see its own prange object at compile time; plain range otherwise.
prange = numba.prange if USE_NUMBA else range
