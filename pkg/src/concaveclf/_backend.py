"""Numba/numpy backend selection for the hot kernels.

The environment variable CONCAVECLF_BACKEND picks the implementation:

* ``auto``  (default) - use numba when importable, else plain numpy
* ``numba`` - require numba, raise if missing
* ``numpy`` - run the same kernel source uncompiled

Kernels are written once in njit-compatible style; both backends execute
identical source, so results differ only by floating-point codegen.
"""

import os

_CHOICE = os.environ.get("CONCAVECLF_BACKEND", "auto").strip().lower()
if _CHOICE not in ("auto", "numba", "numpy"):
    raise RuntimeError(
        f"CONCAVECLF_BACKEND={_CHOICE!r} not recognized (use auto, numba or numpy)"
    )

USING_NUMBA = False
if _CHOICE in ("auto", "numba"):
    try:
        from numba import njit as _njit

        USING_NUMBA = True
    except ImportError:
        if _CHOICE == "numba":
            raise


def compiled(fn):
    """Decorator: nopython-compile ``fn`` under the numba backend, no-op otherwise."""
    if USING_NUMBA:
        return _njit(cache=True)(fn)
    return fn


def backend_name() -> str:
    return "numba" if USING_NUMBA else "numpy"
