"""Backend selection for the hot numerical kernels.

Two interchangeable implementations of the inner loops live in
``_kernels_numba`` (JIT-compiled, default when numba imports) and
``_kernels_numpy`` (pure vectorised NumPy).  The environment variable
``RLFORWARD_BACKEND`` forces one of them:

    RLFORWARD_BACKEND=numpy   pure-NumPy fallback
    RLFORWARD_BACKEND=numba   JIT kernels (ImportError if numba is absent)

Both expose the same function signatures; ``benchmarks/compare_backends.py``
times them against each other and the test suite asserts they agree.
"""

from __future__ import annotations

import importlib
import os

_ENV = "RLFORWARD_BACKEND"
_VALID = ("numba", "numpy")


def available_backends() -> list[str]:
    names = []
    try:
        import numba  # noqa: F401

        names.append("numba")
    except ImportError:
        pass
    names.append("numpy")
    return names


def get_kernels(name: str | None = None):
    """Import and return the kernel module for ``name`` (or the active one)."""
    if name is None:
        name = active_name()
    if name not in _VALID:
        raise ValueError(f"unknown backend {name!r}, expected one of {_VALID}")
    return importlib.import_module(f"rlforward._kernels_{name}")


def active_name() -> str:
    env = os.environ.get(_ENV, "").strip().lower()
    if env:
        if env not in _VALID:
            raise ValueError(
                f"{_ENV}={env!r} is not a valid backend; use 'numba' or 'numpy'"
            )
        return env
    return "numba" if "numba" in available_backends() else "numpy"


kernels = get_kernels()
