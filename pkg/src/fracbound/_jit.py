"""Backend selection for the compiled kernels.

Hot loops are written twice: a numba version and a vectorised numpy
version.  Setting ``FRACBOUND_NO_NUMBA=1`` (or running without numba
installed) selects the numpy path everywhere.
"""
from __future__ import annotations

import os

_DISABLED = os.environ.get("FRACBOUND_NO_NUMBA", "").strip().lower() in {"1", "true", "yes", "on"}

try:  # pragma: no cover - exercised through both CI configurations
    if _DISABLED:
        raise ImportError
    import numba as _numba
except ImportError:  # pragma: no cover
    _numba = None

HAS_NUMBA = _numba is not None


def njit(*args, **kwargs):
    """``numba.njit`` when available, otherwise an identity decorator."""
    if _numba is not None:
        kwargs.setdefault("cache", True)
        return _numba.njit(*args, **kwargs)
    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]
    return lambda fn: fn


_backend = "numba" if HAS_NUMBA else "numpy"


def backend() -> str:
    return _backend


def set_backend(name: str) -> None:
    """Switch between ``"numba"`` and ``"numpy"`` at runtime (used by benchmarks and tests)."""
    global _backend
    if name not in ("numba", "numpy"):
        raise ValueError(f"unknown backend {name!r}")
    if name == "numba" and not HAS_NUMBA:
        raise RuntimeError("numba is not available")
    _backend = name


def use_numba() -> bool:
    return _backend == "numba"
