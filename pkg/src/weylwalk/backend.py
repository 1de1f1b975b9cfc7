"""Kernel backend selection.

The compiled ``_kernels`` extension is used when it imports; otherwise the
numpy fallback.  Setting ``WEYLWALK_PURE_PYTHON=1`` forces the fallback.
"""
from __future__ import annotations

import os
from types import ModuleType

from . import _fallback

try:
    if os.environ.get("WEYLWALK_PURE_PYTHON"):
        raise ImportError("pure-Python backend requested")
    from . import _kernels as _compiled
except ImportError:
    _compiled = None

__all__ = ["get_backend", "available_backends", "BACKEND"]


def available_backends() -> list[str]:
    return ["cython", "python"] if _compiled is not None else ["python"]


def get_backend(name: str | None = None) -> ModuleType:
    """Return the kernel module for ``name`` (``"cython"``, ``"python"`` or default)."""
    if name is None:
        return _compiled if _compiled is not None else _fallback
    if name == "python":
        return _fallback
    if name == "cython":
        if _compiled is None:
            raise ImportError("compiled kernels are not built")
        return _compiled
    raise ValueError(f"unknown backend {name!r}")


BACKEND = get_backend().BACKEND_NAME


def dp_advance(W, *args, backend: str | None = None):
    mod = get_backend(backend)
    if mod is not _fallback and W.ndim > 3:
        mod = _fallback
    return mod.dp_advance(W, *args)


def mc_exit_discrete(*args, backend: str | None = None):
    return get_backend(backend).mc_exit_discrete(*args)
