"""Kernel backend selection.

The compiled extension (afdcd._core) and the numpy fallback
(afdcd._kernels_py) implement the same kernel contract. Selection happens
once at import, steered by the AFDCD_BACKEND environment variable:

  auto      use the compiled core when available, else the fallback (default)
  compiled  require the compiled core, fail otherwise
  python    force the numpy fallback
"""
from __future__ import annotations

import os
from types import ModuleType

from . import _kernels_py

try:
    from . import _core as _compiled
except ImportError:
    _compiled = None


def _select() -> tuple[ModuleType, str]:
    choice = os.environ.get("AFDCD_BACKEND", "auto").strip().lower()
    if choice not in ("auto", "compiled", "python"):
        raise RuntimeError(
            f"AFDCD_BACKEND must be auto, compiled, or python, got {choice!r}"
        )
    if choice == "python":
        return _kernels_py, "python"
    if _compiled is not None:
        return _compiled, "compiled"
    if choice == "compiled":
        raise RuntimeError(
            "AFDCD_BACKEND=compiled but the afdcd._core extension is not built"
        )
    return _kernels_py, "python"


_active, _name = _select()


def kernels() -> ModuleType:
    """The active kernel module."""
    return _active


def active_backend() -> str:
    """Name of the active backend: 'compiled' or 'python'."""
    return _name


def have_compiled() -> bool:
    """Whether the compiled core imported successfully."""
    return _compiled is not None
