"""Kernel selection: the compiled extension when importable, else the numpy twin.

Set ``LATEPOINTS_PURE_PYTHON=1`` to force the fallback.
"""
import os

from . import _fallback

if os.environ.get("LATEPOINTS_PURE_PYTHON", "") not in ("", "0"):
    kernels = _fallback
    BACKEND = "python"
else:
    try:
        from . import _kernels as kernels
        BACKEND = "compiled"
    except ImportError:
        kernels = _fallback
        BACKEND = "python"

__all__ = ["kernels", "BACKEND"]
