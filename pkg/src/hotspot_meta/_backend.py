"""Kernel backend selection.

The compiled ``_core`` extension is used when it imports; otherwise the
pure-Python ``_fallback`` takes over. Set ``HOTSPOT_META_PURE=1`` to force the
fallback.
"""

import os

if os.environ.get("HOTSPOT_META_PURE", "") not in ("", "0"):
    from . import _fallback as kernels

    BACKEND = "python"
else:
    try:
        from . import _core as kernels

        BACKEND = "compiled"
    except ImportError:
        from . import _fallback as kernels

        BACKEND = "python"

__all__ = ["BACKEND", "kernels"]
