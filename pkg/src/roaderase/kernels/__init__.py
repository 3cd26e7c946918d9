"""Hot numeric kernels: compiled core with a pure-NumPy fallback.

The Cython extension ``_native`` and the NumPy module ``_reference`` are
bit-for-bit interchangeable.  Selection happens once at import time; set
``ROADERASE_BACKEND=native`` or ``ROADERASE_BACKEND=python`` to force one
(the default prefers the compiled backend and silently falls back).
"""

import os

from . import _reference

_requested = os.environ.get("ROADERASE_BACKEND", "").strip().lower()

if _requested == "python":
    _impl = _reference
    BACKEND = "python"
elif _requested in ("", "native"):
    try:
        from . import _native as _impl  # type: ignore[no-redef]

        BACKEND = "native"
    except ImportError:
        if _requested == "native":
            raise ImportError(
                "ROADERASE_BACKEND=native but the compiled kernel extension "
                "is not built; reinstall the package or unset the variable"
            ) from None
        _impl = _reference
        BACKEND = "python"
else:
    raise ValueError(f"unknown ROADERASE_BACKEND value {_requested!r}")

sor_fill = _impl.sor_fill
accumulate_window = _impl.accumulate_window

__all__ = ["BACKEND", "sor_fill", "accumulate_window"]
