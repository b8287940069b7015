"""Pick the p-value kernel: compiled if importable, numpy fallback otherwise.

Set ``ISOTURN_PURE_PYTHON=1`` to force the fallback.
"""
import os

from . import _fallback

try:
    if os.environ.get("ISOTURN_PURE_PYTHON"):
        raise ImportError("pure-Python kernel requested")
    from . import _kernels
except ImportError:
    _kernels = None

KERNELS = {"python": _fallback}
if _kernels is not None:
    KERNELS["compiled"] = _kernels

DEFAULT = "compiled" if _kernels is not None else "python"


def get_kernel(name=None):
    name = name or DEFAULT
    try:
        return KERNELS[name]
    except KeyError:
        raise ValueError(f"kernel {name!r} unavailable; have {sorted(KERNELS)}") from None
