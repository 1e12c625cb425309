"""Select the compiled kernel extension, falling back to pure Python.

Set ``SHUTTLEKIT_PURE_PYTHON=1`` to force the fallback (used by the
benchmark and by the backend-parity tests).
"""

import os

from . import _kernels_py

try:
    from . import _kernels as _compiled
except ImportError:  # extension not built
    _compiled = None

if _compiled is not None and os.environ.get("SHUTTLEKIT_PURE_PYTHON", "") not in ("1", "true"):
    kernels = _compiled
    BACKEND = "compiled"
else:
    kernels = _kernels_py
    BACKEND = "python"


def get_kernels(name=None):
    """Return a kernel module by name (``"compiled"``/``"python"``) or the active one."""
    if name is None:
        return kernels
    if name == "python":
        return _kernels_py
    if name == "compiled":
        if _compiled is None:
            raise ImportError("compiled kernels are not built")
        return _compiled
    raise ValueError(f"unknown backend {name!r}")


def compiled_available():
    return _compiled is not None
