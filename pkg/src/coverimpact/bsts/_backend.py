"""Kernel backend selection.

The compiled extension is used when importable. Set ``COVERIMPACT_BACKEND``
to ``python`` to force the pure-Python kernels, or to ``compiled`` to fail
loudly when the extension is missing.
"""

import os

from . import _pykernels
from ..errors import ParameterError

BACKENDS = ("compiled", "python")

_requested = os.environ.get("COVERIMPACT_BACKEND", "auto").strip().lower()

try:
    from . import _kernels as _compiled
except ImportError:  # extension not built
    _compiled = None

if _requested == "compiled" and _compiled is None:
    raise ImportError("COVERIMPACT_BACKEND=compiled but coverimpact.bsts._kernels is not built")

if _requested != "python" and _compiled is not None:
    kernels = _compiled
    BACKEND = "compiled"
else:
    kernels = _pykernels
    BACKEND = "python"


def available():
    return [name for name in BACKENDS if name == "python" or _compiled is not None]


def get_kernels(name=None):
    """Kernel module for ``name``; ``None`` means the import-time default."""
    if name is None:
        return kernels
    if name == "python":
        return _pykernels
    if name == "compiled":
        if _compiled is None:
            raise ParameterError("compiled kernels are not available; reinstall to build the extension")
        return _compiled
    raise ParameterError(f"unknown backend {name!r}; choose one of {', '.join(BACKENDS)}")
