"""Kernel backend selection.

The compiled extension (``metaexp._kernels_c``) and the pure-Python module
(``metaexp._kernels_py``) expose the same functions with bit-identical
results; the compiled one is just faster. Selection order:

* ``METAEXP_BACKEND=c``    require the compiled kernels (ImportError if absent)
* ``METAEXP_BACKEND=py``   force the pure-Python kernels
* unset or ``auto``        compiled if importable, else pure Python
"""

import os

from . import _kernels_py

_requested = os.environ.get("METAEXP_BACKEND", "auto").lower()

if _requested not in ("auto", "c", "py"):
    raise ImportError(f"METAEXP_BACKEND must be 'auto', 'c' or 'py', got {_requested!r}")

if _requested == "py":
    kernels = _kernels_py
    _name = "python"
elif _requested == "c":
    from . import _kernels_c

    kernels = _kernels_c
    _name = "c"
else:
    try:
        from . import _kernels_c

        kernels = _kernels_c
        _name = "c"
    except ImportError:
        kernels = _kernels_py
        _name = "python"


def backend_name() -> str:
    """Name of the active kernel backend: ``"c"`` or ``"python"``."""
    return _name
