"""Split-search kernel selection: compiled Cython when available, NumPy otherwise.

Set EMGDECK_KERNEL=python to force the fallback (used by the benchmark and
the backend-parity tests).
"""

import os

from . import py_backend

_requested = os.environ.get("EMGDECK_KERNEL", "").strip().lower()

if _requested == "python":
    _impl = py_backend
    BACKEND = "python"
else:
    try:
        from . import _split_cy as _impl
        BACKEND = "cython"
    except ImportError:
        if _requested == "cython":
            raise ImportError(
                "EMGDECK_KERNEL=cython but the compiled kernel is missing; "
                "reinstall with `pip install -e . --no-build-isolation`"
            )
        _impl = py_backend
        BACKEND = "python"

best_split = _impl.best_split

CRITERION_GINI = py_backend.CRITERION_GINI
CRITERION_ENTROPY = py_backend.CRITERION_ENTROPY


def get_backend(name: str):
    """Return a specific backend module by name ('python' or 'cython')."""
    if name == "python":
        return py_backend
    if name == "cython":
        from . import _split_cy
        return _split_cy
    raise ValueError(f"unknown kernel backend {name!r}")
