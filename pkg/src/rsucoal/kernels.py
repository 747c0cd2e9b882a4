"""Backend selection for the search kernels.

The compiled Cython extension is used when it has been built; otherwise the
numpy implementation in :mod:`rsucoal._purepy` is used. Setting
``RSUCOAL_BACKEND=python`` forces the fallback.
"""
from __future__ import annotations

import os

from . import _purepy

_requested = os.environ.get("RSUCOAL_BACKEND", "auto").lower()

if _requested == "python":
    _impl = _purepy
    BACKEND = "python"
else:
    try:
        from . import _kernels as _impl  # type: ignore[attr-defined]
        BACKEND = "cython"
    except ImportError:
        if _requested == "cython":
            raise
        _impl = _purepy
        BACKEND = "python"

assignment_search = _impl.assignment_search
partition_search = _impl.partition_search

__all__ = ["BACKEND", "assignment_search", "partition_search"]
