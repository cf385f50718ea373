"""Selects the simplex kernel implementation at import time.

The compiled extension is preferred; the pure-Python twin is the
fallback.  Set LOROT_BACKEND=python to force the fallback (used by the
backend-equality tests and the benchmark).
"""

from __future__ import annotations

import os

from . import _simplex_py

if os.environ.get("LOROT_BACKEND", "").lower() == "python":
    _impl = _simplex_py
else:
    try:
        from . import _simplex as _impl  # type: ignore[no-redef]
    except ImportError:
        _impl = _simplex_py

NetworkSimplex = _impl.NetworkSimplex
SimplexStallError = _impl.SimplexStallError


def active_backend() -> str:
    return "python" if _impl is _simplex_py else "compiled"
