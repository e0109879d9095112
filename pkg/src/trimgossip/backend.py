"""Kernel backend selection: compiled extension when available, numpy fallback otherwise.

The compiled `_kernels` extension and `_pykernels` implement the same
functions with identical semantics. The active backend is chosen at import
time (override with the TRIMGOSSIP_BACKEND environment variable or
`set_backend`), and protocols fetch it per call through `kernels()` so tests
and benchmarks can switch back and forth.
"""

from __future__ import annotations

import os

from . import _pykernels

try:
    from . import _kernels as _compiled
except ImportError:  # extension not built; fall back to numpy
    _compiled = None

HAVE_COMPILED = _compiled is not None

_BACKENDS = {"python": _pykernels}
if HAVE_COMPILED:
    _BACKENDS["compiled"] = _compiled

_active = os.environ.get("TRIMGOSSIP_BACKEND", "compiled" if HAVE_COMPILED else "python")
if _active not in _BACKENDS:
    raise ImportError(f"TRIMGOSSIP_BACKEND={_active!r} unavailable; "
                      f"choose from {sorted(_BACKENDS)}")


def kernels():
    """Module implementing the hot loops for the active backend."""
    return _BACKENDS[_active]


def backend_name() -> str:
    return _active


def set_backend(name: str) -> None:
    global _active
    if name not in _BACKENDS:
        raise ValueError(f"unknown backend {name!r}; available: {sorted(_BACKENDS)}")
    _active = name
