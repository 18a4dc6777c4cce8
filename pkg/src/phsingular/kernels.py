"""Backend selection for the RK4 kernel.

The compiled extension is used when it imports; setting
``PHSINGULAR_PURE_PYTHON=1`` forces the numpy fallback.
"""

from __future__ import annotations

import os

from . import _kernels_py

_compiled = None
if not os.environ.get("PHSINGULAR_PURE_PYTHON"):
    try:
        from . import _kernels as _compiled
    except ImportError:  # extension not built
        _compiled = None

BACKEND = "compiled" if _compiled is not None else "python"


def available_backends() -> list[str]:
    return ["python"] + (["compiled"] if _compiled is not None else [])


def get_rk4_affine(backend: str | None = None):
    backend = backend or BACKEND
    if backend == "python":
        return _kernels_py.rk4_affine
    if backend == "compiled":
        if _compiled is None:
            raise RuntimeError("compiled kernel not available; build the extension")
        return _compiled.rk4_affine
    raise ValueError(f"unknown backend {backend!r}")


def rk4_affine(*args, backend: str | None = None):
    return get_rk4_affine(backend)(*args)
