"""Central finite differences used as fallback derivative providers."""

from __future__ import annotations

from typing import Callable

import numpy as np

REL_STEP = 1e-6
HESS_REL_STEP = 1e-4


class NonFiniteError(FloatingPointError):
    """A map returned NaN/inf at a probe point."""


def fd_step(z: np.ndarray, rel: float = REL_STEP) -> float:
    return rel * (1.0 + float(np.max(np.abs(z), initial=0.0)))


def _checked(fn: Callable, z: np.ndarray, where: str) -> np.ndarray:
    val = np.asarray(fn(z), dtype=float)
    if not np.all(np.isfinite(val)):
        raise NonFiniteError(f"{where} returned non-finite values at z={z!r}")
    return val


def jacobian(fn: Callable[[np.ndarray], np.ndarray], z: np.ndarray,
             step: float | None = None, where: str = "map") -> np.ndarray:
    """Central-difference Jacobian of a vector map, shape (len(fn(z)), len(z))."""
    z = np.asarray(z, dtype=float)
    h = fd_step(z) if step is None else step
    cols = []
    for k in range(z.size):
        e = np.zeros_like(z)
        e[k] = h
        cols.append((_checked(fn, z + e, where) - _checked(fn, z - e, where)) / (2.0 * h))
    if not cols:
        return np.zeros((np.asarray(fn(z)).size, 0))
    return np.stack(cols, axis=-1)


def gradient(fn: Callable[[np.ndarray], float], z: np.ndarray,
             step: float | None = None) -> np.ndarray:
    return jacobian(lambda w: np.atleast_1d(fn(w)), z, step)[0]


def hessian(fn: Callable[[np.ndarray], float], z: np.ndarray,
            grad: Callable[[np.ndarray], np.ndarray] | None = None) -> np.ndarray:
    """Hessian of a scalar map; differences the gradient when one is supplied."""
    z = np.asarray(z, dtype=float)
    if grad is not None:
        H = jacobian(grad, z)
    else:
        H = jacobian(lambda w: gradient(fn, w, fd_step(w, HESS_REL_STEP)), z,
                     fd_step(z, HESS_REL_STEP))
    return 0.5 * (H + H.T)
