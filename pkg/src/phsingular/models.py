"""Ready-made nonlinear models with analytic Jacobians."""

from __future__ import annotations

from typing import Callable

import numpy as np

from .ph_core import PHSystem, StructureError, supplied_energy_cost


def skew(a) -> np.ndarray:
    """Matrix of the cross product, ``skew(a) @ b = a x b``."""
    a1, a2, a3 = a
    return np.array([[0.0, -a3, a2], [a3, 0.0, -a1], [-a2, a1, 0.0]])


def mechanical_system(M, K, B: Callable, dB: Callable, d0: float = 0.0, d1: float = 0.0):
    """Mechanical pH system in x = (p, q) with configuration-dependent forcing.

    ``p' = -D(p) M^{-1} p - K q + B(q) u``, ``q' = M^{-1} p`` with scalar
    damping ``D(p) = (d0 + d1 |M^{-1} p|^2) I``.  ``B(q)`` is k x m and
    ``dB(q)`` returns the stacked column Jacobians, shape (m, k, k).
    Returns the system and its supplied-energy cost.
    """
    M = np.atleast_2d(np.asarray(M, dtype=float))
    K = np.atleast_2d(np.asarray(K, dtype=float))
    k = M.shape[0]
    Minv = np.linalg.inv(M)
    I, Z = np.eye(k), np.zeros((k, k))
    J = np.block([[Z, -I], [I, Z]])
    Q = np.block([[Minv, Z], [Z, K]])

    def damping(x):
        v = Minv @ x[:k]
        return d0 + d1 * float(v @ v)

    def R(x):
        out = np.zeros((2 * k, 2 * k))
        out[:k, :k] = damping(x) * I
        return out

    def G(x):
        return np.vstack([np.asarray(B(x[k:]), dtype=float).reshape(k, -1), np.zeros((k, m))])

    m = np.asarray(B(np.zeros(k)), dtype=float).reshape(k, -1).shape[1]

    def drift_jac(x):
        v = Minv @ x[:k]
        Jx = (J - R(x)) @ Q
        Jx[:k, :k] -= np.outer(v, 2.0 * d1 * (Minv @ v))
        return Jx

    def input_jac(x):
        dBq = np.asarray(dB(x[k:]), dtype=float).reshape(m, k, k)
        out = np.zeros((m, 2 * k, 2 * k))
        out[:, :k, k:] = dBq
        return out

    if np.any(np.linalg.eigvalsh(0.5 * (M + M.T)) <= 0):
        raise StructureError("M must be positive definite")
    sys = PHSystem(J, R, Q, G, input_jacobian_fn=input_jac, drift_jacobian_fn=drift_jac)
    return sys, supplied_energy_cost(sys)


def rotating_forcing_example(d0: float = 0.0, d1: float = 0.0):
    """Two-degree-of-freedom instance with forcing directions that turn with q1."""
    M = np.array([[2.0, 0.3], [0.3, 1.0]])
    K = np.array([[3.0, -1.0], [-1.0, 2.0]])

    def B(q):
        c, s = np.cos(q[0]), np.sin(q[0])
        return np.array([[c, 0.5 * q[1]], [s, 1.0 + 0.1 * q[0] ** 2]])

    def dB(q):
        c, s = np.cos(q[0]), np.sin(q[0])
        d_col1 = np.array([[-s, 0.0], [c, 0.0]])
        d_col2 = np.array([[0.0, 0.5], [0.2 * q[0], 0.0]])
        return np.stack([d_col1, d_col2])

    return mechanical_system(M, K, B, dB, d0, d1)


def rigid_body(inertia=(1.0, 2.0, 3.0), damping=(0.1, 0.2, 0.3), G=None):
    """Damped rigid body in angular momenta: ``x' = x x (Q x) - R Q x + G u``, Q = inertia^{-1}."""
    Q = np.diag(1.0 / np.asarray(inertia, dtype=float))
    R = np.diag(np.asarray(damping, dtype=float))
    G = np.eye(3)[:, :2] if G is None else np.asarray(G, dtype=float)

    def drift_jac(x):
        return skew(x) @ Q - skew(Q @ x) - R @ Q

    sys = PHSystem(skew, R, Q, G, drift_jacobian_fn=drift_jac)
    return sys, supplied_energy_cost(sys)


SHIPPED = {
    "rotating_forcing": lambda: rotating_forcing_example(),
    "rotating_forcing_damped": lambda: rotating_forcing_example(0.2, 0.5),
    "rigid_body": lambda: rigid_body(),
}
