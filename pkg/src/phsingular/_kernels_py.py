"""Pure-Python (numpy) reference for the compiled RK4 kernel.

``rk4_affine`` integrates ``z' = A z + B u`` with

    u(stage) = F z_k + ustage[k, stage]      stage 0: t_k, 1: t_k + dt/2, 2: t_k + dt

so the state-feedback part is frozen over each step while the open-loop
part is sampled at the RK4 stage times.  With ``stagewise`` set, the
feedback is evaluated at every stage state instead, which is plain RK4 on
``z' = (A + B F) z + B ustage``.  Alongside, it integrates ``nq``
quadratic functionals ``z^T Kq[r] z + z^T Lq[r] u + lq[r] . u`` with the same
RK4 weights.
"""

from __future__ import annotations

import numpy as np


def _quad(Kq, Lq, lq, z, u):
    return np.einsum("i,rij,j->r", z, Kq, z) + np.einsum("i,rij,j->r", z, Lq, u) + lq @ u


@np.errstate(over="ignore", invalid="ignore")  # blow-up is detected and reported
def rk4_affine(A, B, F, Kq, Lq, lq, z0, ustage, ufinal, dt, nsteps, stagewise=False):
    """Returns (Z, U, ACC, n_valid); rows past ``n_valid`` are undefined."""
    A = np.ascontiguousarray(A, dtype=float)
    B = np.ascontiguousarray(B, dtype=float)
    N, m = B.shape
    nq = Kq.shape[0]
    Z = np.zeros((nsteps + 1, N))
    U = np.zeros((nsteps + 1, m))
    ACC = np.zeros((nsteps + 1, nq))
    Z[0] = z0
    h2, h6 = 0.5 * dt, dt / 6.0
    for k in range(nsteps):
        z = Z[k]
        ub = F @ z
        u0 = ub + ustage[k, 0]
        u1 = ub + ustage[k, 1]
        u2 = ub + ustage[k, 2]
        k1 = A @ z + B @ u0
        q1 = _quad(Kq, Lq, lq, z, u0)
        z2 = z + h2 * k1
        if stagewise:
            u1 = F @ z2 + ustage[k, 1]
        k2 = A @ z2 + B @ u1
        q2 = _quad(Kq, Lq, lq, z2, u1)
        z3 = z + h2 * k2
        if stagewise:
            u1 = F @ z3 + ustage[k, 1]
        k3 = A @ z3 + B @ u1
        q3 = _quad(Kq, Lq, lq, z3, u1)
        z4 = z + dt * k3
        if stagewise:
            u2 = F @ z4 + ustage[k, 2]
        k4 = A @ z4 + B @ u2
        q4 = _quad(Kq, Lq, lq, z4, u2)
        U[k] = u0
        Z[k + 1] = z + h6 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        ACC[k + 1] = ACC[k] + h6 * (q1 + 2.0 * q2 + 2.0 * q3 + q4)
        if not (np.all(np.isfinite(Z[k + 1])) and np.all(np.isfinite(ACC[k + 1]))):
            return Z, U, ACC, k + 1
    U[nsteps] = F @ Z[nsteps] + ufinal
    return Z, U, ACC, nsteps + 1
