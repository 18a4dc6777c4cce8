"""Index-one port-Hamiltonian descriptor systems and their reduction.

The block form is ``diag(I, 0) x' = (J - R) Q x + [G1; 0] u`` with
``x = (x1, x2)``.  Symmetry of ``E^T Q`` forces ``Q12 = 0`` and ``Q11``
symmetric PSD; ``Q21`` stays free.  The algebraic rows

    0 = [(-J12^T - R12^T) Q11 + (J22 - R22) Q21] x1 + (J22 - R22) Q22 x2

determine ``x2`` whenever ``(J22 - R22) Q22`` is invertible.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np

from .ph_core import (MatrixMap, PHSystem, StructureError, _as_map, max_abs, min_sym_eig,
                      psd_tolerance)

MAX_PIVOT_COND = 1e12


class IndexViolationError(ValueError):
    """The algebraic part does not determine x2 (index above one)."""

    def __init__(self, message: str, cond: float = np.inf, residual: float | None = None):
        super().__init__(message)
        self.cond = cond
        self.residual = residual


@dataclass(frozen=True, eq=False)
class DescriptorPHSystem:
    """Block descriptor system; J and R may be constant or callables of the full x."""

    J: MatrixMap
    R: MatrixMap
    Q: np.ndarray
    G1: MatrixMap
    n1: int
    n: int = field(init=False)
    m: int = field(init=False)

    def __post_init__(self):
        Q = np.atleast_2d(np.asarray(self.Q, dtype=float))
        n = Q.shape[0]
        n1 = int(self.n1)
        if Q.shape != (n, n) or not 0 <= n1 <= n:
            raise StructureError(f"Q{Q.shape} incompatible with n1={n1}")
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "n", n)
        for name in ("J", "R", "G1"):
            fn, const = _as_map(getattr(self, name))
            object.__setattr__(self, f"_{name}_fn", fn)
            object.__setattr__(self, f"_{name}_const", const)
        G1 = self.G1_at(np.zeros(n))
        if G1.shape[0] != n1:
            raise StructureError(f"G1 has {G1.shape[0]} rows, expected n1={n1}")
        object.__setattr__(self, "m", G1.shape[1])
        Q12, Q11 = Q[:n1, n1:], Q[:n1, :n1]
        tol = psd_tolerance(Q)
        if max_abs(Q12) > tol:
            raise StructureError("Q12 must vanish (E^T Q symmetric)")
        if max_abs(Q11 - Q11.T) > tol or min_sym_eig(Q11) < -tol:
            raise StructureError("Q11 must be symmetric positive semidefinite")
        for name in ("J", "R"):
            M = getattr(self, f"{name}_at")(np.zeros(n))
            if M.shape != (n, n):
                raise StructureError(f"{name} has shape {M.shape}, expected {(n, n)}")

    @classmethod
    def from_blocks(cls, J11, J12, J22, R11, R12, R22, Q11, Q21, Q22, G1) -> "DescriptorPHSystem":
        """Assemble constant blocks; J21 = -J12^T and R21 = R12^T are implied."""
        J11, J12, J22, R11, R12, R22, Q11, Q21, Q22, G1 = (
            np.atleast_2d(np.asarray(a, dtype=float)) for a in (J11, J12, J22, R11, R12, R22,
                                                                Q11, Q21, Q22, G1))
        n1, n2 = J11.shape[0], J22.shape[0]
        J = np.block([[J11, J12.reshape(n1, n2)], [-J12.reshape(n1, n2).T, J22]])
        R = np.block([[R11, R12.reshape(n1, n2)], [R12.reshape(n1, n2).T, R22]])
        Q = np.block([[Q11, np.zeros((n1, n2))], [Q21.reshape(n2, n1), Q22]])
        return cls(J, R, Q, G1.reshape(n1, -1), n1)

    @property
    def n2(self) -> int:
        return self.n - self.n1

    @property
    def is_linear(self) -> bool:
        return all(getattr(self, f"_{k}_const") is not None for k in ("J", "R", "G1"))

    def J_at(self, x) -> np.ndarray:
        return np.asarray(self._J_fn(x), dtype=float)

    def R_at(self, x) -> np.ndarray:
        return np.asarray(self._R_fn(x), dtype=float)

    def G1_at(self, x) -> np.ndarray:
        G = np.asarray(self._G1_fn(x), dtype=float)
        return G.reshape(self.n1, -1)

    @property
    def E(self) -> np.ndarray:
        E = np.zeros((self.n, self.n))
        E[:self.n1, :self.n1] = np.eye(self.n1)
        return E

    def as_phsystem(self) -> PHSystem:
        """The full system with singular E (energy and structure checks only)."""
        G = lambda x: np.vstack([self.G1_at(x), np.zeros((self.n2, self.m))])
        G = np.vstack([self._G1_const, np.zeros((self.n2, self.m))]) if self._G1_const is not None else G
        return PHSystem(self._J_const if self._J_const is not None else self._J_fn,
                        self._R_const if self._R_const is not None else self._R_fn,
                        self.Q, G, self.E)

    def _blocks(self, x):
        n1 = self.n1
        L = self.J_at(x) - self.R_at(x)
        return L[:n1, :n1], L[:n1, n1:], L[n1:, :n1], L[n1:, n1:]

    def algebraic_parts(self, x) -> tuple[np.ndarray, np.ndarray]:
        """(C, P) with algebraic rows ``C x1 + P x2 = 0``; P is the index-one pivot."""
        n1 = self.n1
        _, _, L21, L22 = self._blocks(x)
        Q = self.Q
        C = L21 @ Q[:n1, :n1] + L22 @ Q[n1:, :n1]
        P = L22 @ Q[n1:, n1:]
        return C, P

    def algebraic_residual(self, x1, x2) -> np.ndarray:
        x = np.concatenate([x1, x2])
        C, P = self.algebraic_parts(x)
        return C @ x1 + P @ x2

    def differential_rhs(self, x1, x2, u) -> np.ndarray:
        x = np.concatenate([x1, x2])
        e = self.Q @ x
        L = self.J_at(x) - self.R_at(x)
        return L[:self.n1] @ e + self.G1_at(x) @ np.asarray(u, dtype=float)


@dataclass(frozen=True, eq=False)
class ReducedSystem:
    """Ordinary system in x1 and the recovery x2 = recovery @ x1.

    ``certified`` is true when Q11 is definite, so the reduced coefficient
    splits into skew and PSD parts; otherwise the split is not certified and
    ``coefficient`` holds the assembled ``(J~ - R~) Q11``.
    """

    system: PHSystem
    recovery: np.ndarray
    coefficient: np.ndarray
    pivot_cond: float
    certified: bool

    def recover(self, x1) -> np.ndarray:
        return np.asarray(x1, dtype=float) @ self.recovery.T


def _pivot_cond(P: np.ndarray) -> float:
    if P.size == 0:
        return 1.0
    with np.errstate(divide="ignore"):
        return float(np.linalg.cond(P))


def reduce_linear(dsys: DescriptorPHSystem, max_cond: float = MAX_PIVOT_COND) -> ReducedSystem:
    if not dsys.is_linear:
        raise StructureError("reduce_linear needs constant blocks; use reduce_nonlinear")
    n1, n2 = dsys.n1, dsys.n2
    x0 = np.zeros(dsys.n)
    C, P = dsys.algebraic_parts(x0)
    cond = _pivot_cond(P)
    if not np.isfinite(cond) or cond > max_cond:
        raise IndexViolationError(
            f"(J22 - R22) Q22 is singular or ill-conditioned (condition number {cond:.3e})", cond)
    X = -np.linalg.solve(P, C) if n2 else np.zeros((0, n1))
    L11, L12, _, _ = dsys._blocks(x0)
    Q = dsys.Q
    Q11 = Q[:n1, :n1]
    Ared = L11 @ Q11 + L12 @ (Q[n1:, :n1] + Q[n1:, n1:] @ X) if n2 else L11 @ Q11
    G1 = dsys.G1_at(x0)
    certified = n1 > 0 and min_sym_eig(Q11) > psd_tolerance(Q11)
    if certified:
        L = Ared @ np.linalg.inv(Q11)
        J = 0.5 * (L - L.T)
        R = -0.5 * (L + L.T)
        sys = PHSystem(J, R, Q11, G1)
    else:
        # keep A exact: J carries the whole coefficient with Q = I
        sys = PHSystem(np.zeros((n1, n1)), -Ared, np.eye(n1), G1) if n1 else PHSystem(
            np.zeros((0, 0)), np.zeros((0, 0)), np.zeros((0, 0)), G1)
    return ReducedSystem(sys, X, Ared, cond, certified)


class LocalReduction(NamedTuple):
    x2: np.ndarray
    rhs: np.ndarray          # x1' at u = 0
    input_matrix: np.ndarray  # G1 at (x1, x2)
    residual: float
    iterations: int


def solve_algebraic(dsys: DescriptorPHSystem, x1, x2_guess=None, tol: float = 1e-12,
                    max_iter: int = 50) -> tuple[np.ndarray, float, int]:
    """Newton iteration on the algebraic rows for fixed x1."""
    x1 = np.asarray(x1, dtype=float)
    x2 = np.zeros(dsys.n2) if x2_guess is None else np.asarray(x2_guess, dtype=float).copy()
    if dsys.n2 == 0:
        return x2, 0.0, 0

    def F(w):
        return dsys.algebraic_residual(x1, w)

    r = F(x2)
    scale = 1.0 + float(np.max(np.abs(x1), initial=0.0))
    for it in range(1, max_iter + 1):
        if dsys.is_linear:
            Jac = dsys.algebraic_parts(np.concatenate([x1, x2]))[1]
        else:
            from ._numdiff import jacobian
            Jac = jacobian(F, x2)
        cond = _pivot_cond(Jac)
        if not np.isfinite(cond) or cond > MAX_PIVOT_COND:
            raise IndexViolationError(f"algebraic Jacobian singular (condition number {cond:.3e})",
                                      cond, float(np.linalg.norm(r)))
        x2 = x2 - np.linalg.solve(Jac, r)
        r = F(x2)
        if float(np.max(np.abs(r))) <= tol * scale:
            return x2, float(np.max(np.abs(r))), it
    raise IndexViolationError(f"Newton did not converge in {max_iter} iterations",
                              residual=float(np.max(np.abs(r))))


def reduce_nonlinear(dsys: DescriptorPHSystem, x1, x2_guess=None, tol: float = 1e-12,
                     max_iter: int = 50) -> LocalReduction:
    x1 = np.asarray(x1, dtype=float)
    x2, res, it = solve_algebraic(dsys, x1, x2_guess, tol, max_iter)
    x = np.concatenate([x1, x2])
    return LocalReduction(x2, dsys.differential_rhs(x1, x2, np.zeros(dsys.m)), dsys.G1_at(x), res, it)


# ---------------------------------------------------------------- mechanics

def from_mechanical(M, D, K, B, mass_tol: float = 1e-12):
    """pH model of ``M q'' + D q' + K q = B u``.

    Invertible M gives the ordinary system in x = (M q', q).  Singular M
    gives a block descriptor system: with ``M = V diag(mu) V^T`` the
    massive directions carry momenta ``mu_k w_k`` and the massless
    velocities ``w_0 = V_0^T q'`` become algebraic variables.  State order
    is (momenta, q, w_0).
    """
    M, D, K = (np.atleast_2d(np.asarray(a, dtype=float)) for a in (M, D, K))
    B = np.asarray(B, dtype=float)
    k = M.shape[0]
    B = B.reshape(k, -1)
    for name, Mat in (("M", M), ("D", D), ("K", K)):
        if Mat.shape != (k, k):
            raise StructureError(f"{name} has shape {Mat.shape}, expected {(k, k)}")
        if max_abs(Mat - Mat.T) > psd_tolerance(Mat):
            raise StructureError(f"{name} must be symmetric")
    if min_sym_eig(K) <= 0:
        raise StructureError("K must be positive definite")
    if min_sym_eig(D) < -psd_tolerance(D):
        raise StructureError("D must be positive semidefinite")
    if min_sym_eig(M) < -psd_tolerance(M):
        raise StructureError("M must be positive semidefinite")
    if np.linalg.matrix_rank(B) < B.shape[1]:
        raise StructureError("B must have full column rank")
    m = B.shape[1]
    I, Z = np.eye(k), np.zeros((k, k))
    mu, V = np.linalg.eigh(M)
    massive = mu > mass_tol * max(1.0, float(np.max(np.abs(mu))))
    if np.all(massive):
        J = np.block([[Z, -I], [I, Z]])
        R = np.block([[D, Z], [Z, Z]])
        Q = np.block([[np.linalg.inv(M), Z], [Z, K]])
        G = np.vstack([B, np.zeros((k, m))])
        return PHSystem(J, R, Q, G)
    Vp, V0 = V[:, massive], V[:, ~massive]
    kp, k0 = Vp.shape[1], V0.shape[1]
    if max_abs(V0.T @ B) > 1e-12 * (1.0 + max_abs(B)):
        raise StructureError("forcing acts on massless directions (G2 != 0), not supported")
    Dh = V.T @ D @ V
    ip, i0 = np.where(massive)[0], np.where(~massive)[0]
    Dpp, Dp0, D00 = Dh[np.ix_(ip, ip)], Dh[np.ix_(ip, i0)], Dh[np.ix_(i0, i0)]
    # effort ordering (w_+, K q, w_0)
    J = np.zeros((kp + k + k0,) * 2)
    R = np.zeros_like(J)
    a, b = slice(0, kp), slice(kp, kp + k)
    c = slice(kp + k, kp + k + k0)
    J[a, b], J[b, a] = -Vp.T, Vp
    J[b, c], J[c, b] = V0, -V0.T
    R[a, a], R[a, c], R[c, a], R[c, c] = Dpp, Dp0, Dp0.T, D00
    Q = np.zeros_like(J)
    Q[a, a] = np.diag(1.0 / mu[massive])
    Q[b, b] = K
    Q[c, c] = np.eye(k0)
    G1 = np.vstack([Vp.T @ B, np.zeros((k, m))])
    return DescriptorPHSystem(J, R, Q, G1, kp + k)


def mechanical_descriptor_residual(M, D, K, B, p_tilde, q, dp_tilde, dq, u) -> np.ndarray:
    """Residual of ``diag(M, I) (p~', q')' = [[-D, -I], [I, 0]] diag(I, K) (p~, q) + [B; 0] u``."""
    M, D, K = (np.atleast_2d(np.asarray(a, dtype=float)) for a in (M, D, K))
    B = np.asarray(B, dtype=float).reshape(M.shape[0], -1)
    top = M @ dp_tilde - (-D @ p_tilde - K @ q + B @ u)
    bot = dq - p_tilde
    return np.concatenate([top, bot])
