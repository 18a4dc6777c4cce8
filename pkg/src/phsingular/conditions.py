"""Goh and generalized Legendre-Clebsch conditions.

Three routes compute the Legendre-Clebsch pair ``(W, d)``:

* ``lc_matrix_brackets``: nested brackets of the augmented fields (general).
* ``lc_matrix_nonlinear``: the port-Hamiltonian form written with brackets
  of ``g_0, g_i`` in state space plus explicit cost-derivative terms.
* ``lc_matrix_linear``: closed form for linear systems with quadratic cost.

``W[i, j] = p^T [f_j, [f_0, f_i]]`` and ``d[i] = p^T [f_0, [f_0, f_i]]``, with
the cost multiplier fixed to 1 throughout.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .lie import AugmentedSystem, VectorField, augment, bracket_field, lie_bracket, nested_bracket
from .ph_core import (CostSpec, LinearQuadraticCost, PHSystem, StructureError, affine_cost,
                      max_abs)

NEGATIVE_DEFINITE = "negative_definite"
NEGATIVE_SEMIDEFINITE = "negative_semidefinite"
INDEFINITE = "indefinite"


@dataclass(frozen=True)
class AdjointState:
    """Costate ``p``; the cost-coordinate multiplier is always 1 (normal case)."""

    p: np.ndarray
    p_cost: float = 1.0

    def __post_init__(self):
        if self.p_cost != 1.0:
            raise ValueError("the cost multiplier is fixed to 1")
        object.__setattr__(self, "p", np.asarray(self.p, dtype=float))

    @property
    def extended(self) -> np.ndarray:
        return np.append(self.p, self.p_cost)


def _p(p) -> np.ndarray:
    return p.p if isinstance(p, AdjointState) else np.asarray(p, dtype=float)


def _ext(p) -> np.ndarray:
    return np.append(_p(p), 1.0)


def default_goh_tol(x, p) -> float:
    return 1e-8 * (1.0 + float(np.linalg.norm(_p(p))) + float(np.linalg.norm(x)))


def _state_fields(sys: PHSystem) -> tuple[VectorField, list[VectorField]]:
    g0 = VectorField(sys.drift, sys.n, sys.drift_jacobian, "g0")
    gs = [VectorField(lambda x, i=i: sys.G_at(x)[:, i], sys.n,
                      lambda x, i=i: sys.input_jacobian(x)[i], f"g{i + 1}")
          for i in range(sys.m)]
    return g0, gs


# ---------------------------------------------------------------------- Goh

@dataclass(frozen=True)
class GohReport:
    bracket_residual: np.ndarray   # p^T [g_i, g_j]
    cost_residual: np.ndarray      # l_j' g_i - l_i' g_j
    tolerance: float

    @property
    def combined(self) -> np.ndarray:
        """(p, 1)^T [f_i, f_j]."""
        return self.bracket_residual + self.cost_residual

    @property
    def max_violation(self) -> float:
        return max(max_abs(self.bracket_residual), max_abs(self.cost_residual))

    @property
    def passed(self) -> bool:
        return self.max_violation <= self.tolerance


def goh_nonlinear(sys: PHSystem, cost: CostSpec, x, p, tol: float | None = None) -> GohReport:
    x = np.asarray(x, dtype=float)
    pv = _p(p)
    c = affine_cost(sys, cost)
    G = sys.G_at(x)
    dG = sys.input_jacobian(x)
    m = sys.m
    B = np.zeros((m, m))
    for i in range(m):
        for j in range(i + 1, m):
            br = dG[j] @ G[:, i] - dG[i] @ G[:, j]
            B[i, j] = pv @ br
            B[j, i] = -B[i, j]
    LG = c.jac(x) @ G          # LG[j, i] = l_j' g_i
    C = LG - LG.T
    return GohReport(B, C, default_goh_tol(x, pv) if tol is None else tol)


@dataclass(frozen=True)
class LinearGohReport:
    matrix: np.ndarray     # N^T G^T Q G
    asymmetry: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.asymmetry <= self.tolerance


def goh_linear(sys: PHSystem, cost: LinearQuadraticCost, tol: float | None = None) -> LinearGohReport:
    """Symmetry of N^T G^T Q G, the state-independent Goh condition."""
    G = sys.G_at(None)
    M0 = cost.N.T @ G.T @ sys.Q @ G
    tol = 1e-8 * (1.0 + max_abs(M0)) if tol is None else tol
    return LinearGohReport(M0, max_abs(M0 - M0.T), tol)


# ---------------------------------------------------------- Legendre-Clebsch

def lc_matrix_brackets(aug: AugmentedSystem, x, p) -> tuple[np.ndarray, np.ndarray]:
    z = aug.lift(x)
    pe = _ext(p)
    m = aug.m
    W = np.empty((m, m))
    d = np.empty(m)
    for i in range(1, m + 1):
        d[i - 1] = pe @ nested_bracket(aug, 0, i, z)
        for j in range(1, m + 1):
            W[i - 1, j - 1] = pe @ nested_bracket(aug, j, i, z)
    return W, d


def lc_matrix_nonlinear(sys: PHSystem, cost: CostSpec, x, p) -> tuple[np.ndarray, np.ndarray]:
    """W and d from state-space brackets plus the explicit cost terms."""
    x = np.asarray(x, dtype=float)
    pv = _p(p)
    c = affine_cost(sys, cost)
    g0f, gfs = _state_fields(sys)
    g0 = g0f(x)
    Dg0 = g0f.jac(x)
    G = sys.G_at(x)
    dG = sys.input_jacobian(x)
    l0p, l0pp = c.grad0(x), c.hess0(x)
    lp, lpp = c.jac(x), c.hess(x)
    m = sys.m
    dirs = [g0] + [G[:, j] for j in range(m)]
    dir_fields = [g0f] + gfs
    W = np.empty((m, m))
    d = np.empty(m)
    for i in range(m):
        gi = G[:, i]
        b0i = dG[i] @ g0 - Dg0 @ gi              # [g0, g_i]
        inner = bracket_field(g0f, gfs[i])
        for k, (v, vf) in enumerate(zip(dirs, dir_fields)):
            nested = lie_bracket(vf, inner, x)
            # for d the last cost term uses l_0' in place of l_j'
            lk = l0p if k == 0 else lp[k - 1]
            val = (pv @ nested + g0 @ lpp[i] @ v + lp[i] @ Dg0 @ v
                   - gi @ l0pp @ v - l0p @ dG[i] @ v - lk @ b0i)
            if k == 0:
                d[i] = val
            else:
                W[i, k - 1] = val
    return W, d


@dataclass(frozen=True)
class LinearLC:
    """Closed-form W and the affine map d(x, p) = Dp p + Dx x."""

    W: np.ndarray
    Dp: np.ndarray
    Dx: np.ndarray
    supply_form: bool

    def d(self, x, p) -> np.ndarray:
        return self.Dp @ _p(p) + self.Dx @ np.asarray(x, dtype=float)


def _linear_parts(sys: PHSystem, cost: LinearQuadraticCost):
    if not sys.is_linear:
        raise StructureError("closed-form conditions need constant J, R, G")
    if cost.m != sys.m:
        raise StructureError(f"cost has m={cost.m}, system has m={sys.m}")
    G, Q, A = sys.G_at(None), sys.Q, sys.A
    QG = Q.T @ G
    K = QG @ cost.Y @ QG.T
    return G, Q, A, QG, K


def lc_matrix_linear(sys: PHSystem, cost: LinearQuadraticCost) -> LinearLC:
    """Constant W and affine d for linear pH dynamics and quadratic cost.

    Supplied-energy costs (Y = 0, N = I) use ``W = -2 G^T Q R Q G`` directly.
    Otherwise ``W = S + S^T - 2 G^T K G`` with ``S = N^T G^T Q A G``; this
    form holds for every N, whereas the J-free variant in
    ``lc_matrix_dissipative_form`` needs ``N^T G^T Q J Q G`` symmetric.
    """
    G, Q, A, QG, K = _linear_parts(sys, cost)
    if cost.is_supplied_energy:
        R = sys.R_at(None)
        W = -2.0 * (G.T @ Q @ R @ Q @ G)
        supply = True
    else:
        S = cost.N.T @ QG.T @ A @ G
        W = S + S.T - 2.0 * (G.T @ K @ G)
        supply = False
    A2 = A @ A
    Dp = (A2 @ G).T
    Dx = cost.N.T @ QG.T @ A2 - 2.0 * (G.T @ K @ A) + 2.0 * (K @ A @ G).T
    return LinearLC(W, Dp, Dx, supply)


def lc_matrix_dissipative_form(sys: PHSystem, cost: LinearQuadraticCost) -> np.ndarray:
    """``-N^T G^T Q R Q G - 2 G^T Q G Y G^T Q G - (N^T G^T Q R Q G)^T``.

    Agrees with ``lc_matrix_linear`` whenever ``N^T G^T Q J Q G`` is
    symmetric, in particular for N = 0 and N = c I.
    """
    G, Q, A, QG, K = _linear_parts(sys, cost)
    R = sys.R_at(None)
    S = cost.N.T @ G.T @ Q @ R @ Q @ G
    return -S - 2.0 * (G.T @ K @ G) - S.T


def d_vector_with_reference(sys: PHSystem, cost: LinearQuadraticCost, x, p, x_ref) -> np.ndarray:
    """d for the cost shifted towards a reference state; W is unchanged."""
    G, Q, A, QG, K = _linear_parts(sys, cost)
    x = np.asarray(x, dtype=float)
    x_ref = np.asarray(x_ref, dtype=float)
    if x_ref.shape != (sys.n,):
        raise StructureError(f"x_ref has shape {x_ref.shape}, expected ({sys.n},)")
    A2 = A @ A
    return ((A2 @ G).T @ _p(p) + cost.N.T @ QG.T @ A2 @ x
            - 2.0 * G.T @ K @ A @ x + 2.0 * (K @ A @ G).T @ (x - x_ref))


# ------------------------------------------------------------- certificates

@dataclass(frozen=True)
class LCCertificate:
    eigenvalues: np.ndarray
    tolerance: float
    definiteness: str

    @property
    def max_eigenvalue(self) -> float:
        return float(self.eigenvalues[-1]) if self.eigenvalues.size else 0.0

    @property
    def passed(self) -> bool:
        return self.max_eigenvalue <= self.tolerance


def lc_check(W, tol: float | None = None) -> LCCertificate:
    """Classify the symmetric part of W.

    Eigenvalues below ``-1e-10 ||W||_inf`` count as strictly negative; the
    check passes when the largest eigenvalue is at most ``tol`` (default
    ``1e-10 ||W||_inf``).  Anything with a larger eigenvalue is reported as
    ``indefinite``.
    """
    W = np.atleast_2d(np.asarray(W, dtype=float))
    if W.shape[0] != W.shape[1]:
        raise StructureError(f"W must be square, got {W.shape}")
    scale = float(np.linalg.norm(W, np.inf)) if W.size else 0.0
    tol = 1e-10 * scale if tol is None else tol
    eigs = np.linalg.eigvalsh(0.5 * (W + W.T)) if W.size else np.zeros(0)
    strict = -1e-10 * scale
    if eigs.size and eigs[-1] > tol:
        cls = INDEFINITE
    elif eigs.size and eigs[-1] < strict:
        cls = NEGATIVE_DEFINITE
    else:
        cls = NEGATIVE_SEMIDEFINITE
    return LCCertificate(eigs, tol, cls)


@dataclass(frozen=True)
class ConditionReport:
    goh: GohReport
    W: np.ndarray
    d: np.ndarray
    certificate: LCCertificate

    @property
    def goh_residual(self) -> np.ndarray:
        return self.goh.combined

    @property
    def goh_pass(self) -> bool:
        return self.goh.passed

    @property
    def W_eigs(self) -> np.ndarray:
        return self.certificate.eigenvalues

    @property
    def lc_pass(self) -> bool:
        return self.certificate.passed

    def to_lines(self) -> list[str]:
        fmt = lambda v: " ".join(f"{float(a):.12e}" for a in np.ravel(v))
        lines = [
            f"goh_pass: {str(self.goh_pass).lower()}",
            f"goh_max_residual: {self.goh.max_violation:.6e}",
            f"goh_tolerance: {self.goh.tolerance:.6e}",
            f"lc_pass: {str(self.lc_pass).lower()}",
            f"W_definiteness: {self.certificate.definiteness}",
            f"W_max_eigenvalue: {self.certificate.max_eigenvalue:.12e}",
            f"W_eigenvalues: {fmt(self.W_eigs)}",
            f"d: {fmt(self.d)}",
            "W: [",
        ]
        lines += ["  " + fmt(row) for row in self.W]
        lines.append("]")
        return lines


def lc_pair(sys: PHSystem, cost: CostSpec, x, p) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(cost, LinearQuadraticCost) and sys.is_linear:
        lc = lc_matrix_linear(sys, cost)
        return lc.W, lc.d(x, p)
    return lc_matrix_nonlinear(sys, cost, x, p)


def evaluate_conditions(sys: PHSystem, cost: CostSpec, x, p,
                        tol_goh: float | None = None, tol_lc: float | None = None) -> ConditionReport:
    goh = goh_nonlinear(sys, cost, x, p, tol_goh)
    W, d = lc_pair(sys, cost, x, p)
    return ConditionReport(goh, W, d, lc_check(W, tol_lc))


__all__ = [
    "AdjointState", "GohReport", "LinearGohReport", "LinearLC", "LCCertificate", "ConditionReport",
    "goh_nonlinear", "goh_linear", "lc_matrix_brackets", "lc_matrix_nonlinear", "lc_matrix_linear",
    "lc_matrix_dissipative_form", "d_vector_with_reference", "lc_check", "lc_pair",
    "evaluate_conditions", "augment", "NEGATIVE_DEFINITE", "NEGATIVE_SEMIDEFINITE", "INDEFINITE",
]
