"""Singular feedback synthesis, switching functions and bang/singular partitions.

Sign convention: costs are minimized, so a component with positive
switching function sits at its lower bound and one with negative switching
function at its upper bound.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .conditions import INDEFINITE, NEGATIVE_DEFINITE, _ext, _p, lc_check, lc_pair
from .lie import AugmentedSystem, augment, first_bracket
from .ph_core import CostSpec, LinearQuadraticCost, PHSystem, StructureError

DEFINITE_INVERSE = "definite_inverse"
LEAST_SQUARES = "least_squares"
INFEASIBLE = "infeasible"

RANK_RTOL = 1e-10
DEFAULT_TOL_IMAGE = 1e-8


class ContractViolation(ValueError):
    """Inputs break a documented precondition."""


@dataclass(frozen=True)
class ControlBounds:
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.atleast_1d(np.asarray(self.lower, dtype=float))
        hi = np.atleast_1d(np.asarray(self.upper, dtype=float))
        if lo.shape != hi.shape:
            raise StructureError("bound vectors differ in length")
        if np.any(lo > hi):
            raise StructureError("lower bound exceeds upper bound")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @classmethod
    def unbounded(cls, m: int) -> "ControlBounds":
        return cls(np.full(m, -np.inf), np.full(m, np.inf))

    @property
    def m(self) -> int:
        return self.lower.size

    def finite_scale(self) -> float:
        both = np.concatenate([self.lower, self.upper])
        both = both[np.isfinite(both)]
        return float(np.max(np.abs(both), initial=0.0))


@dataclass(frozen=True)
class ComponentPartition:
    singular: tuple[int, ...]
    lower_bang: tuple[int, ...] = ()
    upper_bang: tuple[int, ...] = ()

    def __post_init__(self):
        for name in ("singular", "lower_bang", "upper_bang"):
            object.__setattr__(self, name, tuple(sorted(int(i) for i in getattr(self, name))))

    def validate(self, m: int) -> None:
        all_idx = self.singular + self.lower_bang + self.upper_bang
        if sorted(all_idx) != list(range(m)):
            raise ContractViolation(f"{self} does not partition 0..{m - 1}")

    @classmethod
    def all_singular(cls, m: int) -> "ComponentPartition":
        return cls(tuple(range(m)))

    @property
    def bang(self) -> tuple[int, ...]:
        return tuple(sorted(self.lower_bang + self.upper_bang))


@dataclass(frozen=True)
class FeedbackSolution:
    u: np.ndarray
    residual: float
    mode: str

    @property
    def feasible(self) -> bool:
        return self.mode != INFEASIBLE


def singular_feedback(W, d, tol_image: float = DEFAULT_TOL_IMAGE) -> FeedbackSolution:
    """Solve ``W u + d = 0``.

    Negative definite symmetric part: direct solve.  Otherwise the
    minimum-norm least-squares solution; it is flagged infeasible when
    ``||W u + d|| > tol_image (1 + ||d||)``, i.e. d is not in the range of W.
    """
    W = np.atleast_2d(np.asarray(W, dtype=float))
    d = np.atleast_1d(np.asarray(d, dtype=float))
    if W.ndim != 2 or W.shape[0] != W.shape[1] or W.shape[0] != d.size:
        raise StructureError(f"W{W.shape} and d{d.shape} do not form a square system")
    if not (np.all(np.isfinite(W)) and np.all(np.isfinite(d))):
        raise FloatingPointError("W or d has non-finite entries")
    if d.size == 0:
        return FeedbackSolution(np.zeros(0), 0.0, DEFINITE_INVERSE)
    cert = lc_check(W)
    if cert.definiteness == INDEFINITE:
        warnings.warn("W is not negative semidefinite; Legendre-Clebsch condition fails",
                      RuntimeWarning, stacklevel=2)
    if cert.definiteness == NEGATIVE_DEFINITE:
        u = np.linalg.solve(W, -d)
        mode = DEFINITE_INVERSE
    else:
        u = np.linalg.lstsq(W, -d, rcond=RANK_RTOL)[0]
        mode = LEAST_SQUARES
    res = float(np.linalg.norm(W @ u + d))
    if mode == LEAST_SQUARES and res > tol_image * (1.0 + float(np.linalg.norm(d))):
        mode = INFEASIBLE
    return FeedbackSolution(u, res, mode)


# ------------------------------------------------------ switching functions

def switching_functions(aug: AugmentedSystem, x, p) -> np.ndarray:
    """s_i = (p, 1)^T f_i, the control derivative of the pre-Hamiltonian."""
    z = aug.lift(x)
    pe = _ext(p)
    return np.array([pe @ f(z) for f in aug.fields[1:]])


def switching_rates(aug: AugmentedSystem, x, p, u) -> np.ndarray:
    """d/dt s_i = (p, 1)^T ([f_0, f_i] + sum_j u_j [f_j, f_i])."""
    z = aug.lift(x)
    pe = _ext(p)
    u = np.asarray(u, dtype=float)
    out = np.empty(aug.m)
    for i in range(1, aug.m + 1):
        v = first_bracket(aug, 0, i, z)
        for j in range(1, aug.m + 1):
            if u[j - 1] != 0.0 and j != i:
                v = v + u[j - 1] * first_bracket(aug, j, i, z)
        out[i - 1] = pe @ v
    return out


def switching_rates_linear(sys: PHSystem, cost: LinearQuadraticCost, x, p, u,
                           index: Sequence[int] | None = None) -> np.ndarray:
    """Closed-form d/dt s_I for linear dynamics (general N, any index set)."""
    idx = list(range(sys.m)) if index is None else list(index)
    G, Q, A = sys.G_at(None), sys.Q, sys.A
    QG = Q.T @ G
    Ys = cost.Y + cost.Y.T
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    pv = _p(p)
    GI = G[:, idx]
    NI = cost.N[:, idx]
    return (-pv @ A @ GI - x @ QG @ Ys @ QG.T @ GI - u @ (cost.N.T @ QG.T @ GI)
            + x @ A.T @ QG @ NI + u @ (G.T @ QG @ NI))


# ----------------------------------------------------------- classification

def classify(u, s, bounds: ControlBounds, tol_active: float | None = None,
             tol_switch: float | None = None) -> ComponentPartition:
    """Label each component lower-bang, upper-bang or singular.

    Defaults: ``tol_active = 1e-9 (1 + max finite |bound|)`` and
    ``tol_switch = 1e-6 max|s|`` (relative, so rescaling s by a positive
    factor leaves the labels unchanged).
    """
    u = np.atleast_1d(np.asarray(u, dtype=float))
    s = np.atleast_1d(np.asarray(s, dtype=float))
    if u.shape != s.shape or u.size != bounds.m:
        raise StructureError("u, s and bounds must share length m")
    if tol_active is None:
        tol_active = 1e-9 * (1.0 + bounds.finite_scale())
    if tol_switch is None:
        tol_switch = 1e-6 * float(np.max(np.abs(s), initial=0.0))
    if np.any(u < bounds.lower - tol_active) or np.any(u > bounds.upper + tol_active):
        raise ContractViolation(f"u={u} lies outside the control bounds")
    S, lo, hi = [], [], []
    for i in range(u.size):
        if u[i] <= bounds.lower[i] + tol_active and s[i] > tol_switch:
            lo.append(i)
        elif u[i] >= bounds.upper[i] - tol_active and s[i] < -tol_switch:
            hi.append(i)
        else:
            S.append(i)
    return ComponentPartition(tuple(S), tuple(lo), tuple(hi))


# ------------------------------------------------------ constrained feedback

def bang_values(partition: ComponentPartition, bounds: ControlBounds) -> np.ndarray:
    u = np.zeros(bounds.m)
    u[list(partition.lower_bang)] = bounds.lower[list(partition.lower_bang)]
    u[list(partition.upper_bang)] = bounds.upper[list(partition.upper_bang)]
    return u


def solve_partitioned(W, d, partition: ComponentPartition, bounds: ControlBounds,
                      tol_image: float = DEFAULT_TOL_IMAGE) -> FeedbackSolution:
    """Rows i in S of ``W u + d = 0`` with bang components held at their bounds."""
    W = np.asarray(W, dtype=float)
    d = np.asarray(d, dtype=float)
    m = d.size
    partition.validate(m)
    S, Bg = list(partition.singular), list(partition.bang)
    u = bang_values(partition, bounds)
    if not S:
        return FeedbackSolution(u, 0.0, DEFINITE_INVERSE)
    rhs = d[S] + W[np.ix_(S, Bg)] @ u[Bg]
    sol = singular_feedback(W[np.ix_(S, S)], rhs, tol_image)
    u[S] = sol.u
    return FeedbackSolution(u, sol.residual, sol.mode)


def constrained_singular_feedback(sys: PHSystem, cost: CostSpec, x, p,
                                  partition: ComponentPartition, bounds: ControlBounds,
                                  tol_image: float = DEFAULT_TOL_IMAGE) -> FeedbackSolution:
    W, d = lc_pair(sys, cost, x, p)
    return solve_partitioned(W, d, partition, bounds, tol_image)


def linear_subset_system(sys: PHSystem, cost: LinearQuadraticCost, x, p,
                         index: Sequence[int], u_rest) -> tuple[np.ndarray, np.ndarray]:
    """Closed-form ``(W_II, r)`` such that the singular rows read ``W_II u_I + r = 0``.

    ``u_rest`` holds the controls of the complementary index set in
    increasing index order.  Row form of the feedback formulas for an
    arbitrary output-weight N.
    """
    I = list(index)
    Ac = [k for k in range(sys.m) if k not in I]
    G, Q, A = sys.G_at(None), sys.Q, sys.A
    QG = Q.T @ G
    K = QG @ cost.Y @ QG.T
    N = cost.N
    GI, GA = G[:, I], G[:, Ac]
    NI, NA = N[:, I], N[:, Ac]
    x = np.asarray(x, dtype=float)
    xterm = 2.0 * K @ A @ GI - 2.0 * A.T @ K @ GI + A.T @ A.T @ QG @ NI
    S_II = NI.T @ QG.T @ A @ GI
    W_II = S_II - 2.0 * GI.T @ K @ GI + S_II.T
    coupling = NA.T @ QG.T @ A @ GI - 2.0 * GA.T @ K @ GI + GA.T @ A.T @ QG @ NI  # (|A|, |I|)
    r = _p(p) @ A @ A @ GI + x @ xterm + np.asarray(u_rest, dtype=float) @ coupling
    return W_II.T, r


# -------------------------------------------------------------- subset Goh

@dataclass(frozen=True)
class SubsetGohReport:
    residuals: dict
    tolerance: float

    @property
    def applicable(self) -> bool:
        return bool(self.residuals)

    @property
    def max_violation(self) -> float:
        return max((abs(v) for v in self.residuals.values()), default=0.0)

    @property
    def passed(self) -> bool:
        return self.max_violation <= self.tolerance


def goh_check_subset(sys: PHSystem, cost: CostSpec, partition: ComponentPartition,
                     x=None, p=None, tol: float | None = None) -> SubsetGohReport:
    """Goh residuals (p, 1)^T [f_i, f_j] for pairs of simultaneously singular components.

    Pairs involving a bang component are not applicable and omitted.
    Linear quadratic costs need no state; nonlinear ones need ``x`` and ``p``.
    """
    S = list(partition.singular)
    pairs = [(i, j) for a, i in enumerate(S) for j in S[a + 1:]]
    res = {}
    if isinstance(cost, LinearQuadraticCost) and sys.is_linear:
        G = sys.G_at(None)
        M0 = cost.N.T @ G.T @ sys.Q @ G       # M0[j, i] = n_j^T G^T Q g_i
        for i, j in pairs:
            res[(i, j)] = float(M0[j, i] - M0[i, j])
        tol = 1e-8 * (1.0 + float(np.max(np.abs(M0), initial=0.0))) if tol is None else tol
    else:
        if x is None or p is None:
            raise ContractViolation("nonlinear subset Goh check needs x and p")
        from .conditions import goh_nonlinear
        rep = goh_nonlinear(sys, cost, x, p, tol)
        for i, j in pairs:
            res[(i, j)] = float(rep.combined[i, j])
        tol = rep.tolerance
    return SubsetGohReport(res, tol)


__all__ = [
    "ControlBounds", "ComponentPartition", "FeedbackSolution", "ContractViolation",
    "singular_feedback", "switching_functions", "switching_rates", "switching_rates_linear",
    "classify", "solve_partitioned", "constrained_singular_feedback", "linear_subset_system",
    "goh_check_subset", "SubsetGohReport", "bang_values", "augment",
    "DEFINITE_INVERSE", "LEAST_SQUARES", "INFEASIBLE",
]
