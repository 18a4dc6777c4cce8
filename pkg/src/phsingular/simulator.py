"""Closed-loop integration of state, adjoint and cost with energy accounting.

The adjoint runs forward from an initial value chosen so the switching
functions and their first derivatives vanish at t = 0 (a singular extremal
candidate, not a certified optimum).  Open-loop controls are sampled at the
RK4 stage times.  Singular feedback is re-evaluated at every stage by
default (``feedback_eval="stage"``); ``"step"`` holds the value from the
start of each step, which costs one order in the switching-function drift.
The constrained policy always holds its control and partition over a step.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import kernels
from .conditions import _ext, evaluate_conditions, lc_check, lc_matrix_linear, lc_pair
from .descriptor import DescriptorPHSystem, reduce_linear, solve_algebraic
from .feedback import (INFEASIBLE, ComponentPartition, ControlBounds, singular_feedback,
                       solve_partitioned, switching_functions)
from .lie import AugmentedSystem, augment, first_bracket
from .ph_core import (CostSpec, EnergyLedger, LinearQuadraticCost, PHSystem, StructureError,
                      affine_cost, validate_structure)

POLICIES = ("open_loop", "singular", "constrained_singular")
FEEDBACK_EVAL = ("stage", "step")
DEFAULT_DT = 1e-3

COMPLETE = "complete"
INFEASIBLE_STOP = "infeasible"
BLOWUP = "blowup"


class BlowUpError(FloatingPointError):
    def __init__(self, message: str, last_time: float):
        super().__init__(message)
        self.last_time = last_time


@dataclass
class ScenarioConfig:
    system: PHSystem | DescriptorPHSystem
    cost: CostSpec
    x0: np.ndarray
    T: float
    dt: float = DEFAULT_DT
    policy: str = "open_loop"
    control: Callable[[float], np.ndarray] | None = None
    bounds: ControlBounds | None = None
    p0: str | np.ndarray = "consistent"
    feedback_eval: str = "stage"

    def __post_init__(self):
        self.x0 = np.atleast_1d(np.asarray(self.x0, dtype=float))
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if not self.T >= self.dt:
            raise ValueError("T must be at least dt")
        if self.policy not in POLICIES:
            raise ValueError(f"policy must be one of {POLICIES}, got {self.policy!r}")
        if self.feedback_eval not in FEEDBACK_EVAL:
            raise ValueError(f"feedback_eval must be one of {FEEDBACK_EVAL}")
        if self.policy == "constrained_singular" and self.bounds is None:
            raise ValueError("constrained_singular policy needs control bounds")

    @property
    def nsteps(self) -> int:
        return max(1, int(math.ceil(self.T / self.dt - 1e-9)))


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    adjoints: np.ndarray
    controls: np.ndarray
    outputs: np.ndarray
    energy: np.ndarray
    dissipation_rate: np.ndarray
    supply_rate: np.ndarray
    cost: np.ndarray
    supplied: np.ndarray       # running integral of y^T u
    dissipated: np.ndarray     # running integral of (Qx)^T R (Qx)
    singular_mask: np.ndarray  # (len(times), m) components on a singular arc
    system: PHSystem
    cost_spec: CostSpec
    status: str = COMPLETE
    diagnostic: str = ""
    backend: str = "python"
    x2: np.ndarray | None = None
    dae_residual: np.ndarray | None = None
    p0_residual: tuple[float, float] | None = None
    initial_certificate: object | None = None

    @property
    def n(self) -> int:
        return self.states.shape[1]

    @property
    def m(self) -> int:
        return self.controls.shape[1]

    def ledger(self, k: int) -> EnergyLedger:
        return EnergyLedger(float(self.energy[k]), float(self.dissipation_rate[k]),
                            float(self.supply_rate[k]))

    def header(self) -> list[str]:
        n, m = self.n, self.m
        return (["t"] + [f"x{i}" for i in range(1, n + 1)] + [f"p{i}" for i in range(1, n + 1)]
                + [f"u{i}" for i in range(1, m + 1)] + [f"y{i}" for i in range(1, m + 1)]
                + ["energy", "dissipation_rate", "supply_rate", "cost"])

    def csv_text(self) -> str:
        buf = io.StringIO()
        buf.write(",".join(self.header()) + "\n")
        cols = np.column_stack([self.times, self.states, self.adjoints, self.controls, self.outputs,
                                self.energy, self.dissipation_rate, self.supply_rate, self.cost])
        for row in cols:
            buf.write(",".join("%.17g" % v for v in row) + "\n")
        return buf.getvalue()

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write(self.csv_text())


def read_csv(path) -> tuple[list[str], np.ndarray]:
    with open(path) as fh:
        header = fh.readline().strip().split(",")
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return header, data


# ------------------------------------------------------ initial adjoint

@dataclass(frozen=True)
class AdjointInit:
    p0: np.ndarray
    switching_residual: float      # max |H_u(x0, p0)|
    rate_residual: float           # max |d/dt H_u(x0, p0)|
    consistent: bool


def _affine_rows(vectors: list[np.ndarray], n: int) -> tuple[np.ndarray, np.ndarray]:
    V = np.array(vectors).reshape(len(vectors), n + 1)
    return V[:, :n], V[:, n]


def _null_basis(A: np.ndarray) -> np.ndarray:
    if A.size == 0:
        return np.eye(A.shape[1])
    _, sv, Vt = np.linalg.svd(A)
    rank = int(np.sum(sv > 1e-12 * sv[0])) if sv.size else 0
    return Vt[rank:].T


def _prioritized_lstsq(levels: list[tuple[np.ndarray, np.ndarray]], n: int) -> np.ndarray:
    """Minimize ||A_k p - b_k|| level by level, each within the minimizers of the previous ones."""
    p = np.zeros(n)
    Z = np.eye(n)
    for A, b in levels:
        if Z.shape[1] == 0 or A.shape[0] == 0:
            continue
        AZ = A @ Z
        w = np.linalg.lstsq(AZ, b - A @ p, rcond=1e-12)[0]
        p = p + Z @ w
        Z = Z @ _null_basis(AZ)
    return p


def consistent_initial_adjoint(sys: PHSystem, cost: CostSpec, x0,
                               aug: AugmentedSystem | None = None, tol: float | None = None,
                               reference=None) -> AdjointInit:
    """p0 with H_u = 0 exactly (least squares if impossible) and d/dt H_u = 0 as far as the
    remaining freedom allows; among those, closest to ``reference`` (default 0).

    Both conditions are affine in p: ``H_{u_i} = (p, 1)^T f_i`` and, when the
    Goh condition holds, ``d/dt H_{u_i} = (p, 1)^T [f_0, f_i]``.
    """
    x0 = np.asarray(x0, dtype=float)
    aug = augment(sys, cost) if aug is None else aug
    n, m = sys.n, sys.m
    z = aug.lift(x0)
    A1, b1 = _affine_rows([f(z) for f in aug.fields[1:]], n)
    A2, b2 = _affine_rows([first_bracket(aug, 0, i, z) for i in range(1, m + 1)], n)
    ref = np.zeros(n) if reference is None else np.asarray(reference, dtype=float)
    p0 = _prioritized_lstsq([(A1, -b1), (A2, -b2), (np.eye(n), ref)], n)
    r1 = float(np.max(np.abs(A1 @ p0 + b1), initial=0.0))
    r2 = float(np.max(np.abs(A2 @ p0 + b2), initial=0.0))
    tol = 1e-8 * (1.0 + np.linalg.norm(x0) + np.linalg.norm(p0)) if tol is None else tol
    return AdjointInit(p0, r1, r2, r1 <= tol and r2 <= tol)


def singular_closed_loop_matrix(sys: PHSystem, cost: LinearQuadraticCost) -> np.ndarray:
    """Matrix of the linear (x, p) flow under ``u = -W^{-1} d(x, p)``; W must be invertible."""
    Aaug, Baug, *_ = _linear_kernel_data(sys, cost)
    lc = lc_matrix_linear(sys, cost)
    F = -np.linalg.solve(lc.W, np.hstack([lc.Dx, lc.Dp]))
    return Aaug + Baug @ F


def stable_subspace(Acl: np.ndarray, rtol: float = 1e-6) -> np.ndarray:
    """Real orthonormal basis of the span of eigenvectors with negative real part.

    The transverse block of the singular flow is nilpotent; rounding splits
    its zero eigenvalues by about sqrt(eps), hence the loose cutoff.
    """
    ev, V = np.linalg.eig(Acl)
    scale = 1.0 + float(np.max(np.abs(ev), initial=0.0))
    Vs = V[:, ev.real < -rtol * scale]
    if Vs.shape[1] == 0:
        return np.zeros((Acl.shape[0], 0))
    B = np.hstack([Vs.real, Vs.imag])
    U, sv, _ = np.linalg.svd(B, full_matrices=False)
    return U[:, :int(np.sum(sv > 1e-10 * sv[0]))]


def stable_adjoint_reference(sys: PHSystem, cost: LinearQuadraticCost, x0) -> tuple[np.ndarray, float]:
    """Adjoint that puts (x0, p) closest to the stable subspace of the singular flow.

    The singular closed loop has a spectrum symmetric about the imaginary
    axis, so a generic consistent p0 excites growing modes.  Returns the p
    part of the best fit and the x-misfit ``||x0 - x_fit||``.
    """
    n = sys.n
    Vs = stable_subspace(singular_closed_loop_matrix(sys, cost))
    if Vs.shape[1] == 0:
        return np.zeros(n), float(np.linalg.norm(x0))
    c = np.linalg.lstsq(Vs[:n], x0, rcond=1e-12)[0]
    return Vs[n:] @ c, float(np.linalg.norm(Vs[:n] @ c - x0))


# ------------------------------------------------------------- integration

def _resolve_system(cfg: ScenarioConfig):
    sys = cfg.system
    x0 = cfg.x0
    reduced = None
    if isinstance(sys, DescriptorPHSystem):
        if not sys.is_linear:
            raise StructureError("closed-loop runs need a linear descriptor system; "
                                 "use integrate_descriptor for nonlinear blocks")
        reduced = reduce_linear(sys)
        if x0.size == sys.n:
            x0 = x0[:sys.n1]
        sys = reduced.system
    if x0.shape != (sys.n,):
        raise StructureError(f"x0 has length {x0.size}, expected {sys.n}")
    return sys, x0, reduced


def _initial_adjoint(cfg, sys, cost, x0, aug):
    if isinstance(cfg.p0, str):
        if cfg.p0 == "zero":
            return np.zeros(sys.n), None
        if cfg.p0 not in ("consistent", "stable"):
            raise ValueError(f"unknown p0 policy {cfg.p0!r}")
        ref = None
        if cfg.p0 == "stable":
            if not (sys.is_linear and isinstance(cost, LinearQuadraticCost)):
                raise ValueError("p0 policy 'stable' needs a linear system with quadratic cost")
            ref = stable_adjoint_reference(sys, cost, x0)[0]
        init = consistent_initial_adjoint(sys, cost, x0, aug, reference=ref)
        return init.p0, (init.switching_residual, init.rate_residual)
    p0 = np.asarray(cfg.p0, dtype=float)
    if p0.shape != (sys.n,):
        raise StructureError(f"p0 has length {p0.size}, expected {sys.n}")
    return p0, None


def _stage_controls(control, t0: float, dt: float, nsteps: int, m: int):
    ust = np.zeros((nsteps, 3, m))
    if control is None:
        return ust, np.zeros(m)
    for k in range(nsteps):
        t = t0 + k * dt
        ust[k, 0] = control(t)
        ust[k, 1] = control(t + 0.5 * dt)
        ust[k, 2] = control(t + dt)
    return ust, np.asarray(control(t0 + nsteps * dt), dtype=float).reshape(m)


def _linear_kernel_data(sys: PHSystem, cost: LinearQuadraticCost):
    n, m = sys.n, sys.m
    A, G, Q, R = sys.A, sys.G_at(None), sys.Q, sys.R_at(None)
    QG = Q.T @ G
    K = QG @ cost.Y @ QG.T
    Z = np.zeros((n, n))
    Aaug = np.block([[A, Z], [-(K + K.T), -A.T]])
    Baug = np.vstack([G, -QG @ cost.N])
    N2 = 2 * n
    Kq = np.zeros((3, N2, N2))
    Lq = np.zeros((3, N2, m))
    lq = np.zeros((3, m))
    Kq[0, :n, :n] = K
    Lq[0, :n] = QG @ cost.N
    lq[0] = cost.l
    Lq[1, :n] = QG
    Kq[2, :n, :n] = Q.T @ R @ Q
    return Aaug, Baug, Kq, Lq, lq


def _post_process(sys, cost, times, X, P, U, C, SUP, DIS, mask, **kw) -> Trajectory:
    Q = sys.Q
    EQ = sys.E.T @ Q
    if sys.is_linear:
        G, R = sys.G_at(None), sys.R_at(None)
        Y = X @ Q.T @ G
        E = 0.5 * np.einsum("ki,ij,kj->k", X, EQ, X)
        D = np.einsum("ki,ij,kj->k", X, Q.T @ R @ Q, X)
    else:
        Y = np.array([sys.G_at(x).T @ (Q @ x) for x in X]).reshape(len(X), sys.m)
        E = 0.5 * np.einsum("ki,ij,kj->k", X, EQ, X)
        D = np.array([(Q @ x) @ sys.R_at(x) @ (Q @ x) for x in X])
    S = np.einsum("ki,ki->k", Y, U)
    return Trajectory(times, X, P, U, Y, E, D, S, C, SUP, DIS, mask, sys, cost, **kw)


def _integrate_kernel(cfg, sys, cost, x0, p0, backend):
    n, m = sys.n, sys.m
    Aaug, Baug, Kq, Lq, lq = _linear_kernel_data(sys, cost)
    if cfg.policy == "singular":
        lc = lc_matrix_linear(sys, cost)
        F = -np.linalg.solve(lc.W, np.hstack([lc.Dx, lc.Dp]))
        control = None
    else:
        F = np.zeros((m, 2 * n))
        control = cfg.control
    nsteps = cfg.nsteps
    ust, ufin = _stage_controls(control, 0.0, cfg.dt, nsteps, m)
    z0 = np.concatenate([x0, p0])
    Zs, U, ACC, nvalid = kernels.rk4_affine(Aaug, Baug, F, Kq, Lq, lq, z0, ust, ufin,
                                            float(cfg.dt), nsteps, cfg.feedback_eval == "stage",
                                            backend=backend)
    status, diag = COMPLETE, ""
    if nvalid < nsteps + 1:
        status = BLOWUP
        diag = f"non-finite state after t={(nvalid - 1) * cfg.dt:.6g}"
        if nvalid - 1 >= 0:
            U[nvalid - 1] = F @ Zs[nvalid - 1]
    sl = slice(0, nvalid)
    times = cfg.dt * np.arange(nsteps + 1)[sl]
    mask = np.full((nvalid, m), cfg.policy == "singular")
    return _post_process(sys, cost, times, Zs[sl, :n], Zs[sl, n:], U[sl], ACC[sl, 0], ACC[sl, 1],
                         ACC[sl, 2], mask, status=status, diagnostic=diag,
                         backend=backend or kernels.BACKEND)


def _constrained_control(sys, cost, x, p, bounds: ControlBounds, aug):
    """Clip-and-pin heuristic for the bang/singular partition at one state."""
    W, d = lc_pair(sys, cost, x, p)
    m = sys.m
    tol = 1e-9 * (1.0 + bounds.finite_scale())
    lo, hi = [], []
    for _ in range(m + 1):
        part = ComponentPartition(tuple(i for i in range(m) if i not in lo + hi), tuple(lo), tuple(hi))
        sol = solve_partitioned(W, d, part, bounds)
        if sol.mode == INFEASIBLE:
            break
        u = sol.u
        new_lo = [i for i in part.singular if u[i] < bounds.lower[i] - tol]
        new_hi = [i for i in part.singular if u[i] > bounds.upper[i] + tol]
        if not new_lo and not new_hi:
            return sol, part
        lo += new_lo
        hi += new_hi
    # one retry with every component singular, clipped to the box
    part = ComponentPartition.all_singular(m)
    sol = solve_partitioned(W, d, part, bounds)
    if sol.mode == INFEASIBLE:
        return sol, part
    u = np.clip(sol.u, bounds.lower, bounds.upper)
    lo = tuple(i for i in range(m) if u[i] <= bounds.lower[i] + tol and sol.u[i] < bounds.lower[i])
    hi = tuple(i for i in range(m) if u[i] >= bounds.upper[i] - tol and sol.u[i] > bounds.upper[i])
    part = ComponentPartition(tuple(i for i in range(m) if i not in lo + hi), lo, hi)
    return solve_partitioned(W, d, part, bounds), part


def _integrate_generic(cfg, sys, cost, x0, p0):
    n, m = sys.n, sys.m
    c = affine_cost(sys, cost)
    Q = sys.Q
    aug = augment(sys, cost)

    def rhs(y, u):
        x, p = y[:n], y[n:2 * n]
        G = sys.G_at(x)
        dG = sys.input_jacobian(x)
        Jx = sys.drift_jacobian(x) + np.einsum("i,iab->ab", u, dG)
        e = Q @ x
        out = np.empty(2 * n + 3)
        out[:n] = sys.drift(x) + G @ u
        out[n:2 * n] = -Jx.T @ p - c.grad0(x) - c.jac(x).T @ u
        out[2 * n] = c.running(x) + c.weights_at(x) @ u
        out[2 * n + 1] = (G.T @ e) @ u
        out[2 * n + 2] = e @ sys.R_at(x) @ e
        return out

    nsteps, dt = cfg.nsteps, cfg.dt
    Yv = np.zeros((nsteps + 1, 2 * n + 3))
    Yv[0, :n], Yv[0, n:2 * n] = x0, p0
    U = np.zeros((nsteps + 1, m))
    mask = np.zeros((nsteps + 1, m), dtype=bool)
    status, diag = COMPLETE, ""

    def feedback(k, y):
        x, p = y[:n], y[n:2 * n]
        if cfg.policy == "singular":
            W, d = lc_pair(sys, cost, x, p)
            sol = singular_feedback(W, d)
            return sol, ComponentPartition.all_singular(m)
        return _constrained_control(sys, cost, x, p, cfg.bounds, aug)

    last = nsteps
    for k in range(nsteps + 1):
        y = Yv[k]
        t = k * dt
        if cfg.policy == "open_loop":
            us = [np.zeros(m) if cfg.control is None else np.asarray(cfg.control(t + s * dt), float)
                  for s in (0.0, 0.5, 1.0)]
        else:
            sol, part = feedback(k, y)
            if sol.mode == INFEASIBLE:
                status = INFEASIBLE_STOP
                diag = f"feedback infeasible at t={t:.6g} (residual {sol.residual:.3e})"
                last = k
                U[k] = sol.u
                mask[k, list(part.singular)] = True
                break
            us = [sol.u] * 3
            mask[k, list(part.singular)] = True
        U[k] = us[0]
        if k == nsteps:
            break
        stagewise = cfg.policy == "singular" and cfg.feedback_eval == "stage"

        def u_stage(yy, s):
            if not stagewise:
                return us[s]
            W, d = lc_pair(sys, cost, yy[:n], yy[n:2 * n])
            return singular_feedback(W, d).u

        k1 = rhs(y, us[0])
        y2 = y + 0.5 * dt * k1
        k2 = rhs(y2, u_stage(y2, 1))
        y3 = y + 0.5 * dt * k2
        k3 = rhs(y3, u_stage(y3, 1))
        y4 = y + dt * k3
        k4 = rhs(y4, u_stage(y4, 2))
        Yv[k + 1] = y + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(Yv[k + 1])):
            status, diag, last = BLOWUP, f"non-finite state after t={t:.6g}", k
            break
    sl = slice(0, last + 1)
    times = dt * np.arange(nsteps + 1)[sl]
    Yv = Yv[sl]
    return _post_process(sys, cost, times, Yv[:, :n], Yv[:, n:2 * n], U[sl], Yv[:, 2 * n],
                         Yv[:, 2 * n + 1], Yv[:, 2 * n + 2], mask[sl], status=status,
                         diagnostic=diag, backend="python-generic")


def integrate_closed_loop(cfg: ScenarioConfig, backend: str | None = None,
                          validate: bool = True) -> Trajectory:
    """Fixed-step RK4 on (x, p, cost, supplied, dissipated).

    Linear systems with quadratic cost under the open-loop policy, or the
    singular policy with negative definite W, go through the RK4 kernel
    (compiled when available).  Everything else uses the generic stepper.
    ``backend='python-generic'`` forces the generic stepper.
    """
    sys, x0, reduced = _resolve_system(cfg)
    cost = cfg.cost
    if validate and (reduced is None or reduced.certified):
        rep = validate_structure(sys, [x0])
        if not rep.passed:
            raise StructureError("; ".join(rep.failures()))
    aug = augment(sys, cost)
    p0, p0_res = _initial_adjoint(cfg, sys, cost, x0, aug)
    cert = None
    if cfg.policy != "open_loop":
        W, _ = lc_pair(sys, cost, x0, p0)
        cert = lc_check(W)
    linear = sys.is_linear and isinstance(cost, LinearQuadraticCost)
    use_kernel = (backend != "python-generic" and linear
                  and (cfg.policy == "open_loop"
                       or (cfg.policy == "singular" and cert.definiteness == "negative_definite")))
    if use_kernel:
        traj = _integrate_kernel(cfg, sys, cost, x0, p0, backend)
    else:
        traj = _integrate_generic(cfg, sys, cost, x0, p0)
    traj.p0_residual = p0_res
    traj.initial_certificate = cert
    if reduced is not None:
        dsys = cfg.system
        traj.x2 = reduced.recover(traj.states)
        C, P = dsys.algebraic_parts(np.zeros(dsys.n))
        traj.dae_residual = np.max(np.abs(traj.states @ C.T + traj.x2 @ P.T), axis=1,
                                   initial=0.0)
    return traj


def integrate_descriptor(dsys: DescriptorPHSystem, x1_0, control: Callable[[float], np.ndarray] | None,
                         T: float, dt: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """RK4 on x1 that resolves the algebraic rows for x2 at every stage.

    Returns (times, X1, X2).  Nonlinear blocks are handled by Newton solves
    warm-started from the previous x2.
    """
    nsteps = max(1, int(math.ceil(T / dt - 1e-9)))
    m = dsys.m
    ctrl = (lambda t: np.zeros(m)) if control is None else control
    X1 = np.zeros((nsteps + 1, dsys.n1))
    X2 = np.zeros((nsteps + 1, dsys.n2))
    X1[0] = x1_0
    X2[0] = solve_algebraic(dsys, X1[0])[0]
    guess = X2[0]

    def f(x1, t):
        nonlocal guess
        x2 = solve_algebraic(dsys, x1, guess)[0]
        guess = x2
        return dsys.differential_rhs(x1, x2, np.asarray(ctrl(t), dtype=float))

    for k in range(nsteps):
        t, x = k * dt, X1[k]
        k1 = f(x, t)
        k2 = f(x + 0.5 * dt * k1, t + 0.5 * dt)
        k3 = f(x + 0.5 * dt * k2, t + 0.5 * dt)
        k4 = f(x + dt * k3, t + dt)
        X1[k + 1] = x + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        X2[k + 1] = solve_algebraic(dsys, X1[k + 1], X2[k])[0]
    return dt * np.arange(nsteps + 1), X1, X2


# ------------------------------------------------------------------- audit

@dataclass
class AuditReport:
    energy_balance_residual: float
    energy_balance_relative: float
    max_Hu: float | None
    max_dHu: float | None
    sample_indices: list[int]
    goh_pass: list[bool]
    lc_definiteness: list[str]
    dae_residual: float | None = None
    status: str = COMPLETE
    extra: dict = field(default_factory=dict)

    @property
    def stationarity_applicable(self) -> bool:
        return self.max_Hu is not None

    def to_lines(self) -> list[str]:
        na = "not_applicable"
        lines = [
            f"status: {self.status}",
            f"energy_balance_residual: {self.energy_balance_residual:.6e}",
            f"energy_balance_relative: {self.energy_balance_relative:.6e}",
            f"max_Hu: {na if self.max_Hu is None else format(self.max_Hu, '.6e')}",
            f"max_dHu: {na if self.max_dHu is None else format(self.max_dHu, '.6e')}",
            f"goh_pass_all_samples: {str(all(self.goh_pass)).lower()}",
            f"lc_definiteness_samples: {','.join(self.lc_definiteness)}",
        ]
        if self.dae_residual is not None:
            lines.append(f"dae_residual: {self.dae_residual:.6e}")
        for key, val in self.extra.items():
            lines.append(f"{key}: {val}")
        return lines


def energy_balance_residual(traj: Trajectory) -> np.ndarray:
    """H(x_k) - H(x_0) - int_0^{t_k} (y^T u - (Qx)^T R (Qx)) dt along the grid."""
    X = traj.states
    EQ = traj.system.E.T @ traj.system.Q
    dH = 0.5 * np.einsum("ki,ij,kj->k", X - X[0], EQ, X + X[0])
    return dH - (traj.supplied - traj.dissipated)


def audit(traj: Trajectory, nsample: int = 16) -> AuditReport:
    sys, cost = traj.system, traj.cost_spec
    bal = np.abs(energy_balance_residual(traj))
    res = float(np.max(bal))
    rel = res / (1.0 + float(traj.energy[0]))
    aug = augment(sys, cost)
    rows = np.where(traj.singular_mask.any(axis=1))[0]
    max_hu = max_dhu = None
    if rows.size:
        max_hu = max_dhu = 0.0
        for k in rows:
            x, p = traj.states[k], traj.adjoints[k]
            S = np.where(traj.singular_mask[k])[0]
            s = switching_functions(aug, x, p)
            z, pe = aug.lift(x), _ext(p)
            ds = np.array([pe @ first_bracket(aug, 0, i + 1, z) for i in S])
            max_hu = max(max_hu, float(np.max(np.abs(s[S]))))
            max_dhu = max(max_dhu, float(np.max(np.abs(ds))))
    last = len(traj.times) - 1
    idx = sorted(set(int(round(v)) for v in np.linspace(0, last, nsample)))
    goh, classes = [], []
    for k in idx:
        rep = evaluate_conditions(sys, cost, traj.states[k], traj.adjoints[k])
        goh.append(rep.goh_pass)
        classes.append(rep.certificate.definiteness)
    dae = None if traj.dae_residual is None else float(np.max(traj.dae_residual))
    return AuditReport(res, rel, max_hu, max_dhu, idx, goh, classes, dae, traj.status)
