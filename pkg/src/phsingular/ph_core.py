"""Port-Hamiltonian system and cost data, structural checks and energy forms.

A system is ``E x' = (J(x) - R(x)) Q x + G(x) u`` with collocated output
``y = G(x)^T Q x`` and storage ``H(x) = 1/2 x^T E^T Q x``.  ``J``, ``R`` and
``G`` may be constant arrays or callables of the state; ``Q`` and ``E`` are
always constant.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence, Union

import numpy as np

from . import _numdiff

MatrixMap = Union[np.ndarray, Callable[[np.ndarray], np.ndarray]]

DEFAULT_TOL_STRUCT = 1e-10
N_RANDOM_SAMPLES = 32


class StructureError(ValueError):
    """A coefficient map has the wrong shape or a forbidden form."""


class ConfigurationError(ValueError):
    """Required derivative data is missing and finite differences are disabled."""


def psd_tolerance(M: np.ndarray) -> float:
    return 1e-9 * (1.0 + float(np.max(np.abs(M), initial=0.0)))


def max_abs(M) -> float:
    return float(np.max(np.abs(M), initial=0.0))


def min_sym_eig(M: np.ndarray) -> float:
    M = np.asarray(M, dtype=float)
    if M.size == 0:
        return 0.0
    return float(np.linalg.eigvalsh(0.5 * (M + M.T))[0])


def _as_map(value: MatrixMap) -> tuple[Callable[[np.ndarray], np.ndarray], np.ndarray | None]:
    if callable(value):
        return value, None
    arr = np.atleast_2d(np.asarray(value, dtype=float))
    return (lambda x, _a=arr: _a), arr


@dataclass(frozen=True, eq=False)
class PHSystem:
    """Ordinary (or constant-E descriptor) port-Hamiltonian model.

    ``input_jacobian(x)`` returns the stacked Jacobians of the columns of
    ``G`` with shape ``(m, n, n)``; ``drift_jacobian(x)`` the Jacobian of
    ``x -> (J(x) - R(x)) Q x``.  Both fall back to finite differences.
    """

    J: MatrixMap
    R: MatrixMap
    Q: np.ndarray
    G: MatrixMap
    E: np.ndarray | None = None
    input_jacobian_fn: Callable[[np.ndarray], np.ndarray] | None = None
    drift_jacobian_fn: Callable[[np.ndarray], np.ndarray] | None = None
    n: int = field(init=False)
    m: int = field(init=False)

    def __post_init__(self):
        if callable(self.Q):
            raise StructureError("Q must be a constant matrix; state-dependent Q is not supported")
        Q = np.atleast_2d(np.asarray(self.Q, dtype=float))
        if Q.shape[0] != Q.shape[1]:
            raise StructureError(f"Q must be square, got shape {Q.shape}")
        n = Q.shape[0]
        if self.E is None:
            E = np.eye(n)
        else:
            if callable(self.E):
                raise StructureError("E must be a constant matrix")
            E = np.atleast_2d(np.asarray(self.E, dtype=float))
            if E.shape != (n, n):
                raise StructureError(f"E has shape {E.shape}, expected {(n, n)}")
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "E", E)
        for name in ("J", "R", "G"):
            fn, const = _as_map(getattr(self, name))
            object.__setattr__(self, f"_{name}_fn", fn)
            object.__setattr__(self, f"_{name}_const", const)
        G0 = self._G_const if self._G_const is not None else np.asarray(self._G_fn(np.zeros(n)))
        if G0.ndim == 1:
            G0 = G0.reshape(n, 1)
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "m", int(G0.shape[1]))
        # shape errors surface here instead of deep inside a bracket
        x0 = np.zeros(n)
        self.J_at(x0), self.R_at(x0), self.G_at(x0)

    def _eval(self, name: str, x: np.ndarray, shape: tuple[int, int]) -> np.ndarray:
        const = getattr(self, f"_{name}_const")
        val = const if const is not None else np.asarray(getattr(self, f"_{name}_fn")(x), dtype=float)
        if name == "G" and val.ndim == 1 and shape[1] == 1:
            val = val.reshape(-1, 1)
        if val.shape != shape:
            raise StructureError(f"{name}(x) has shape {val.shape}, expected {shape}")
        return val

    def J_at(self, x) -> np.ndarray:
        return self._eval("J", x, (self.n, self.n))

    def R_at(self, x) -> np.ndarray:
        return self._eval("R", x, (self.n, self.n))

    def G_at(self, x) -> np.ndarray:
        return self._eval("G", x, (self.n, self.m))

    @property
    def is_linear(self) -> bool:
        return all(getattr(self, f"_{k}_const") is not None for k in "JRG")

    @property
    def has_identity_E(self) -> bool:
        return bool(np.array_equal(self.E, np.eye(self.n)))

    @property
    def A(self) -> np.ndarray:
        """(J - R) Q for linear systems."""
        if not self.is_linear:
            raise StructureError("A = (J - R) Q is only constant for linear systems")
        return (self._J_const - self._R_const) @ self.Q

    def drift(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return (self.J_at(x) - self.R_at(x)) @ (self.Q @ x)

    def drift_jacobian(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.drift_jacobian_fn is not None:
            return np.asarray(self.drift_jacobian_fn(x), dtype=float)
        if self._J_const is not None and self._R_const is not None:
            return (self._J_const - self._R_const) @ self.Q
        return _numdiff.jacobian(self.drift, x, where="drift")

    def input_jacobian(self, x) -> np.ndarray:
        """Jacobians of the columns g_i, shape (m, n, n)."""
        x = np.asarray(x, dtype=float)
        if self.input_jacobian_fn is not None:
            return np.asarray(self.input_jacobian_fn(x), dtype=float).reshape(self.m, self.n, self.n)
        if self._G_const is not None:
            return np.zeros((self.m, self.n, self.n))
        Gj = _numdiff.jacobian(lambda w: self.G_at(w).T.ravel(), x, where="G")
        return Gj.reshape(self.m, self.n, self.n)


# --------------------------------------------------------------------- costs

@dataclass(frozen=True, eq=False)
class LinearQuadraticCost:
    """Running cost ``y^T Y y + y^T N u + l^T u`` for linear systems.

    ``Y`` is the m x m output weight (the cost matrix is called M in some
    of the bracket formulas; the two are the same object here).
    """

    Y: np.ndarray
    N: np.ndarray
    l: np.ndarray
    horizon: float = 1.0

    def __post_init__(self):
        Y = np.atleast_2d(np.asarray(self.Y, dtype=float))
        N = np.atleast_2d(np.asarray(self.N, dtype=float))
        l = np.atleast_1d(np.asarray(self.l, dtype=float))
        m = l.size
        if Y.shape != (m, m) or N.shape != (m, m):
            raise StructureError(f"cost shapes Y{Y.shape}, N{N.shape}, l({m},) are inconsistent")
        tol = psd_tolerance(Y)
        if max_abs(Y - Y.T) > tol:
            raise StructureError("Y must be symmetric")
        if min_sym_eig(Y) < -tol:
            raise StructureError("Y must be positive semidefinite")
        object.__setattr__(self, "Y", Y)
        object.__setattr__(self, "N", N)
        object.__setattr__(self, "l", l)

    @property
    def m(self) -> int:
        return self.l.size

    @classmethod
    def supplied_energy(cls, m: int, horizon: float = 1.0) -> "LinearQuadraticCost":
        return cls(np.zeros((m, m)), np.eye(m), np.zeros(m), horizon)

    @property
    def is_supplied_energy(self) -> bool:
        return (not np.any(self.Y) and not np.any(self.l)
                and np.array_equal(self.N, np.eye(self.m)))

    def as_affine(self, sys: PHSystem) -> "NonlinearAffineCost":
        """Express the cost as l0(x) + sum l_i(x) u_i with exact derivatives."""
        if not sys.is_linear:
            raise StructureError("LinearQuadraticCost requires a linear system")
        G, Q = sys.G_at(None), sys.Q
        QG = Q.T @ G
        K = QG @ self.Y @ QG.T
        Ks = K + K.T
        Wl = (QG @ self.N).T  # row i is (Q^T G n_i)^T
        n, m = sys.n, self.m
        return NonlinearAffineCost(
            running=lambda x: float(x @ K @ x),
            weights=lambda x: Wl @ x + self.l,
            running_grad=lambda x: Ks @ x,
            running_hess=lambda x: Ks,
            weights_jac=lambda x: Wl,
            weights_hess=lambda x: np.zeros((m, n, n)),
            horizon=self.horizon,
        )


@dataclass(frozen=True, eq=False)
class NonlinearAffineCost:
    """Running cost ``l0(x) + sum_i l_i(x) u_i``.

    ``weights(x)`` returns the vector ``(l_1(x), ..., l_m(x))``;
    ``weights_jac`` its (m, n) Jacobian and ``weights_hess`` the stacked
    (m, n, n) Hessians.  Missing derivatives are differenced unless
    ``allow_fd`` is false.
    """

    running: Callable[[np.ndarray], float]
    weights: Callable[[np.ndarray], np.ndarray]
    running_grad: Callable | None = None
    running_hess: Callable | None = None
    weights_jac: Callable | None = None
    weights_hess: Callable | None = None
    horizon: float = 1.0
    allow_fd: bool = True

    def _need_fd(self, what: str):
        if not self.allow_fd:
            raise ConfigurationError(f"cost has no {what} provider and finite differences are disabled")

    def grad0(self, x):
        if self.running_grad is not None:
            return np.asarray(self.running_grad(x), dtype=float)
        self._need_fd("running-cost gradient")
        return _numdiff.gradient(self.running, x)

    def hess0(self, x):
        if self.running_hess is not None:
            return np.asarray(self.running_hess(x), dtype=float)
        self._need_fd("running-cost Hessian")
        return _numdiff.hessian(self.running, x, self.running_grad)

    def weights_at(self, x):
        return np.atleast_1d(np.asarray(self.weights(x), dtype=float))

    def jac(self, x):
        if self.weights_jac is not None:
            return np.atleast_2d(np.asarray(self.weights_jac(x), dtype=float))
        self._need_fd("weight gradient")
        return _numdiff.jacobian(self.weights_at, x, where="cost weights")

    def hess(self, x):
        if self.weights_hess is not None:
            return np.asarray(self.weights_hess(x), dtype=float)
        self._need_fd("weight Hessian")
        x = np.asarray(x, dtype=float)
        if self.weights_jac is not None:
            H = _numdiff.jacobian(lambda w: self.jac(w).ravel(), x)
            H = H.reshape(-1, x.size, x.size)
        else:
            m = self.weights_at(x).size
            H = np.stack([_numdiff.hessian(lambda w, i=i: self.weights_at(w)[i], x) for i in range(m)])
        return 0.5 * (H + np.swapaxes(H, 1, 2))


CostSpec = Union[LinearQuadraticCost, NonlinearAffineCost]


def supplied_energy_cost(sys: PHSystem, horizon: float = 1.0) -> CostSpec:
    """Cost ``int y^T u dt``; exact linear form when the system is linear."""
    if sys.is_linear:
        return LinearQuadraticCost.supplied_energy(sys.m, horizon)
    Q = sys.Q

    def weights(x):
        return sys.G_at(x).T @ (Q @ x)

    def weights_jac(x):
        G = sys.G_at(x)
        dG = sys.input_jacobian(x)  # (m, n, n)
        return G.T @ Q + np.einsum("a,iab->ib", Q @ x, dG)

    return NonlinearAffineCost(
        running=lambda x: 0.0, weights=weights,
        running_grad=lambda x: np.zeros(sys.n),
        running_hess=lambda x: np.zeros((sys.n, sys.n)),
        weights_jac=weights_jac, horizon=horizon)


def affine_cost(sys: PHSystem, cost: CostSpec) -> NonlinearAffineCost:
    if isinstance(cost, LinearQuadraticCost):
        if cost.m != sys.m:
            raise StructureError(f"cost has m={cost.m}, system has m={sys.m}")
        return cost.as_affine(sys)
    return cost


# ---------------------------------------------------------------- validation

@dataclass(frozen=True)
class InvariantCheck:
    name: str
    violation: float
    tolerance: float
    passed: bool
    worst_sample: int | None = None
    message: str = ""


@dataclass(frozen=True)
class ValidationReport:
    checks: tuple[InvariantCheck, ...]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def __getitem__(self, name: str) -> InvariantCheck:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def failures(self) -> list[str]:
        return [c.message for c in self.checks if not c.passed]

    def to_lines(self) -> list[str]:
        lines = [f"structure_pass: {str(self.passed).lower()}"]
        for c in self.checks:
            lines.append(f"{c.name}_violation: {c.violation:.6e}")
        return lines


def _sample_states(n: int, samples, n_random: int, seed: int) -> list[np.ndarray]:
    out = [np.asarray(s, dtype=float) for s in samples]
    rng = np.random.default_rng(seed)
    out += list(rng.standard_normal((n_random, n)))
    return out


def validate_structure(sys: PHSystem, samples: Sequence | None = None, *,
                       tol_struct: float = DEFAULT_TOL_STRUCT, tol_psd: float | None = None,
                       n_random: int = N_RANDOM_SAMPLES, seed: int = 0) -> ValidationReport:
    """Check skew J, symmetric PSD R and symmetric PSD E^T Q on sample states.

    Caller samples are augmented by ``n_random`` seeded Gaussian states.  With
    ``tol_psd=None`` the PSD threshold is ``1e-9 (1 + max|M|)`` per matrix.
    """
    if samples is not None and len(samples) == 0:
        raise ValueError("samples must be nonempty")
    if tol_struct <= 0 or (tol_psd is not None and tol_psd <= 0):
        raise ValueError("tolerances must be positive")
    states = _sample_states(sys.n, samples or [], n_random, seed)

    worst = {k: (0.0, None, tol_struct) for k in ("J_skew", "R_symmetric", "R_psd")}
    excess = {k: -np.inf for k in worst}
    for idx, x in enumerate(states):
        if x.shape != (sys.n,):
            raise StructureError(f"sample {idx} has shape {x.shape}, expected ({sys.n},)")
        J, R = sys.J_at(x), sys.R_at(x)
        sys.G_at(x)
        tpsd = psd_tolerance(R) if tol_psd is None else tol_psd
        for key, v, tol in (("J_skew", max_abs(J + J.T), tol_struct),
                            ("R_symmetric", max_abs(R - R.T), tol_struct),
                            ("R_psd", max(0.0, -min_sym_eig(R)), tpsd)):
            if v - tol > excess[key]:
                excess[key] = v - tol
                worst[key] = (v, idx, tol)

    EQ = sys.E.T @ sys.Q
    tpsd_eq = psd_tolerance(EQ) if tol_psd is None else tol_psd
    checks = []
    labels = {"J_skew": "J not skew-symmetric", "R_symmetric": "R not symmetric",
              "R_psd": "R not PSD"}
    for key, (v, idx, tol) in worst.items():
        ok = v <= tol
        checks.append(InvariantCheck(key, v, tol, ok, idx,
                                     "" if ok else f"{labels[key]} (violation {v:.3g} at sample {idx})"))
    v = max_abs(EQ - EQ.T)
    checks.append(InvariantCheck("EQ_symmetric", v, tol_struct, v <= tol_struct, None,
                                 "" if v <= tol_struct else f"E^T Q not symmetric (violation {v:.3g})"))
    v = max(0.0, -min_sym_eig(EQ))
    checks.append(InvariantCheck("EQ_psd", v, tpsd_eq, v <= tpsd_eq, None,
                                 "" if v <= tpsd_eq else f"E^T Q not PSD (violation {v:.3g})"))
    return ValidationReport(tuple(checks))


# ------------------------------------------------------------- energy forms

@dataclass(frozen=True)
class EnergyLedger:
    """Stored energy and instantaneous power flows at one state.

    ``dissipated_rate`` is the nonnegative loss ``(Qx)^T R (Qx)``.
    """

    stored: float
    dissipated_rate: float
    supplied_rate: float


def _check_len(v, k: int, what: str) -> np.ndarray:
    v = np.atleast_1d(np.asarray(v, dtype=float))
    if v.shape != (k,):
        raise StructureError(f"{what} has shape {v.shape}, expected ({k},)")
    return v


def energy(sys: PHSystem, x, grad: bool = False):
    x = _check_len(x, sys.n, "x")
    EQ = sys.E.T @ sys.Q
    val = 0.5 * float(x @ EQ @ x)
    if grad:
        return val, EQ @ x
    return val


def output(sys: PHSystem, x) -> np.ndarray:
    x = _check_len(x, sys.n, "x")
    return sys.G_at(x).T @ (sys.Q @ x)


def dissipation_rate(sys: PHSystem, x) -> float:
    e = sys.Q @ x
    return float(e @ sys.R_at(x) @ e)


def power_rates(sys: PHSystem, x, u) -> EnergyLedger:
    x = _check_len(x, sys.n, "x")
    u = _check_len(u, sys.m, "u")
    return EnergyLedger(energy(sys, x), dissipation_rate(sys, x), float(output(sys, x) @ u))
