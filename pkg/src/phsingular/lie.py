"""Lie brackets of control-affine vector fields.

Convention: ``[h, k](z) = k'(z) h(z) - h'(z) k(z)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from . import _numdiff
from .ph_core import CostSpec, PHSystem, StructureError, affine_cost

BracketEvaluationError = _numdiff.NonFiniteError


@dataclass(frozen=True, eq=False)
class VectorField:
    """A map R^k -> R^k with an optional analytic Jacobian."""

    value: Callable[[np.ndarray], np.ndarray]
    dim: int
    jacobian: Callable[[np.ndarray], np.ndarray] | None = None
    name: str = "field"

    def __call__(self, z) -> np.ndarray:
        return np.asarray(self.value(np.asarray(z, dtype=float)), dtype=float)

    def jac(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        if self.jacobian is not None:
            return np.asarray(self.jacobian(z), dtype=float)
        return self.fd_jac(z)

    def fd_jac(self, z) -> np.ndarray:
        return _numdiff.jacobian(self, z, where=self.name)

    def jacobian_error(self, probes: Sequence | None = None, n_probes: int = 8,
                       seed: int = 0, scale: float = 1.0) -> float:
        """Max relative gap between the analytic Jacobian and central differences."""
        if self.jacobian is None:
            return 0.0
        if probes is None:
            probes = scale * np.random.default_rng(seed).standard_normal((n_probes, self.dim))
        worst = 0.0
        for z in probes:
            Ja, Jf = self.jac(z), self.fd_jac(z)
            worst = max(worst, float(np.max(np.abs(Ja - Jf), initial=0.0)
                                     / (1.0 + np.max(np.abs(Ja), initial=0.0))))
        return worst


def constant_field(c) -> VectorField:
    c = np.asarray(c, dtype=float)
    return VectorField(lambda z: c, c.size, lambda z: np.zeros((c.size, c.size)), "constant")


def linear_field(A) -> VectorField:
    A = np.asarray(A, dtype=float)
    return VectorField(lambda z: A @ z, A.shape[0], lambda z: A, "linear")


def lie_bracket(h: VectorField, k: VectorField, z) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    if h.dim != k.dim or z.shape != (h.dim,):
        raise StructureError(f"bracket dimension mismatch: {h.dim}, {k.dim}, z{z.shape}")
    return k.jac(z) @ h(z) - h.jac(z) @ k(z)


def bracket_field(h: VectorField, k: VectorField) -> VectorField:
    """The field z -> [h, k](z); its Jacobian is differenced."""
    return VectorField(lambda z: lie_bracket(h, k, z), h.dim, None, f"[{h.name},{k.name}]")


@dataclass(frozen=True, eq=False)
class AugmentedSystem:
    """Fields f_0..f_m on z = (x, x_{n+1}) where the last coordinate accrues cost."""

    fields: tuple[VectorField, ...]
    n: int

    @property
    def m(self) -> int:
        return len(self.fields) - 1

    def lift(self, x) -> np.ndarray:
        return np.append(np.asarray(x, dtype=float), 0.0)


def augment(sys: PHSystem, cost: CostSpec) -> AugmentedSystem:
    """Build f_0 = (g_0, l_0) and f_i = (g_i, l_i) with assembled Jacobians."""
    if not sys.has_identity_E:
        raise StructureError("augment needs an ordinary system (E = I); reduce descriptor systems first")
    c = affine_cost(sys, cost)
    n, m = sys.n, sys.m
    if c.weights_at(np.zeros(n)).size != m:
        raise StructureError(f"cost weights have length != m={m}")

    def f0(z):
        x = z[:n]
        return np.append(sys.drift(x), c.running(x))

    def f0_jac(z):
        x = z[:n]
        Jz = np.zeros((n + 1, n + 1))
        Jz[:n, :n] = sys.drift_jacobian(x)
        Jz[n, :n] = c.grad0(x)
        return Jz

    def make(i):
        def fi(z):
            x = z[:n]
            return np.append(sys.G_at(x)[:, i], c.weights_at(x)[i])

        def fi_jac(z):
            x = z[:n]
            Jz = np.zeros((n + 1, n + 1))
            Jz[:n, :n] = sys.input_jacobian(x)[i]
            Jz[n, :n] = c.jac(x)[i]
            return Jz
        return VectorField(fi, n + 1, fi_jac, f"f{i + 1}")

    fields = (VectorField(f0, n + 1, f0_jac, "f0"),) + tuple(make(i) for i in range(m))
    return AugmentedSystem(fields, n)


def first_bracket(aug: AugmentedSystem, i: int, j: int, z) -> np.ndarray:
    return lie_bracket(aug.fields[i], aug.fields[j], z)


def nested_bracket(aug: AugmentedSystem, j: int, i: int, z) -> np.ndarray:
    """[f_j, [f_0, f_i]](z); index 0 gives the drift direction used for d."""
    if not (0 <= i <= aug.m and 0 <= j <= aug.m):
        raise IndexError(f"field indices must lie in 0..{aug.m}")
    inner = bracket_field(aug.fields[0], aug.fields[i])
    return lie_bracket(aug.fields[j], inner, z)
