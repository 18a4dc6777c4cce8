import numpy as np
import pytest

from phsingular.lie import (BracketEvaluationError, VectorField, augment, bracket_field,
                            constant_field, first_bracket, lie_bracket, linear_field,
                            nested_bracket)
from phsingular.models import SHIPPED, rotating_forcing_example
from phsingular.ph_core import LinearQuadraticCost, PHSystem, StructureError

from conftest import random_cost, random_ph


def test_constant_fields_commute():
    h, k = constant_field([1.0, 2.0]), constant_field([-3.0, 0.5])
    assert np.array_equal(lie_bracket(h, k, np.zeros(2)), np.zeros(2))


def test_linear_with_constant_gives_minus_Ag(rng):
    A = rng.standard_normal((3, 3))
    g = rng.standard_normal(3)
    z = rng.standard_normal(3)
    assert np.allclose(lie_bracket(linear_field(A), constant_field(g), z), -A @ g, atol=1e-14)


def test_analytic_and_difference_brackets_agree():
    h = VectorField(lambda z: np.array([z[1], -z[0]]), 2, lambda z: np.array([[0.0, 1.0], [-1.0, 0.0]]))
    k = VectorField(lambda z: np.array([z[0] ** 2, 0.0]), 2, lambda z: np.array([[2 * z[0], 0.0], [0.0, 0.0]]))
    z = np.array([1.0, 2.0])
    analytic = lie_bracket(h, k, z)
    hf, kf = VectorField(h.value, 2), VectorField(k.value, 2)
    assert np.allclose(analytic, lie_bracket(hf, kf, z), atol=1e-6)
    # by hand: k'h = (4, 0), h'k = (0, -1)
    assert np.allclose(analytic, [4.0, 1.0], atol=1e-14)


def test_dimension_mismatch_rejected():
    with pytest.raises(StructureError):
        lie_bracket(constant_field([1.0]), constant_field([1.0, 2.0]), np.zeros(2))


def test_non_finite_values_are_located():
    bad = VectorField(lambda z: np.array([1.0 / z[0], 0.0]), 2, name="blowup")
    with np.errstate(divide="ignore"), pytest.raises(BracketEvaluationError, match="blowup"):
        bad.fd_jac(np.array([0.0, 1.0]))


def test_augmented_fields_linear_zero_N(rng):
    sys = random_ph(rng, 3, 2)
    cost = LinearQuadraticCost(np.zeros((2, 2)), np.zeros((2, 2)), np.zeros(2))
    aug = augment(sys, cost)
    z = aug.lift(rng.standard_normal(3))
    for f in aug.fields[1:]:
        assert f(z)[-1] == 0.0


def test_augmented_fields_supplied_energy_bottom_is_output(rng):
    sys = random_ph(rng, 4, 2)
    aug = augment(sys, LinearQuadraticCost.supplied_energy(2))
    x = rng.standard_normal(4)
    y = sys.G_at(x).T @ sys.Q @ x
    z = aug.lift(x)
    assert np.allclose([f(z)[-1] for f in aug.fields[1:]], y)
    assert np.allclose(aug.fields[0](z)[:4], sys.drift(x))


def test_augment_rejects_descriptor_and_bad_cost(rng):
    sys = PHSystem(np.zeros((2, 2)), np.zeros((2, 2)), np.eye(2), np.eye(2), E=np.diag([1.0, 0.0]))
    with pytest.raises(StructureError):
        augment(sys, LinearQuadraticCost.supplied_energy(2))
    sys = random_ph(rng, 3, 2)
    with pytest.raises(StructureError):
        augment(sys, LinearQuadraticCost.supplied_energy(3))


def test_nested_brackets_of_constant_fields_vanish():
    sys = PHSystem(np.zeros((2, 2)), np.zeros((2, 2)), np.eye(2), np.eye(2))
    aug = augment(sys, LinearQuadraticCost(np.zeros((2, 2)), np.zeros((2, 2)), np.zeros(2)))
    z = aug.lift(np.array([0.4, -0.1]))
    for i in range(3):
        for j in range(3):
            assert np.allclose(nested_bracket(aug, j, i, z), 0.0, atol=1e-12)


def test_nested_bracket_linear_closed_form(rng):
    sys = random_ph(rng, 4, 2)
    cost = random_cost(rng, 2)
    aug = augment(sys, cost)
    G, Q, A = sys.G_at(None), sys.Q, sys.A
    QG = Q @ G
    K = QG @ cost.Y @ QG.T
    z = aug.lift(rng.standard_normal(4))
    for i in range(2):
        for j in range(2):
            nb = nested_bracket(aug, j + 1, i + 1, z)
            expect = (cost.N[:, i] @ QG.T @ A @ G[:, j] - 2 * G[:, i] @ K @ G[:, j]
                      + cost.N[:, j] @ QG.T @ A @ G[:, i])
            scale = 1 + abs(expect)
            assert np.allclose(nb[:4], 0.0, atol=1e-8 * scale)
            assert nb[4] == pytest.approx(expect, rel=1e-8, abs=1e-8)


def test_mechanical_first_brackets_vanish():
    sys, cost = rotating_forcing_example(0.2, 0.5)
    aug = augment(sys, cost)
    rng = np.random.default_rng(3)
    for _ in range(5):
        z = aug.lift(rng.standard_normal(4))
        assert np.allclose(first_bracket(aug, 1, 2, z), 0.0, atol=1e-12)


def test_mechanical_second_order_top_block():
    sys, cost = rotating_forcing_example()
    aug = augment(sys, cost)
    M = np.array([[2.0, 0.3], [0.3, 1.0]])
    Mi = np.linalg.inv(M)
    x = np.array([0.3, -0.2, 0.7, 0.4])
    B = sys.G_at(x)[:2]
    dB = sys.input_jacobian(x)[:, :2, 2:]
    z = aug.lift(x)
    for i in range(2):
        for j in range(2):
            top = dB[i] @ Mi @ B[:, j] + dB[j] @ Mi @ B[:, i]
            nb = nested_bracket(aug, j + 1, i + 1, z)
            assert np.allclose(nb[:2], top, atol=1e-7)
            assert np.allclose(nb[2:4], 0.0, atol=1e-7)


@pytest.mark.parametrize("name", sorted(SHIPPED))
def test_shipped_model_jacobians_match_differences(name):
    sys, cost = SHIPPED[name]()
    aug = augment(sys, cost)
    for f in aug.fields:
        assert f.jacobian_error(n_probes=6) <= 1e-4


def test_bracket_field_is_a_field(rng):
    A = rng.standard_normal((3, 3))
    h, k = linear_field(A), VectorField(lambda z: np.array([z[0] ** 2, z[1] * z[2], 1.0]), 3)
    bf = bracket_field(h, k)
    z = rng.standard_normal(3)
    assert bf(z).shape == (3,)
    assert bf.jac(z).shape == (3, 3)
