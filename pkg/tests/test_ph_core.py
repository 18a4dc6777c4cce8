import numpy as np
import pytest

from phsingular.descriptor import from_mechanical
from phsingular.ph_core import (ConfigurationError, LinearQuadraticCost, NonlinearAffineCost,
                                PHSystem, StructureError, affine_cost, dissipation_rate, energy,
                                output, power_rates, supplied_energy_cost, validate_structure)
from phsingular.simulator import ScenarioConfig, integrate_closed_loop

from conftest import random_ph


def test_rotation_with_zero_dissipation_passes():
    sys = PHSystem([[0, -1], [1, 0]], np.zeros((2, 2)), np.eye(2), np.eye(2))
    rep = validate_structure(sys, [np.zeros(2)])
    assert rep.passed
    assert rep["J_skew"].violation == 0.0


def test_indefinite_R_is_reported():
    sys = PHSystem(np.zeros((2, 2)), [[1, 0], [0, -0.1]], np.eye(2), np.eye(2))
    rep = validate_structure(sys, [np.zeros(2)])
    assert not rep.passed
    chk = rep["R_psd"]
    assert chk.violation == pytest.approx(0.1, abs=1e-12)
    assert any("R not PSD" in msg for msg in rep.failures())


def test_state_dependent_J_failure_names_worst_sample():
    def J(x):
        return np.array([[0.0, -1.0], [1.0 + x[0] ** 2, 0.0]])
    sys = PHSystem(J, np.zeros((2, 2)), np.eye(2), np.eye(2))
    rep = validate_structure(sys, [np.array([3.0, 0.0])], n_random=4)
    chk = rep["J_skew"]
    assert not chk.passed
    assert chk.violation == pytest.approx(9.0)
    assert chk.worst_sample == 0


def test_mechanical_blocks_pass():
    sys = from_mechanical(np.diag([1.0, 3.0]), np.diag([0.2, 0.0]), np.diag([4.0, 1.0]), np.eye(2))
    assert validate_structure(sys, [np.ones(4)]).passed


def test_nonsymmetric_EQ_fails():
    sys = PHSystem(np.zeros((2, 2)), np.zeros((2, 2)), [[1.0, 0.5], [0.0, 1.0]], np.eye(2))
    rep = validate_structure(sys, [np.zeros(2)])
    assert not rep["EQ_symmetric"].passed


def test_validate_rejects_bad_arguments():
    sys = PHSystem([[0, -1], [1, 0]], np.zeros((2, 2)), np.eye(2), np.eye(2))
    with pytest.raises(ValueError):
        validate_structure(sys, [])
    with pytest.raises(ValueError):
        validate_structure(sys, [np.zeros(2)], tol_struct=0.0)
    with pytest.raises(StructureError):
        validate_structure(sys, [np.zeros(3)])


def test_shape_errors_name_the_map():
    with pytest.raises(StructureError, match="J"):
        PHSystem(np.zeros((3, 3)), np.zeros((2, 2)), np.eye(2), np.eye(2))
    with pytest.raises(StructureError, match="G"):
        PHSystem(np.zeros((2, 2)), np.zeros((2, 2)), np.eye(2), lambda x: np.zeros((3, 1)))
    with pytest.raises(StructureError):
        PHSystem(np.zeros((2, 2)), np.zeros((2, 2)), lambda x: np.eye(2), np.eye(2))


def test_energy_values():
    sys = PHSystem(np.zeros((2, 2)), np.zeros((2, 2)), np.eye(2), np.eye(2))
    assert energy(sys, [1.0, 1.0]) == 1.0
    assert energy(sys, [0.0, 0.0]) == 0.0
    mech = from_mechanical([[2.0]], [[0.0]], [[8.0]], [[1.0]])
    # momentum 1, displacement 1: 1/2 (1/2 + 8)
    assert energy(mech, [1.0, 1.0]) == pytest.approx(4.25, abs=1e-15)


def test_energy_of_velocity_coordinates():
    # descriptor mechanical form (p~, q) with E = diag(M, I), Q = diag(I, K)
    M, K = 2.0, 8.0
    sys = PHSystem([[0.0, -1.0], [1.0, 0.0]], np.zeros((2, 2)), np.diag([1.0, K]), [[1.0], [0.0]],
                   E=np.diag([M, 1.0]))
    # 1/2 p~^T M p~ + 1/2 q^T K q with p~ = 1, q = 1
    assert energy(sys, [1.0, 1.0]) == pytest.approx(0.5 * (M + K))


def test_energy_gradient_matches_differences(rng):
    sys = random_ph(rng, 4, 2)
    x = rng.standard_normal(4)
    _, g = energy(sys, x, grad=True)
    h = 1e-6
    fd = np.array([(energy(sys, x + h * e) - energy(sys, x - h * e)) / (2 * h) for e in np.eye(4)])
    assert np.allclose(g, fd, atol=1e-7)


def test_output_examples():
    sys = PHSystem(np.zeros((3, 3)), np.zeros((3, 3)), np.eye(3), np.eye(3)[:, :1])
    assert output(sys, [0.3, -1.0, 2.0]) == pytest.approx([0.3])
    assert output(sys, np.zeros(3)) == pytest.approx([0.0])
    # collocated mechanical output with B~ = I, M = I, K = I gives y = p~
    mech = PHSystem([[0, -1], [1, 0]], np.zeros((2, 2)), np.eye(2), [[1.0], [0.0]], E=np.eye(2))
    assert output(mech, [0.7, -0.4]) == pytest.approx([0.7])


def test_power_rates(rng):
    sys = PHSystem(np.zeros((2, 2)), np.zeros((2, 2)), np.eye(2), np.eye(2))
    led = power_rates(sys, [1.0, 2.0], [0.0, 0.0])
    assert led.dissipated_rate == 0.0 and led.supplied_rate == 0.0
    sys = random_ph(rng, 3, 2)
    x, u = rng.standard_normal(3), rng.standard_normal(2)
    led = power_rates(sys, x, u)
    assert led.dissipated_rate >= 0.0
    assert led.supplied_rate == pytest.approx(output(sys, x) @ u)


def test_power_balance_along_trajectory(rng):
    sys = random_ph(rng, 3, 1)
    cfg = ScenarioConfig(sys, LinearQuadraticCost.supplied_energy(1), rng.standard_normal(3), 0.5,
                         1e-3, control=lambda t: np.array([np.cos(5 * t)]))
    tr = integrate_closed_loop(cfg)
    dE = np.gradient(tr.energy, tr.times)
    k = slice(5, -5)
    rate = (tr.supply_rate - tr.dissipation_rate)[k]
    assert np.max(np.abs(dE[k] - rate)) <= 1e-4 * (1.0 + np.max(np.abs(rate)))


def test_J_term_does_not_change_energy(rng):
    sys = random_ph(rng, 5, 2)
    for _ in range(10):
        x = rng.standard_normal(5)
        e = sys.Q @ x
        assert abs(e @ sys.J_at(x) @ e) <= 1e-12 * (1 + e @ e) * np.abs(sys.J_at(x)).max()


def test_linear_quadratic_cost_validation():
    with pytest.raises(StructureError, match="symmetric"):
        LinearQuadraticCost([[1.0, 1.0], [0.0, 1.0]], np.eye(2), np.zeros(2))
    with pytest.raises(StructureError, match="positive"):
        LinearQuadraticCost([[-1.0]], [[0.0]], [0.0])
    with pytest.raises(StructureError):
        LinearQuadraticCost(np.eye(2), np.eye(3), np.zeros(2))
    assert LinearQuadraticCost.supplied_energy(2).is_supplied_energy


def test_affine_form_of_linear_cost(rng):
    sys = random_ph(rng, 4, 2)
    cost = LinearQuadraticCost(np.array([[2.0, 0.5], [0.5, 1.0]]), rng.standard_normal((2, 2)),
                               rng.standard_normal(2))
    c = affine_cost(sys, cost)
    x, u = rng.standard_normal(4), rng.standard_normal(2)
    y = output(sys, x)
    direct = y @ cost.Y @ y + y @ cost.N @ u + cost.l @ u
    assert c.running(x) + c.weights_at(x) @ u == pytest.approx(direct)


def test_supplied_energy_cost_nonlinear_weights_are_outputs():
    G = lambda x: np.array([[1.0 + x[1] ** 2], [0.0]])
    sys = PHSystem([[0, -1], [1, 0]], np.zeros((2, 2)), np.diag([1.0, 2.0]), G)
    c = supplied_energy_cost(sys)
    x = np.array([0.3, -0.7])
    assert c.weights_at(x) == pytest.approx(output(sys, x))
    fd = np.array([(c.weights_at(x + 1e-6 * e) - c.weights_at(x - 1e-6 * e)) / 2e-6 for e in np.eye(2)]).T
    assert np.allclose(c.jac(x), fd, atol=1e-8)


def test_missing_derivatives_without_fd_raise():
    c = NonlinearAffineCost(lambda x: float(x @ x), lambda x: x[:1], allow_fd=False)
    with pytest.raises(ConfigurationError):
        c.grad0(np.zeros(2))
    c = NonlinearAffineCost(lambda x: float(x @ x), lambda x: x[:1])
    assert c.grad0(np.array([1.0, 2.0])) == pytest.approx([2.0, 4.0], abs=1e-6)


def test_dissipation_rate_is_nonnegative_loss(rng):
    sys = random_ph(rng, 4, 1)
    for _ in range(5):
        assert dissipation_rate(sys, rng.standard_normal(4)) >= 0.0
