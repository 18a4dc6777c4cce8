import numpy as np
import pytest

from phsingular.ph_core import LinearQuadraticCost, PHSystem


def random_skew(rng, n):
    S = rng.standard_normal((n, n))
    return S - S.T


def random_psd(rng, n, rank=None, shift=0.0):
    k = n if rank is None else rank
    F = rng.standard_normal((n, k))
    return F @ F.T / max(k, 1) + shift * np.eye(n)


def random_ph(rng, n, m, r_shift=0.0, r_rank=None, q_shift=0.5):
    J = random_skew(rng, n)
    R = random_psd(rng, n, r_rank, r_shift)
    Q = random_psd(rng, n, shift=q_shift)
    G = rng.standard_normal((n, m))
    return PHSystem(J, R, Q, G)


def random_cost(rng, m, kind="general"):
    if kind == "supplied":
        return LinearQuadraticCost.supplied_energy(m)
    if kind == "zero_N":
        return LinearQuadraticCost(random_psd(rng, m), np.zeros((m, m)), rng.standard_normal(m))
    N = rng.standard_normal((m, m))
    if kind == "symmetric_goh":
        N = np.eye(m) * 0.7
    return LinearQuadraticCost(random_psd(rng, m), N, rng.standard_normal(m))


def random_descriptor(rng, n1, n2, m, q21=True):
    """Index-one block descriptor system: R22 and Q22 definite make the pivot invertible."""
    from phsingular.descriptor import DescriptorPHSystem
    n = n1 + n2
    J = random_skew(rng, n)
    R = random_psd(rng, n)
    R[n1:, n1:] += np.eye(n2)
    Q = np.zeros((n, n))
    Q[:n1, :n1] = random_psd(rng, n1, shift=0.5)
    Q[n1:, n1:] = random_psd(rng, n2, shift=0.5)
    if q21:
        Q[n1:, :n1] = 0.5 * rng.standard_normal((n2, n1))
    return DescriptorPHSystem(J, R, Q, rng.standard_normal((n1, m)), n1)


def instance_family(count, seed=2024, dims=((2, 1), (4, 2), (6, 3), (4, 1), (6, 2))):
    """Deterministic list of (system, rng) pairs cycling through (n, m)."""
    rng = np.random.default_rng(seed)
    out = []
    for k in range(count):
        n, m = dims[k % len(dims)]
        out.append(random_ph(rng, n, m))
    return out, rng


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES: dict[int, str] = {}


def record_criterion(number: int, title: str, passed: bool, detail: str) -> None:
    line = f"CRITERION {number:2d} {'PASS' if passed else 'FAIL'}  {title}: {detail}"
    ACCEPTANCE_LINES[number] = line
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])
