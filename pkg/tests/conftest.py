import numpy as np
import pytest

from switchstab.model import SwitchedLinearSystem, validate

PI2 = [[-1.0, 1.0], [1.0, -1.0]]

_acceptance_lines = []


def record_acceptance(number, ok, detail):
    line = f"ACCEPTANCE #{number}: {'PASS' if ok else 'FAIL'} - {detail}"
    _acceptance_lines.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if _acceptance_lines:
        terminalreporter.section("acceptance criteria")
        for line in _acceptance_lines:
            terminalreporter.write_line(line)


def make_system(A, d, Pi=PI2):
    return validate(SwitchedLinearSystem.from_arrays(A, d, Pi))


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


def random_system(rng, n, m, d_max=1.0, shift=(0.0, 1.5), zero_dwell=False):
    """Random validated system; off-diagonal rates in [0.1, 2], some zeroed."""
    A = [0.8 * rng.standard_normal((n, n)) - rng.uniform(*shift) * np.eye(n) for _ in range(m)]
    Pi = rng.uniform(0.1, 2.0, size=(m, m))
    if m > 2:
        Pi[rng.random((m, m)) < 0.25] = 0.0
    np.fill_diagonal(Pi, 0.0)
    for i in range(m):
        if Pi[i].sum() == 0.0:
            Pi[i, (i + 1) % m] = 1.0
    np.fill_diagonal(Pi, -Pi.sum(axis=1))
    d = np.zeros(m) if zero_dwell else rng.uniform(0.0, d_max, size=m)
    return validate(SwitchedLinearSystem.from_arrays(A, d, Pi))
