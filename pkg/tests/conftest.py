import numpy as np
import pytest

from qclab.bodies import Ellipsoid, LinearImage, LpBall, Scaled


@pytest.fixture
def gen():
    return np.random.default_rng(20240517)


def sample_bodies(n=4):
    """A spread of concrete bodies used by the property tests."""
    rot = np.linalg.qr(np.random.default_rng(3).standard_normal((n, n)))[0]
    return [
        LpBall(n, 0.25),
        LpBall(n, 0.5),
        LpBall(n, 1.0),
        LpBall(n, 1.5),
        LpBall(n, 2.0),
        LpBall(n, 5.0),
        Ellipsoid.from_diag(np.arange(1, n + 1)),
        Scaled(LpBall(n, 0.5), 3.0),
        LinearImage(LpBall(n, 1.0), rot @ np.diag(np.linspace(0.5, 2, n))),
    ]


# acceptance criteria outcomes, printed one per line at the end of the run
ACCEPTANCE_LINES = []


@pytest.fixture
def acceptance():
    def record(criterion, passed, detail):
        ACCEPTANCE_LINES.append(f"[{'PASS' if passed else 'FAIL'}] {criterion}: {detail}")
        return passed
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
