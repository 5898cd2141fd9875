import numpy as np
import pytest

from pnsreg.geom import Subsphere, lift_dimension


def random_unit(rng, m):
    v = rng.normal(size=m + 1)
    return v / np.linalg.norm(v)


def tangent_noise(rng, X, sigma):
    """Move each row of ``X`` along a random tangent vector with N(0, sigma^2)
    components (exponential map)."""
    Z = rng.normal(0.0, sigma, size=X.shape)
    Z -= np.sum(Z * X, axis=1, keepdims=True) * X
    t = np.linalg.norm(Z, axis=1, keepdims=True)
    safe = np.where(t > 0, t, 1.0)
    return np.cos(t) * X + np.sin(t) * Z / safe


def sample_subsphere(rng, axis, angle, n, sigma=0.0):
    """``n`` points spread uniformly over ``{x : d(x, axis) = angle}``."""
    m = axis.size - 1
    U = rng.normal(size=(n, m))
    U /= np.linalg.norm(U, axis=1, keepdims=True)
    X = lift_dimension(U, Subsphere(axis, angle))
    return tangent_noise(rng, X, sigma) if sigma > 0 else X


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


# one line per acceptance criterion, echoed at the end of the run
ACCEPTANCE = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE, key=lambda ln: int(ln.split()[2].rstrip(':'))):
            terminalreporter.write_line(line)
