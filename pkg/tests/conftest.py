import sys

import numpy as np
import pytest

from doublerev.eigen import hardy_constant
from doublerev.geometry import Decomposition, constant_coefficient, make_annulus
from doublerev.radial import shoot_radial
from doublerev.solver import ProblemSpec


@pytest.fixture(scope="session")
def radial_n3_p4():
    return shoot_radial(3, 1.0, 2.0, 4.0)


@pytest.fixture(scope="session")
def breaking_setup():
    """N=4, (3,1), annulus(1,2), p = 2 + 1.2 * 2N/lambda1: the symmetry-breaking regime."""
    d = Decomposition(3, 1)
    lam = hardy_constant(4, 1.0, 2.0).lambda1
    p = 2.0 + 1.2 * 8.0 / lam
    spec = ProblemSpec(d, make_annulus(d, 1.0, 2.0), constant_coefficient(), p)
    return spec, shoot_radial(4, 1.0, 2.0, p), lam


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(results, key=lambda k: int(k[1:])):
        terminalreporter.write_line(results[key])
