import math

import numpy as np
import pytest

from mtfcost.core.popularity import BetaLaw, DiracLaw, GammaLaw, ParetoLaw, RequestProfile


@pytest.fixture
def rng():
    return np.random.default_rng(42)


@pytest.fixture
def exp_law():
    return GammaLaw(1.0)


@pytest.fixture
def pareto_law():
    return ParetoLaw(-0.5)


@pytest.fixture
def beta_law():
    return BetaLaw(1.0, 2.0)


@pytest.fixture
def dirac_law():
    return DiracLaw(1.0)


@pytest.fixture
def small_profile():
    """Four items with popularities 0.1, 0.2, 0.3, 0.4 in index order."""
    return RequestProfile(weights=np.array([1.0, 2.0, 3.0, 4.0]))


@pytest.fixture
def ln2():
    return math.log(2.0)
