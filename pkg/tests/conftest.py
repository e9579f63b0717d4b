import math

import numpy as np
import pytest

from netident.dgp import logistic_fixture
from netident.oracle import Oracle
from netident.recovery import recover_model

LN3 = math.log(3.0)
IQR = 2.0 * LN3


def logistic_normalized_cdf(t):
    """Normalized logistic CDF with quartiles at 0 and 1."""
    return 1.0 / (1.0 + np.exp(-(IQR * np.asarray(t) - LN3)))


@pytest.fixture(scope="session")
def logistic_dgp():
    return logistic_fixture(covariates=(0.0, 1.0, 2.0))


@pytest.fixture(scope="session")
def logistic_model(logistic_dgp):
    oracle = Oracle(logistic_dgp)
    return oracle, recover_model(oracle, L=10, M=4)


@pytest.fixture(scope="session")
def small_model(logistic_dgp):
    oracle = Oracle(logistic_dgp)
    return oracle, recover_model(oracle, L=6, M=3)
