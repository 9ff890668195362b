"""Shared fixtures: one simulated dataset and its fit, reused across modules."""

import numpy as np
import pytest

from qlbs import ParamVector, RngStream, fit, simulate_dataset

TRUE_DELTA = ParamVector(beta=np.array([1.0, -1.0]),
                         rho=np.array([np.log(0.25), 0.5]))


@pytest.fixture(scope="session")
def sim_data():
    """(spec, t) from the true model at tau=0.5, n=150, fixed seed."""
    spec, t = simulate_dataset(150, 0.5, TRUE_DELTA, RngStream(42))
    return spec, t


@pytest.fixture(scope="session")
def sim_fit(sim_data):
    spec, t = sim_data
    result = fit(spec, t)
    assert result.converged
    return result
