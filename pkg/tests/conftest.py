import numpy as np
import pytest

from quotasim.model import AllocationProblem


@pytest.fixture
def rng():
    return np.random.default_rng(20240811)


def random_problem(rng, n, q_total_fraction=None, min_psi=0.0, min_demand=0.0):
    """Random instance following the default scenario distributions."""
    psi = rng.uniform(min_psi, 1.0, n)
    cost = np.maximum(np.abs(rng.normal(psi, np.maximum(psi, 1e-3))), 1e-6)
    demand = rng.uniform(min_demand, 1.0, n)
    qos = max(1e-3 * psi.sum(), 1e-6)
    frac = q_total_fraction if q_total_fraction is not None else rng.uniform(0.4, 0.95)
    return AllocationProblem.from_arrays(
        psi=psi, cost=cost, demand=demand,
        q_total=frac * demand.sum(), qos=qos,
    )
