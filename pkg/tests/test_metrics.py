import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from quotasim.idf import allocate_idf
from quotasim.metrics import (
    jain_closed_form,
    jain_index,
    over_provision_stats,
    utilities,
    welfare,
)
from quotasim.model import (
    Allocation,
    AllocationProblem,
    DegenerateInputWarning,
    RealizedDemand,
)

from conftest import random_problem


def problem_of(psi, cost, demand, q_total=10.0, qos=1.0):
    return AllocationProblem.from_arrays(
        psi=psi, cost=cost, demand=demand, q_total=q_total, qos=qos
    )


class TestUtilities:
    def test_zero_quota_zero_utility(self):
        problem = problem_of([1], [1], [1])
        u = utilities(Allocation(quotas=np.array([0.0])), problem).values
        assert u[0] == 0.0

    def test_full_satisfaction_log_two(self):
        problem = problem_of([1, 1], [1, 1], [0.4, 0.8])
        u = utilities(Allocation(quotas=np.array([0.4, 0.8])), problem).values
        assert np.allclose(u, np.log(2))

    def test_full_satisfaction_general(self, rng):
        # granted exactly the declaration, utility is log(1 + qos/cost)
        psi = rng.uniform(0.1, 1, 10)
        cost = rng.uniform(0.1, 2, 10)
        demand = rng.uniform(0.1, 1, 10)
        problem = problem_of(psi, cost, demand, qos=0.37)
        u = utilities(Allocation(quotas=demand.copy()), problem).values
        assert np.allclose(u, np.log1p(0.37 / cost))

    def test_zero_demand_user_convention(self):
        problem = problem_of([1, 1], [1, 1], [0.0, 0.5])
        u = utilities(Allocation(quotas=np.array([0.0, 0.2])), problem).values
        assert u[0] == 0.0
        assert u[1] > 0.0

    def test_nonnegative(self, rng):
        for _ in range(20):
            problem = random_problem(rng, 15)
            q = rng.uniform(0, 1, 15) * problem.demand
            assert (utilities(Allocation(quotas=q), problem).values >= 0).all()


class TestWelfare:
    def test_zero_allocation(self):
        problem = problem_of([1, 2], [1, 1], [1, 1])
        assert welfare(Allocation(quotas=np.zeros(2)), problem) == 0.0

    def test_weighted_sum(self):
        problem = problem_of([2, 1], [1, 1], [1, 1])
        w = welfare(Allocation(quotas=np.array([1.0, 1.0])), problem)
        assert w == pytest.approx(3 * np.log(2), abs=1e-12)

    def test_single_user_equals_utility(self):
        problem = problem_of([1], [0.5], [0.8], qos=0.3)
        alloc = Allocation(quotas=np.array([0.6]))
        assert welfare(alloc, problem) == pytest.approx(
            float(utilities(alloc, problem).values[0])
        )

    def test_monotone_in_each_quota(self, rng):
        problem = random_problem(rng, 10)
        q = 0.5 * problem.demand
        base = welfare(Allocation(quotas=q), problem)
        for i in range(10):
            bumped = q.copy()
            bumped[i] += 0.01
            assert welfare(Allocation(quotas=bumped), problem) >= base

    def test_small_argument_linearization(self):
        # deep in the log's linear regime the welfare tracks the weighted
        # linear form within a few percent
        psi = np.array([0.5, 0.8])
        cost = np.array([0.6, 0.9])
        demand = np.array([0.5, 0.7])
        problem = problem_of(psi, cost, demand, qos=1e-3)
        q = 0.7 * demand
        w = welfare(Allocation(quotas=q), problem)
        linear = float((psi * (1e-3 * q / (cost * demand))).sum())
        assert w == pytest.approx(linear, rel=0.05)


class TestJainIndex:
    def test_all_ratios_equal(self):
        problem = problem_of([1, 2, 4], [1, 1, 1], [0.6, 0.3, 0.9])
        q = 0.5 * problem.demand * problem.psi
        q = q / q.sum() * min(q.sum(), problem.q_total)
        x = q / (problem.demand * problem.psi)
        assert x.max() == pytest.approx(x.min())
        assert jain_index(Allocation(quotas=q), problem) == pytest.approx(1.0)

    def test_half_served(self):
        problem = problem_of([1, 1], [1, 1], [1, 1])
        q = np.array([1.0, 0.0])
        assert jain_index(Allocation(quotas=q), problem) == pytest.approx(0.5)

    def test_full_satisfaction_closed_form(self):
        psi = np.array([0.5, 0.25, 0.8])
        problem = problem_of(psi, np.ones(3), np.array([0.5, 0.5, 0.5]))
        q = problem.demand.copy()
        expected = (1 / psi).sum() ** 2 / (3 * ((1 / psi) ** 2).sum())
        assert jain_index(Allocation(quotas=q), problem) == pytest.approx(expected)

    def test_zero_weight_users_excluded(self):
        problem = problem_of([1, 0], [1, 1], [1, 1])
        q = np.array([0.5, 0.7])
        assert jain_index(Allocation(quotas=q), problem) == pytest.approx(1.0)

    def test_all_zero_ratios_flagged(self):
        problem = problem_of([1, 1], [1, 1], [1, 1])
        with pytest.warns(DegenerateInputWarning):
            assert jain_index(Allocation(quotas=np.zeros(2)), problem) == 1.0

    @given(lam=st.floats(0.1, 10), seed=st.integers(0, 2**32 - 1))
    @settings(max_examples=100, deadline=None)
    def test_scale_invariance(self, lam, seed):
        rng = np.random.default_rng(seed)
        psi = rng.uniform(0.05, 1, 8)
        demand = rng.uniform(0.05, 1, 8)
        problem = problem_of(psi, np.ones(8), demand, q_total=1e9)
        q = rng.uniform(0, 1, 8) * demand
        if (q == 0).all():
            return
        j1 = jain_index(Allocation(quotas=q), problem)
        j2 = jain_index(Allocation(quotas=lam * q), problem)
        assert j2 == pytest.approx(j1, abs=1e-12)


class TestJainClosedForm:
    def test_no_caps_is_perfectly_fair(self):
        assert jain_closed_form(0, 0.37, np.array([0.5, 0.2, 0.9])) == pytest.approx(1.0)

    def test_everyone_capped_equal_contribution(self):
        assert jain_closed_form(3, 0.0, np.array([0.5, 0.5, 0.5])) == pytest.approx(1.0)

    def test_hand_example(self):
        j = jain_closed_form(1, 0.45, np.array([5.0, 1.0]))
        expected = (0.2 + 0.45) ** 2 / (2 * (0.04 + 0.2025))
        assert j == pytest.approx(expected, abs=1e-12)
        assert j == pytest.approx(0.8711, abs=1e-4)

    def test_matches_direct_index_on_allocator_output(self, rng):
        from quotasim.idf import descending_psi_order, idf_water_level

        for _ in range(50):
            problem = random_problem(rng, 15, min_psi=1e-3, min_demand=1e-3)
            if problem.demand.sum() <= problem.q_total:
                continue
            k, h = idf_water_level(problem)
            order = descending_psi_order(problem.psi)
            direct = jain_index(allocate_idf(problem), problem)
            closed = jain_closed_form(k, h, problem.psi[order])
            assert direct == pytest.approx(closed, abs=1e-9)

    def test_k_out_of_range(self):
        with pytest.raises(ValueError):
            jain_closed_form(3, 0.5, np.array([1.0, 1.0]))

    def test_nonpositive_head_contribution(self):
        with pytest.raises(ValueError):
            jain_closed_form(1, 0.5, np.array([0.0, 1.0]))


class TestOverProvision:
    def test_no_over_provision(self):
        stats = over_provision_stats(
            Allocation(quotas=np.array([0.3, 0.4])),
            RealizedDemand(values=np.array([0.4, 0.4])),
        )
        assert stats.count == 0

    def test_simple_ratio(self):
        stats = over_provision_stats(
            Allocation(quotas=np.array([0.5])),
            RealizedDemand(values=np.array([0.4])),
        )
        assert stats.count == 1
        assert stats.ratios[0] == pytest.approx(1.25)

    def test_zero_realized_demand(self):
        stats = over_provision_stats(
            Allocation(quotas=np.array([0.1, 0.0])),
            RealizedDemand(values=np.array([0.0, 0.0])),
        )
        assert stats.count == 1
        assert np.isinf(stats.ratios[0])
        assert stats.ratios[1] == 1.0
