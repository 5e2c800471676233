import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from quotasim.game import (
    StrategyProfile,
    check_ne_conditions,
    deviation_sweep,
    nash_demands,
    welfare_bound,
)
from quotasim.itf import allocate_itf
from quotasim.metrics import welfare
from quotasim.model import AllocationProblem


class TestNashDemands:
    def test_symmetric(self):
        p = nash_demands(np.array([1.0, 1.0]), np.array([1.0, 1.0]), 1.0, 10.0)
        assert np.allclose(p.demands, [5, 5])

    def test_weighted(self):
        p = nash_demands(np.array([2.0, 1.0]), np.array([1.0, 1.0]), 1.0, 10.0)
        assert np.allclose(p.demands, [20 / 3, 10 / 3])
        # both players sit at the same combined level
        h = p.demands * (1 + 1.0 / 1.0) / np.array([2.0, 1.0])
        assert h[0] == pytest.approx(h[1], abs=1e-12)
        assert h[0] == pytest.approx(20 / 3, abs=1e-12)

    def test_zero_weight_player(self):
        p = nash_demands(np.array([1.0, 0.0]), np.array([1.0, 1.0]), 1.0, 10.0)
        assert np.allclose(p.demands, [10, 0])

    def test_all_zero_contribution_rejected(self):
        with pytest.raises(ValueError):
            nash_demands(np.array([0.0, 0.0]), np.array([1.0, 1.0]), 1.0, 10.0)

    def test_homogeneous_in_q_total(self):
        psi = np.array([0.3, 0.9, 0.5])
        cost = np.array([0.2, 0.5, 1.0])
        a = nash_demands(psi, cost, 0.7, 4.0).demands
        b = nash_demands(psi, cost, 0.7, 8.0).demands
        assert np.allclose(b, 2 * a, atol=1e-12)

    @given(seed=st.integers(0, 2**32 - 1))
    @settings(max_examples=200, deadline=None)
    def test_equilibrium_conditions_hold(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(1, 30))
        psi = rng.uniform(0.01, 1, n)
        cost = rng.uniform(0.0, 3, n)
        qos = float(rng.uniform(0.001, 2))
        q_total = float(rng.uniform(0.1, 50))
        profile = nash_demands(psi, cost, qos, q_total)
        diag = check_ne_conditions(profile, psi, cost, qos, q_total, tol=1e-9)
        assert diag.satisfied, diag


class TestCheckConditions:
    def test_perturbation_breaks_total(self):
        psi = np.array([2.0, 1.0])
        cost = np.array([1.0, 1.0])
        profile = nash_demands(psi, cost, 1.0, 10.0)
        bumped = StrategyProfile(demands=profile.demands + np.array([0.01, 0.0]))
        diag = check_ne_conditions(bumped, psi, cost, 1.0, 10.0)
        assert not diag.satisfied
        assert diag.total_residual == pytest.approx(0.01, abs=1e-9)

    def test_uniform_profile_breaks_levels(self):
        psi = np.array([2.0, 1.0])
        cost = np.array([1.0, 1.0])
        uniform = StrategyProfile(demands=np.array([5.0, 5.0]))
        diag = check_ne_conditions(uniform, psi, cost, 1.0, 10.0)
        assert not diag.satisfied
        assert diag.level_spread > 1.0

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            check_ne_conditions(
                StrategyProfile(demands=np.array([1.0])),
                np.array([1.0, 1.0]), np.array([1.0, 1.0]), 1.0, 2.0,
            )


class TestWelfareBound:
    def test_direct_value(self):
        assert welfare_bound(
            np.array([2.0, 1.0]), np.array([1.0, 1.0]), 1.0
        ) == pytest.approx(3 * np.log(2), abs=1e-12)

    def test_zero_contribution_vector(self):
        assert welfare_bound(np.array([0.0, 0.0]), np.array([1.0, 1.0]), 1.0) == 0.0

    def test_zero_cost_rejected(self):
        with pytest.raises(ValueError):
            welfare_bound(np.array([1.0]), np.array([0.0]), 1.0)

    def test_equals_welfare_at_equilibrium(self, rng):
        for _ in range(30):
            n = int(rng.integers(1, 40))
            psi = rng.uniform(0.01, 1, n)
            cost = rng.uniform(0.01, 3, n)
            qos = float(rng.uniform(0.001, 2))
            q_total = float(rng.uniform(0.5, 40))
            profile = nash_demands(psi, cost, qos, q_total)
            problem = AllocationProblem.from_arrays(
                psi=psi, cost=cost, demand=profile.demands,
                q_total=q_total, qos=qos,
            )
            w = welfare(allocate_itf(problem), problem)
            bound = welfare_bound(psi, cost, qos)
            assert w == pytest.approx(bound, rel=1e-12)


class TestDeviationSweep:
    def setup_method(self):
        rng = np.random.default_rng(41)
        self.n = 12
        self.psi = rng.uniform(0.05, 1, self.n)
        self.cost = np.maximum(np.abs(rng.normal(self.psi, self.psi)), 1e-6)
        self.qos = float(1e-3 * self.psi.sum())
        self.q_total = 4.0
        self.profile = nash_demands(self.psi, self.cost, self.qos, self.q_total)

    def test_no_profitable_deviation_at_equilibrium(self):
        for player in range(self.n):
            gain = deviation_sweep(
                player, self.profile, self.psi, self.cost, self.qos, self.q_total
            )
            assert gain <= 1e-9

    def test_multiplier_one_gain_is_exactly_zero(self):
        gain = deviation_sweep(
            0, self.profile, self.psi, self.cost, self.qos, self.q_total,
            grid=np.array([1.0]),
        )
        assert gain == 0.0

    def test_uniform_profile_is_not_an_equilibrium(self):
        # over-declared uniform demands leave someone partially satisfied,
        # and that player profits from scaling their declaration down
        uniform = StrategyProfile(
            demands=np.full(self.n, 2 * self.q_total / self.n)
        )
        gains = [
            deviation_sweep(
                player, uniform, self.psi, self.cost, self.qos, self.q_total
            )
            for player in range(self.n)
        ]
        assert max(gains) > 1e-6

    def test_budget_exact_uniform_profile_is_utility_indifferent(self):
        # with demands summing exactly to the budget everyone stays fully
        # satisfied under any unilateral rescaling, so the payoff never
        # strictly improves even though the common-level condition fails
        uniform = StrategyProfile(
            demands=np.full(self.n, self.q_total / self.n)
        )
        diag = check_ne_conditions(
            uniform, self.psi, self.cost, self.qos, self.q_total
        )
        assert not diag.satisfied
        gains = [
            deviation_sweep(
                player, uniform, self.psi, self.cost, self.qos, self.q_total
            )
            for player in range(self.n)
        ]
        assert max(gains) <= 1e-9

    def test_matches_full_allocator_rerun(self):
        # the vectorized sweep must agree with literally re-running the
        # allocator on each perturbed demand vector
        rng = np.random.default_rng(17)
        base = rng.uniform(0.05, 1.0, self.n)
        profile = StrategyProfile(demands=base)
        grid = np.array([0.25, 0.8, 1.0, 1.3, 2.0])
        for player in (0, 5, 11):
            gain = deviation_sweep(
                player, profile, self.psi, self.cost, self.qos, self.q_total,
                grid=grid,
            )
            utilities = []
            for m in np.concatenate([[1.0], grid]):
                demands = base.copy()
                demands[player] = m * base[player]
                problem = AllocationProblem.from_arrays(
                    psi=self.psi, cost=self.cost, demand=demands,
                    q_total=self.q_total, qos=self.qos,
                )
                q = allocate_itf(problem).quotas[player]
                utilities.append(
                    float(np.log1p(self.qos * q / (self.cost[player] * demands[player])))
                )
            expected = max(utilities[1:]) - utilities[0]
            assert gain == pytest.approx(expected, abs=1e-10)

    def test_zero_weight_player_gains_nothing(self):
        psi = self.psi.copy()
        psi[3] = 0.0
        profile = nash_demands(psi, self.cost, self.qos, self.q_total)
        assert deviation_sweep(
            3, profile, psi, self.cost, self.qos, self.q_total
        ) == 0.0

    def test_invalid_grid_rejected(self):
        with pytest.raises(ValueError):
            deviation_sweep(
                0, self.profile, self.psi, self.cost, self.qos, self.q_total,
                grid=np.array([0.0, 1.0]),
            )

    def test_player_index_checked(self):
        with pytest.raises(IndexError):
            deviation_sweep(
                99, self.profile, self.psi, self.cost, self.qos, self.q_total
            )


class TestParetoAtEquilibrium:
    def test_full_budget_and_full_satisfaction(self, rng):
        # at equilibrium everyone is granted exactly their declaration and
        # the budget is exhausted, so raising anyone means taking from others
        psi = rng.uniform(0.05, 1, 20)
        cost = rng.uniform(0.05, 2, 20)
        qos = 0.05
        q_total = 7.0
        profile = nash_demands(psi, cost, qos, q_total)
        problem = AllocationProblem.from_arrays(
            psi=psi, cost=cost, demand=profile.demands, q_total=q_total, qos=qos
        )
        q = allocate_itf(problem).quotas
        assert q.sum() == pytest.approx(q_total, rel=1e-12)
        assert np.allclose(q, profile.demands, atol=1e-12)
        for _ in range(50):
            alt = rng.uniform(0, 1, 20) * profile.demands
            alt *= q_total / alt.sum()
            alt = np.minimum(alt, profile.demands)
            better = alt > q + 1e-12
            if better.any():
                assert (alt < q - 1e-12).any()