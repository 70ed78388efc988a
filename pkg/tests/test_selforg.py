from __future__ import annotations

import numpy as np
import pytest

from fcmarket import (
    HorizonPolicy,
    InsufficientHistoryError,
    MarketState,
    Population,
    SelfOrgPolicy,
    ValidationError,
    population_flow_step,
    rolling_variance,
)

H = HorizonPolicy.single(10)


def policy(**kw):
    base = dict(theta_in=4.0, theta_out=1.0, flow_rate=1, n_min=20, n_max=200)
    base.update(kw)
    return SelfOrgPolicy(**base)


class TestRollingVariance:
    def test_constant(self):
        assert rolling_variance(MarketState.warm(100.0, 30), 20) == 0.0

    def test_two_points(self):
        assert rolling_variance(MarketState(5, [7.0, 1.0, 3.0]), 2) == 2.0

    def test_two_pass_oracle(self, rng):
        xs = rng.normal(100, 5, 80)
        s = MarketState(100, list(xs))
        w = xs[-50:]
        m = w.sum() / 50
        assert rolling_variance(s, 50) == pytest.approx(((w - m) ** 2).sum() / 49, rel=1e-12)

    def test_insufficient(self):
        with pytest.raises(InsufficientHistoryError):
            rolling_variance(MarketState(5, [1.0, 2.0]), 3)


class TestFlow:
    def test_dead_band(self, rng):
        pop = Population.from_counts(10, 40, H)
        new = population_flow_step(pop, 2.0, policy(), rng)
        assert new.N == 50 and np.array_equal(new.strategies, pop.strategies)

    def test_entry(self, rng):
        assert population_flow_step(Population.from_counts(10, 40, H), 5.0, policy(), rng).N == 51

    def test_exit(self, rng):
        new = population_flow_step(Population.from_counts(10, 40, H), 0.5, policy(), rng)
        assert new.N == 49
        new.check()

    def test_saturation(self, rng):
        top = Population.from_counts(0, 200, H)
        assert population_flow_step(top, 50.0, policy(), rng).N == 200
        bottom = Population.from_counts(0, 20, H)
        assert population_flow_step(bottom, 0.0, policy(), rng).N == 20

    def test_flow_rate_clipped_at_bound(self, rng):
        pop = Population.from_counts(0, 198, H)
        assert population_flow_step(pop, 50.0, policy(flow_rate=5), rng).N == 200

    def test_fundamentalist_entrants_consume_no_draws(self):
        g1, g2 = np.random.Generator(np.random.PCG64(4)), np.random.Generator(np.random.PCG64(4))
        new = population_flow_step(Population.from_counts(30, 20, H), 9.0,
                                   policy(flow_rate=3, entrant_strategy="fundamentalist"), g1)
        assert new.N_c == 30 and new.N == 53
        assert g1.random() == g2.random()

    def test_proportional_entrants(self):
        rng = np.random.Generator(np.random.PCG64(0))
        pop = Population.from_counts(30, 70, H)
        new = population_flow_step(pop, 9.0, policy(flow_rate=100, n_max=10_000), rng)
        added = new.N_c - 30
        assert 15 <= added <= 45

    def test_heterogeneous_entrants_get_horizons(self, rng):
        hp = HorizonPolicy.mixed([5, 10, 20])
        pop = Population.create(50, hp, rng)
        new = population_flow_step(pop, 9.0, policy(flow_rate=60), rng, hp)
        assert set(new.horizon_index[50:].tolist()) == {0, 1, 2}

    def test_removal_is_uniform(self):
        rng = np.random.Generator(np.random.PCG64(8))
        hits = np.zeros(2)
        for _ in range(4000):
            pop = Population.from_counts(1, 49, H)
            new = population_flow_step(pop, 0.1, policy(), rng)
            hits[new.N_c] += 1
        # the lone chartist leaves with probability 1/50
        assert hits[0] / hits.sum() == pytest.approx(1 / 50, abs=0.01)

    def test_bounds_and_monotone_response(self, rng):
        p = policy(flow_rate=3)
        for _ in range(300):
            n = int(rng.integers(20, 201))
            pop = Population.from_counts(int(rng.integers(0, n + 1)), 0, H)
            pop = Population.from_counts(pop.N_c, n - pop.N_c, H)
            sig = rng.uniform(0, 10)
            lo = population_flow_step(pop, sig, p, np.random.Generator(np.random.PCG64(1)))
            hi = population_flow_step(pop, sig + rng.uniform(0, 5), p, np.random.Generator(np.random.PCG64(1)))
            assert 20 <= lo.N <= 200 and 20 <= hi.N <= 200
            assert hi.N >= lo.N


class TestPolicyValidation:
    def test_hysteresis(self):
        with pytest.raises(ValidationError) as exc:
            SelfOrgPolicy(theta_in=1.0, theta_out=2.0)
        assert exc.value.field == "theta_out"
        assert "hysteresis" in str(exc.value)

    @pytest.mark.parametrize("kw", [dict(window_T=1), dict(flow_rate=0), dict(n_min=0), dict(n_min=50, n_max=50),
                                    dict(entrant_strategy="chartist"), dict(theta_in=0.0, theta_out=0.0)])
    def test_rejects(self, kw):
        with pytest.raises(ValidationError):
            SelfOrgPolicy(**kw)
