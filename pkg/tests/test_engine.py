from __future__ import annotations

import numpy as np
import pytest

from fcmarket import (
    HorizonPolicy,
    ModelParams,
    NumericOverflowError,
    SelfOrgPolicy,
    SimConfig,
    ValidationError,
    derive_seeds,
    run_ensemble,
    run_simulation,
)
from fcmarket.engine import RunFailure, seeded
from fcmarket.presets import PRESET_NAMES, UnknownPresetError, preset, preset_members

BACKEND_CASES = {
    "reference": SimConfig(n_initial=60, steps=3000, seed=1, variance_window=20),
    "mixed_horizons": SimConfig(ModelParams(m_policy=HorizonPolicy.mixed([5, 10, 20], [0.5, 0.3, 0.2])),
                                n_initial=40, steps=3000, seed=2, initial_chartist_fraction=0.5),
    "floor_and_records": SimConfig(ModelParams(price_floor=95.0, b=1.9), n_initial=30, steps=3000, seed=3,
                                   burn_in=100, record_every=7),
    "selforg": SimConfig(ModelParams(m_policy=HorizonPolicy.mixed([5, 10])), n_initial=25, steps=4000, seed=4,
                         selforg=SelfOrgPolicy(theta_in=3.0, theta_out=1.5, n_min=20, n_max=60, flow_rate=2)),
    "selforg_fundamentalist_entry": SimConfig(n_initial=30, steps=3000, seed=5,
                                              selforg=SelfOrgPolicy(theta_in=2.0, theta_out=1.0, n_min=20, n_max=80,
                                                                    entrant_strategy="fundamentalist")),
}


@pytest.mark.parametrize("name", sorted(BACKEND_CASES))
def test_backends_bit_identical(name):
    cfg = BACKEND_CASES[name]
    a = run_simulation(cfg, "python")
    b = run_simulation(cfg, "compiled")
    assert len(a) == cfg.n_records
    assert a.equals(b)


def test_selforg_case_moves_N():
    out = run_simulation(BACKEND_CASES["selforg"])
    assert out.n.min() < out.n.max()


def test_same_seed_identical_and_distinct_seeds_differ():
    cfg = SimConfig(n_initial=200, steps=20_000, seed=9)
    assert run_simulation(cfg).equals(run_simulation(cfg))
    outs = [run_simulation(c) for c in seeded(cfg, 10)]
    rets = {o.ret.tobytes() for o in outs}
    assert len(rets) == 10


def test_conservation_and_step_column():
    cfg = SimConfig(n_initial=300, steps=10_000, burn_in=1_000, record_every=10, seed=4, variance_window=15)
    out = run_simulation(cfg)
    assert np.array_equal(out.n_c + out.n_f, out.n)
    assert out.step[0] == 1_010 and out.step[-1] == 10_000
    assert np.all(np.diff(out.step) == 10)
    assert np.all(out.rolling_variance >= 0)


def test_record_ret_is_price_difference():
    out = run_simulation(SimConfig(n_initial=50, steps=5000, seed=6))
    assert np.allclose(np.diff(out.price), out.ret[1:], rtol=0, atol=1e-9)


def test_rolling_variance_nan_when_off():
    out = run_simulation(SimConfig(n_initial=50, steps=100, seed=6))
    assert np.all(np.isnan(out.rolling_variance))


def test_deterministic_fixed_point():
    p = ModelParams(sigma=0.0, r=0.0, exp_coupling=False, gamma=0.05)
    out = run_simulation(SimConfig(p, n_initial=50, steps=500, seed=1))
    # flat start at p_f: nothing moves
    assert np.all(out.price == 100.0) and np.all(out.n_c == 0)


def test_deterministic_convergence_from_offset():
    # start away from p_f by shifting the fundamental price
    from fcmarket import MarketState, price_step

    p = ModelParams(sigma=0.0, r=0.0, exp_coupling=False, gamma=0.05, p_f=90.0)
    s = MarketState.warm(100.0, 10)
    dist = []
    for _ in range(300):
        s.push(price_step(s, p, 0.0, 1.0, 0.0))
        dist.append(s.current - 90.0)
    assert all(b < a for a, b in zip(dist, dist[1:])) and dist[-1] < 1e-5


def test_overflow_flagged_in_both_backends():
    p = ModelParams(b=50.0, B=0.9, delta=-0.9, exp_coupling=True)
    cfg = SimConfig(p, n_initial=20, steps=5000, seed=1, initial_chartist_fraction=1.0)
    a, b = run_simulation(cfg, "python"), run_simulation(cfg, "compiled")
    assert a.aborted and b.aborted and a.equals(b)
    assert len(a) < cfg.n_records
    with pytest.raises(NumericOverflowError):
        a.check()


class TestConfigValidation:
    @pytest.mark.parametrize("kw,field", [
        (dict(n_initial=0), "n_initial"), (dict(steps=0), "steps"), (dict(seed=-1), "seed"),
        (dict(record_every=0), "record_every"), (dict(steps=10, burn_in=10), "burn_in"),
        (dict(initial_chartist_fraction=1.5), "initial_chartist_fraction"), (dict(variance_window=1), "variance_window"),
        (dict(n_initial=5, selforg=SelfOrgPolicy()), "n_initial"),
        (dict(variance_window=10, selforg=SelfOrgPolicy()), "variance_window"),
    ])
    def test_rejects(self, kw, field):
        with pytest.raises(ValidationError) as exc:
            SimConfig(**kw)
        assert exc.value.field == field

    def test_unknown_backend(self):
        with pytest.raises(ValueError):
            run_simulation(SimConfig(steps=10), "gpu")


class TestEnsemble:
    def test_parallel_matches_serial(self):
        cfgs = seeded(SimConfig(n_initial=100, steps=5000, variance_window=20), 8, master_seed=3)
        serial = run_ensemble(cfgs, max_parallel=1)
        parallel = run_ensemble(cfgs, max_parallel=8)
        assert all(a.equals(b) for a, b in zip(serial, parallel))
        assert [o.seed for o in parallel] == [c.seed for c in cfgs]

    def test_failures_collected(self):
        good = SimConfig(n_initial=10, steps=100)
        res = run_ensemble([good, good], backend="nope")
        assert all(isinstance(r, RunFailure) and "backend" in r.error for r in res)

    def test_empty(self):
        with pytest.raises(ValueError):
            run_ensemble([])


def test_derive_seeds():
    s = derive_seeds(42, 5)
    assert s == derive_seeds(42, 5) and len(set(s)) == 5
    assert derive_seeds(42, 8)[:5] == s
    assert all(0 <= v < 2**64 for v in s)


class TestPresets:
    def test_fig1(self):
        cfgs = preset("fig1_dist")
        assert [c.n_initial for c in cfgs] == [50, 500, 5000]
        assert len({c.params for c in cfgs}) == 1

    def test_fig5(self):
        cfgs = preset("fig5_selforg")
        assert [c.n_initial for c in cfgs] == [50, 5000]
        assert all(c.selforg is not None for c in cfgs)

    def test_fig3_has_mixed_member(self):
        members = dict(preset_members("fig3_sf"))
        assert members["mixed_N500"].params.m_policy.horizons == (5, 10, 20)
        assert members["single_N500"].params.m_policy.horizons == (10,)
        assert members["single_N500"].params.b == members["mixed_N500"].params.b

    @pytest.mark.parametrize("name", PRESET_NAMES)
    def test_all_share_reference_params(self, name):
        ref = ModelParams()
        for c in preset(name):
            assert c.params.b == ref.b and c.params.delta == ref.delta

    def test_unknown(self):
        with pytest.raises(UnknownPresetError):
            preset("fig9")
