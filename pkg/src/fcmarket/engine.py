"""Simulation loop, ensemble runner and reproducibility contract.

Per step, in this order:

1. draw xi ~ N(0, 1) and update the price from the pre-step composition;
2. switch strategies synchronously, one uniform draw per agent in index order;
3. if a variance window is configured compute the rolling variance and, when
   self-organizing, apply the entry/exit rule.

All randomness comes from one ``numpy.random.Generator(PCG64(seed))`` per
run, consumed exactly in that order (the horizons of the initial population,
when heterogeneous, are drawn before step 1). Ensemble members get seeds from
:func:`derive_seeds`. Two interchangeable backends are provided: ``python``
composes the public model operations one call at a time; ``compiled`` runs the
numba kernel. They produce bit-identical output.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from . import __version__
from .market import MarketState, moving_average, price_step
from .params import HorizonPolicy, ModelError, ModelParams, ValidationError
from .selforg import SelfOrgPolicy, population_flow_step, rolling_variance
from .strategy import Population, update_strategies

SEED_MAX = 2**64 - 1


class NumericOverflowError(ModelError, ArithmeticError):
    """The price left the representable range; the run stopped early."""


@dataclass(frozen=True)
class SimConfig:
    params: ModelParams = field(default_factory=ModelParams)
    n_initial: int = 500
    steps: int = 100_000
    seed: int = 0
    record_every: int = 1
    burn_in: int = 0
    initial_chartist_fraction: float = 0.0
    variance_window: int | None = None
    selforg: SelfOrgPolicy | None = None

    def __post_init__(self):
        for name in ("n_initial", "steps", "seed", "record_every", "burn_in"):
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, (int, np.integer)):
                raise ValidationError(name, f"must be an integer, got {v!r}")
        if self.n_initial < 1:
            raise ValidationError("n_initial", "must be >= 1")
        if self.steps < 1:
            raise ValidationError("steps", "must be >= 1")
        if not 0 <= self.seed <= SEED_MAX:
            raise ValidationError("seed", "must be an unsigned 64-bit integer")
        if self.record_every < 1:
            raise ValidationError("record_every", "must be >= 1")
        if self.burn_in < 0:
            raise ValidationError("burn_in", "must be >= 0")
        if self.steps <= self.burn_in:
            raise ValidationError("burn_in", "steps must exceed burn_in")
        if not 0.0 <= self.initial_chartist_fraction <= 1.0:
            raise ValidationError("initial_chartist_fraction", "must lie in [0, 1]")
        if self.variance_window is not None and self.variance_window < 2:
            raise ValidationError("variance_window", "must be >= 2")
        if self.selforg is not None:
            if not self.selforg.n_min <= self.n_initial <= self.selforg.n_max:
                raise ValidationError("n_initial", "must lie within [n_min, n_max] when self-organizing")
            if self.variance_window is not None and self.variance_window != self.selforg.window_T:
                raise ValidationError("variance_window", "must equal window_T when self-organizing")

    @property
    def window(self) -> int:
        """Rolling-variance window in use, 0 when none is computed."""
        if self.selforg is not None:
            return self.selforg.window_T
        return self.variance_window or 0

    @property
    def warmup(self) -> int:
        return max(self.params.m_policy.max_horizon, self.window)

    @property
    def n_records(self) -> int:
        return (self.steps - self.burn_in) // self.record_every

    def replace(self, **changes) -> "SimConfig":
        data = {f: getattr(self, f) for f in self.__dataclass_fields__}
        data.update(changes)
        return SimConfig(**data)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class SimOutput:
    step: np.ndarray
    price: np.ndarray
    ret: np.ndarray
    n_c: np.ndarray
    n_f: np.ndarray
    n: np.ndarray
    rolling_variance: np.ndarray
    config: SimConfig
    aborted: bool = False
    abort_reason: str = ""
    code_version: str = __version__

    @property
    def seed(self) -> int:
        return self.config.seed

    @property
    def x(self) -> np.ndarray:
        """Chartist fraction N_c / N at each record."""
        return self.n_c / self.n

    def __len__(self) -> int:
        return int(self.step.size)

    def check(self) -> "SimOutput":
        if self.aborted:
            raise NumericOverflowError(self.abort_reason)
        return self

    def equals(self, other: "SimOutput") -> bool:
        """Bitwise equality of every recorded series and of the status."""
        cols = ("step", "price", "ret", "n_c", "n_f", "n", "rolling_variance")
        return (
            self.aborted == other.aborted
            and all(
                getattr(self, c).dtype == getattr(other, c).dtype
                and getattr(self, c).tobytes() == getattr(other, c).tobytes()
                for c in cols
            )
        )


def _initial_population(config: SimConfig, rng) -> Population:
    return Population.create(config.n_initial, config.params.m_policy, rng, config.initial_chartist_fraction)


def _empty_records(n: int) -> dict:
    return dict(
        step=np.empty(n, np.int64),
        price=np.empty(n),
        ret=np.empty(n),
        n_c=np.empty(n, np.int64),
        n_f=np.empty(n, np.int64),
        n=np.empty(n, np.int64),
        rolling_variance=np.empty(n),
    )


def _finish(rec: dict, n_rec: int, config: SimConfig, overflow: bool) -> SimOutput:
    cols = {k: v[:n_rec].copy() for k, v in rec.items()}
    reason = "price became non-finite; output truncated" if overflow else ""
    return SimOutput(**cols, config=config, aborted=overflow, abort_reason=reason)


def _run_python(config: SimConfig) -> SimOutput:
    params = config.params
    horizons = params.m_policy.horizons
    rng = np.random.Generator(np.random.PCG64(config.seed))
    pop = _initial_population(config, rng)
    T = config.window
    state = MarketState.warm(params.p_f, config.warmup, capacity=config.warmup + max(horizons) + T + 2)
    rec = _empty_records(config.n_records)
    n_rec = 0
    overflow = False

    for t in range(1, config.steps + 1):
        p = state.current
        N = pop.N
        counts = pop.chartists_by_horizon()
        means = {M: (counts[M], moving_average(state, M)) for M in horizons}
        xi = rng.standard_normal()
        p_new = price_step(state, params, pop.N_c / N, pop.N_f / N, xi, means, N)
        if not math.isfinite(p_new):
            overflow = True
            break
        state.push(p_new)

        current_means = {M: moving_average(state, M) for M in horizons}
        pop = update_strategies(pop, p_new, current_means, params, rng)

        var = math.nan
        if T:
            var = rolling_variance(state, T)
        if config.selforg is not None:
            pop = population_flow_step(pop, var, config.selforg, rng, params.m_policy)

        if t > config.burn_in and (t - config.burn_in) % config.record_every == 0:
            rec["step"][n_rec] = t
            rec["price"][n_rec] = p_new
            rec["ret"][n_rec] = p_new - p
            rec["n_c"][n_rec] = pop.N_c
            rec["n_f"][n_rec] = pop.N_f
            rec["n"][n_rec] = pop.N
            rec["rolling_variance"][n_rec] = var
            n_rec += 1

    return _finish(rec, n_rec, config, overflow)


def _run_compiled(config: SimConfig) -> SimOutput:
    from . import _kernel

    params = config.params
    rng = np.random.Generator(np.random.PCG64(config.seed))
    pop = _initial_population(config, rng)
    capacity = config.selforg.n_max if config.selforg is not None else pop.N
    strat = np.zeros(capacity, np.int8)
    hidx = np.zeros(capacity, np.int32)
    strat[: pop.N] = pop.strategies
    hidx[: pop.N] = pop.horizon_index

    warm = config.warmup
    prices = np.empty(warm + 1 + config.steps)
    prices[: warm + 1] = params.p_f
    sog = config.selforg or SelfOrgPolicy()
    rec = _empty_records(config.n_records)
    n_rec, _, status = _kernel.simulate(
        rng,
        prices,
        warm + 1,
        config.steps,
        strat,
        hidx,
        pop.N,
        np.array(params.m_policy.horizons, dtype=np.int64),
        np.array(params.m_policy.cumulative_weights(), dtype=np.float64),
        float(params.b),
        float(params.gamma),
        float(params.sigma),
        float(params.p_f),
        float(params.B),
        float(params.r),
        float(params.delta),
        bool(params.exp_coupling),
        math.nan if params.price_floor is None else float(params.price_floor),
        config.window,
        config.selforg is not None,
        float(sog.theta_in),
        float(sog.theta_out),
        sog.flow_rate,
        sog.n_min,
        sog.n_max,
        sog.entrant_strategy == "proportional",
        config.burn_in,
        config.record_every,
        rec["step"],
        rec["price"],
        rec["ret"],
        rec["n_c"],
        rec["n_f"],
        rec["n"],
        rec["rolling_variance"],
    )
    return _finish(rec, n_rec, config, status == _kernel.STATUS_OVERFLOW)


BACKENDS = {"python": _run_python, "compiled": _run_compiled}


def run_simulation(config: SimConfig, backend: str = "compiled") -> SimOutput:
    """Run one simulation. Identical (config, seed) gives identical output."""
    if not isinstance(config, SimConfig):
        raise ValidationError("config", "expected a SimConfig")
    try:
        runner = BACKENDS[backend]
    except KeyError:
        raise ValueError(f"unknown backend {backend!r}; choose from {sorted(BACKENDS)}") from None
    return runner(config)


def derive_seeds(master_seed: int, n: int) -> list[int]:
    """Independent 64-bit seeds for ensemble members.

    Member i gets the first 64-bit word of ``SeedSequence(master_seed,
    spawn_key=(i,))``.
    """
    return [
        int(np.random.SeedSequence(master_seed, spawn_key=(i,)).generate_state(1, np.uint64)[0])
        for i in range(n)
    ]


def seeded(config: SimConfig, n: int, master_seed: int | None = None) -> list[SimConfig]:
    """``n`` copies of ``config`` with seeds derived from ``master_seed``."""
    master = config.seed if master_seed is None else master_seed
    return [config.replace(seed=s) for s in derive_seeds(master, n)]


@dataclass(frozen=True)
class RunFailure:
    index: int
    config: SimConfig
    error: str


def _run_member(args):
    index, config, backend = args
    try:
        return run_simulation(config, backend)
    except Exception as exc:  # collected, never fatal to siblings
        return RunFailure(index, config, f"{type(exc).__name__}: {exc}")


def run_ensemble(configs: Sequence[SimConfig], max_parallel: int = 1, backend: str = "compiled") -> list:
    """Run every config; results come back in input order.

    Each entry is a :class:`SimOutput` or, for a run that raised, a
    :class:`RunFailure`. Results do not depend on ``max_parallel``.
    """
    configs = list(configs)
    if not configs:
        raise ValueError("no configurations given")
    if max_parallel < 1:
        raise ValueError("max_parallel must be >= 1")
    jobs = [(i, c, backend) for i, c in enumerate(configs)]
    workers = min(max_parallel, len(jobs))
    if workers == 1:
        return [_run_member(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_member, jobs))


def default_parallelism() -> int:
    return max(1, os.cpu_count() or 1)
