"""Herding-driven switching between the chartist and fundamentalist strategies.

Rates follow the asymmetric herding form ``B (1 +/- delta) (K + n)`` with
``K = r / N``, optionally multiplied by an exponential of the price signal
each strategy watches. Per-step rates are read as per-agent probabilities and
clamped at 1. Closed-form stationary densities of the pure herding process
are provided as test oracles.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import IntEnum
from typing import Mapping, Sequence

import numpy as np
from scipy import special, stats

from .params import DomainError, HorizonPolicy, ModelParams

#: cap on the argument of the exponential price-signal factor
EXP_CAP = 50.0


class Strategy(IntEnum):
    FUNDAMENTALIST = 0
    CHARTIST = 1


@dataclass(frozen=True)
class Agent:
    strategy: Strategy
    horizon: int


@dataclass(frozen=True)
class SwitchRates:
    """Per-step switching probabilities.

    ``p_fc`` maps each chartist horizon to the probability that a
    fundamentalist carrying that horizon turns chartist.
    """

    p_cf: float
    p_fc: Mapping[int, float]

    def __post_init__(self):
        for p in (self.p_cf, *self.p_fc.values()):
            if not 0.0 <= p <= 1.0:
                raise DomainError(f"switch probability outside [0, 1]: {p!r}")

    @classmethod
    def uniform(cls, p_cf: float, p_fc: float, m_policy: HorizonPolicy) -> "SwitchRates":
        return cls(p_cf, {M: p_fc for M in m_policy.horizons})


class Population:
    """Agents in index order with cached strategy counts.

    Each agent carries a strategy and the index of its personal horizon in
    ``m_policy.horizons``. The horizon is kept across strategy switches.
    Removal swaps the last agent into the vacated slot.
    """

    def __init__(self, strategies, horizon_index, m_policy: HorizonPolicy):
        self.m_policy = m_policy
        self.strategies = np.array(strategies, dtype=np.int8).copy()
        self.horizon_index = np.array(horizon_index, dtype=np.int32).copy()
        if self.strategies.shape != self.horizon_index.shape or self.strategies.ndim != 1:
            raise ValueError("strategies and horizon_index must be 1-d and equally long")
        if np.any((self.strategies != 0) & (self.strategies != 1)):
            raise ValueError("strategies must be 0 (fundamentalist) or 1 (chartist)")
        n_h = len(m_policy.horizons)
        if np.any((self.horizon_index < 0) | (self.horizon_index >= n_h)):
            raise ValueError("horizon index out of range")
        self._by_h = self._count_by_horizon()

    def _count_by_horizon(self) -> np.ndarray:
        chart = self.strategies == 1
        return np.bincount(self.horizon_index[chart], minlength=len(self.m_policy.horizons)).astype(np.int64)

    @classmethod
    def from_counts(cls, n_c: int, n_f: int, m_policy: HorizonPolicy | None = None) -> "Population":
        """Chartists first; every agent gets the first horizon of the policy."""
        m_policy = m_policy or HorizonPolicy.single(2)
        strategies = [1] * n_c + [0] * n_f
        return cls(strategies, [0] * (n_c + n_f), m_policy)

    @classmethod
    def create(cls, N: int, m_policy: HorizonPolicy, rng, chartist_fraction: float = 0.0) -> "Population":
        """N fresh agents, the first ``round(chartist_fraction * N)`` chartists.

        With a heterogeneous policy one uniform draw per agent, in index order,
        picks its horizon.
        """
        if N < 1:
            raise ValueError("population size must be >= 1")
        if not 0.0 <= chartist_fraction <= 1.0:
            raise ValueError("chartist_fraction must lie in [0, 1]")
        n_c = int(round(chartist_fraction * N))
        strategies = [1] * n_c + [0] * (N - n_c)
        if m_policy.is_heterogeneous:
            hidx = [m_policy.sample_index(rng.random()) for _ in range(N)]
        else:
            hidx = [0] * N
        return cls(strategies, hidx, m_policy)

    def copy(self) -> "Population":
        return Population(self.strategies, self.horizon_index, self.m_policy)

    @property
    def N(self) -> int:
        return int(self.strategies.shape[0])

    @property
    def N_c(self) -> int:
        return int(self._by_h.sum())

    @property
    def N_f(self) -> int:
        return self.N - self.N_c

    @property
    def agents(self) -> list[Agent]:
        hs = self.m_policy.horizons
        return [Agent(Strategy(int(s)), hs[int(h)]) for s, h in zip(self.strategies, self.horizon_index)]

    def chartists_by_horizon(self) -> dict[int, int]:
        return {M: int(c) for M, c in zip(self.m_policy.horizons, self._by_h)}

    def check(self) -> None:
        """Assert that cached counts agree with a full recount."""
        if not np.array_equal(self._by_h, self._count_by_horizon()):
            raise AssertionError("cached chartist counts out of sync with agents")

    def add(self, strategy: int, horizon_index: int) -> None:
        self.strategies = np.append(self.strategies, np.int8(strategy))
        self.horizon_index = np.append(self.horizon_index, np.int32(horizon_index))
        if strategy == 1:
            self._by_h[horizon_index] += 1

    def remove(self, k: int) -> None:
        if self.strategies[k] == 1:
            self._by_h[self.horizon_index[k]] -= 1
        last = self.N - 1
        self.strategies[k] = self.strategies[last]
        self.horizon_index[k] = self.horizon_index[last]
        self.strategies = self.strategies[:last].copy()
        self.horizon_index = self.horizon_index[:last].copy()

    def __repr__(self):
        return f"Population(N={self.N}, N_c={self.N_c}, N_f={self.N_f})"


def _price_factor(signal: float) -> float:
    return math.exp(min(signal, EXP_CAP))


def rate_c_to_f(pop: Population, p: float, params: ModelParams, N: int | None = None) -> float:
    """Probability per step that a chartist turns fundamentalist."""
    N = pop.N if N is None else N
    if N < 1:
        raise DomainError("N must be >= 1")
    K = params.r / N
    e = _price_factor(params.gamma * abs(params.p_f - p)) if params.exp_coupling else 1.0
    return min(1.0, params.B * (1.0 + params.delta) * (K + pop.N_f / N) * e)


def rate_f_to_c(pop: Population, p: float, p_M: float, params: ModelParams, N: int | None = None, M: int | None = None) -> float:
    """Probability per step that a fundamentalist with horizon M turns chartist."""
    N = pop.N if N is None else N
    M = params.m_policy.horizons[0] if M is None else M
    if N < 1:
        raise DomainError("N must be >= 1")
    if M < 2:
        raise DomainError(f"chartist horizon must be >= 2, got {M}")
    K = params.r / N
    e = _price_factor(params.b * abs(p_M - p) / (M - 1)) if params.exp_coupling else 1.0
    return min(1.0, params.B * (1.0 - params.delta) * (K + pop.N_c / N) * e)


def switch_rates(pop: Population, p: float, horizon_means: Mapping[int, float], params: ModelParams) -> SwitchRates:
    """Rates for the current step; ``horizon_means`` maps M to the current p_M."""
    p_cf = rate_c_to_f(pop, p, params)
    p_fc = {M: rate_f_to_c(pop, p, horizon_means.get(M, p), params, M=M) for M in params.m_policy.horizons}
    return SwitchRates(p_cf, p_fc)


def update_strategies(
    pop: Population,
    p: float,
    horizon_means: Mapping[int, float],
    params: ModelParams,
    rng,
    rates: SwitchRates | None = None,
) -> Population:
    """One synchronous switching step.

    All probabilities come from the population at the start of the step. One
    uniform draw per agent, in index order, decides whether it flips. ``rates``
    overrides the computed probabilities.
    """
    if rates is None:
        rates = switch_rates(pop, p, horizon_means, params)
    new = pop.copy()
    if new.N == 0:
        return new
    p_fc = np.array([rates.p_fc[M] for M in pop.m_policy.horizons])
    u = np.asarray(rng.random(new.N), dtype=float)
    chart = new.strategies == 1
    flip = np.where(chart, u < rates.p_cf, u < p_fc[new.horizon_index])
    new.strategies = np.where(flip, 1 - new.strategies, new.strategies).astype(np.int8)
    new._by_h = new._count_by_horizon()
    return new


def _check_open_unit(x):
    x = np.asarray(x, dtype=float)
    if np.any((x <= 0.0) | (x >= 1.0)):
        raise DomainError("x must lie strictly inside (0, 1)")
    return x


def equilibrium_density_symmetric(x, eps: float):
    """Normalized Beta(eps, eps) density: the stationary law of x = N_c / N."""
    if eps <= 0:
        raise DomainError("eps must be > 0")
    x = _check_open_unit(x)
    out = np.exp((eps - 1.0) * (np.log(x) + np.log1p(-x)) - special.betaln(eps, eps))
    return out if out.ndim else float(out)


def equilibrium_density_asymmetric(x, r: float, delta: float, nu: float, N: int):
    """Unnormalized stationary kernel with asymmetry; for shape comparisons only.

    ``nu`` enters only through the constant factor ``exp(-2 delta nu N)``.
    """
    x = _check_open_unit(x)
    out = x ** (r * (1.0 - delta) - 1.0) * (1.0 - x) ** (r * (1.0 + delta) - 1.0) * math.exp(-2.0 * delta * nu * N)
    return out if out.ndim else float(out)


def asymmetric_mode(r: float, delta: float) -> float:
    """Interior mode of the asymmetric kernel (requires both exponents positive)."""
    a, b = r * (1.0 - delta), r * (1.0 + delta)
    if a <= 1 or b <= 1:
        raise DomainError("kernel has no interior mode for these parameters")
    return (a - 1.0) / (a + b - 2.0)


def beta_ks_distance(counts: Sequence[int], N: int, eps: float) -> float:
    """KS distance between sampled chartist counts and Beta(eps, eps).

    ``counts`` holds observed N_c values in 0..N. Because x = N_c / N lives on
    a lattice, the empirical CDF at k / N is compared with the Beta CDF at the
    cell edge (k + 1/2) / N; without this continuity correction the atoms at
    the lattice points alone would dominate the distance.
    """
    counts = np.asarray(counts)
    if counts.size == 0:
        raise DomainError("no samples")
    if np.any((counts < 0) | (counts > N)):
        raise DomainError("counts must lie in 0..N")
    hist = np.bincount(counts.astype(np.int64), minlength=N + 1)
    ecdf = np.cumsum(hist) / hist.sum()
    k = np.arange(N + 1)
    model = stats.beta.cdf(np.minimum((k + 0.5) / N, 1.0), eps, eps)
    return float(np.max(np.abs(ecdf - model)))


def residence_times(x_series, threshold_low: float, threshold_high: float) -> tuple[list[int], list[int]]:
    """Lengths of fundamentalist- and chartist-dominated episodes.

    A step with x below ``threshold_low`` is fundamentalist-dominated, above
    ``threshold_high`` chartist-dominated; in between the previous state
    persists. Steps before the first classification are skipped and the final,
    possibly unfinished, episode is included.
    """
    if not 0.0 < threshold_low < threshold_high < 1.0:
        raise DomainError("thresholds must satisfy 0 < low < high < 1")
    x = np.asarray(x_series, dtype=float)
    state = np.full(x.shape, -1, dtype=np.int8)
    state[x < threshold_low] = 0
    state[x > threshold_high] = 1
    # forward-fill the dead band
    idx = np.where(state >= 0, np.arange(x.size), -1)
    np.maximum.accumulate(idx, out=idx)
    valid = idx >= 0
    filled = state[idx[valid]]
    durations_f: list[int] = []
    durations_c: list[int] = []
    if filled.size == 0:
        return durations_f, durations_c
    change = np.flatnonzero(np.diff(filled)) + 1
    starts = np.concatenate(([0], change))
    ends = np.concatenate((change, [filled.size]))
    for s, e in zip(starts, ends):
        (durations_f if filled[s] == 0 else durations_c).append(int(e - s))
    return durations_f, durations_c
