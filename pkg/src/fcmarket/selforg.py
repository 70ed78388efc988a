"""Variable population size driven by recent price fluctuations.

Agents enter while the rolling price variance exceeds ``theta_in`` and leave
while it is below ``theta_out``; the band in between is a dead zone.
"""

from __future__ import annotations

from dataclasses import dataclass

from .market import MarketState, _sequential_sum
from .params import HorizonPolicy, InsufficientHistoryError, ValidationError
from .strategy import Population

ENTRANT_RULES = ("proportional", "fundamentalist")


@dataclass(frozen=True)
class SelfOrgPolicy:
    theta_in: float = 9.0
    theta_out: float = 1.1
    window_T: int = 20
    flow_rate: int = 1
    n_min: int = 20
    n_max: int = 10000
    entrant_strategy: str = "proportional"

    def __post_init__(self):
        if not self.theta_in > 0:
            raise ValidationError("theta_in", "must be > 0")
        if not self.theta_out > 0:
            raise ValidationError("theta_out", "must be > 0")
        if self.theta_out > self.theta_in:
            raise ValidationError("theta_out", "hysteresis violated: theta_out must not exceed theta_in")
        if self.window_T < 2:
            raise ValidationError("window_T", "must be >= 2")
        if self.flow_rate < 1:
            raise ValidationError("flow_rate", "must be >= 1")
        if not 1 <= self.n_min < self.n_max:
            raise ValidationError("n_min", "bounds must satisfy 1 <= n_min < n_max")
        if self.entrant_strategy not in ENTRANT_RULES:
            raise ValidationError("entrant_strategy", f"must be one of {ENTRANT_RULES}")


def rolling_variance(state: MarketState, T: int) -> float:
    """Sample variance (divisor T - 1) of the last T prices, current included."""
    if T < 2:
        raise ValueError("window must be >= 2")
    if len(state) < T:
        raise InsufficientHistoryError(f"rolling variance over {T} prices, have {len(state)}")
    window = state.last(T)
    mean = _sequential_sum(window) / T
    acc = 0.0
    for p in window:
        d = p - mean
        acc += d * d
    return acc / (T - 1)


def population_flow_step(
    pop: Population,
    sigma_T: float,
    policy: SelfOrgPolicy,
    rng,
    m_policy: HorizonPolicy | None = None,
) -> Population:
    """Apply one step of threshold-driven entry or exit.

    Entrants under the ``proportional`` rule become chartists with probability
    equal to the chartist fraction before the step (one draw each), and draw a
    horizon when the policy is heterogeneous. Leavers are picked uniformly at
    random, one draw each.
    """
    m_policy = m_policy or pop.m_policy
    new = pop.copy()
    if sigma_T > policy.theta_in:
        n_add = min(policy.flow_rate, policy.n_max - new.N)
        frac_c = new.N_c / new.N
        for _ in range(max(n_add, 0)):
            s = 0
            if policy.entrant_strategy == "proportional" and rng.random() < frac_c:
                s = 1
            h = m_policy.sample_index(rng.random()) if m_policy.is_heterogeneous else 0
            new.add(s, h)
    elif sigma_T < policy.theta_out:
        n_rem = min(policy.flow_rate, new.N - policy.n_min)
        for _ in range(max(n_rem, 0)):
            new.remove(int(rng.random() * new.N))
    return new
