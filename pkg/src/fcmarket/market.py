"""Price state and the one-step linear price update."""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Mapping

from .params import DomainError, InsufficientHistoryError, ModelParams


@dataclass
class MarketState:
    """Ring buffer of recent prices, most recent last, plus the step counter."""

    capacity: int
    prices: deque = field(default_factory=deque)
    t: int = 0

    def __post_init__(self):
        if self.capacity < 1:
            raise ValueError("capacity must be >= 1")
        items = list(self.prices)
        for p in items:
            if not math.isfinite(p):
                raise ValueError(f"non-finite price in history: {p!r}")
        self.prices = deque(items[-self.capacity:], maxlen=self.capacity)

    @classmethod
    def warm(cls, p0: float, warmup: int, capacity: int | None = None) -> "MarketState":
        """History of ``warmup`` past prices plus the current one, all equal to ``p0``.

        A flat history puts no trend signal in front of the chartists at t = 0.
        """
        if capacity is None:
            capacity = warmup + 1
        if capacity < warmup + 1:
            raise ValueError("capacity too small for the requested warm-up")
        return cls(capacity, deque([float(p0)] * (warmup + 1)))

    @property
    def current(self) -> float:
        if not self.prices:
            raise InsufficientHistoryError("empty price history")
        return self.prices[-1]

    def __len__(self) -> int:
        return len(self.prices)

    def push(self, price: float) -> None:
        if not math.isfinite(price):
            raise ValueError(f"refusing to store non-finite price {price!r}")
        self.prices.append(float(price))
        self.t += 1

    def last(self, n: int) -> list[float]:
        """The ``n`` most recent prices, oldest first (the current price included)."""
        if n > len(self.prices):
            raise InsufficientHistoryError(f"need {n} prices, have {len(self.prices)}")
        return list(self.prices)[len(self.prices) - n:]


def _sequential_sum(values: Iterable[float]) -> float:
    # fixed left-to-right order; the compiled kernel sums the same way
    s = 0.0
    for v in values:
        s += v
    return s


def moving_average(state: MarketState, M: int) -> float:
    """Mean of the M prices strictly before the current one."""
    if M < 1:
        raise DomainError(f"moving-average window must be >= 1, got {M}")
    if len(state) < M + 1:
        raise InsufficientHistoryError(
            f"moving average over {M} steps needs {M} past prices, have {len(state) - 1}"
        )
    window = state.last(M + 1)[:-1]
    return _sequential_sum(window) / M


def chartist_drift(p: float, p_M: float, b: float, M: int) -> float:
    """Trend-following push ``b (p - p_M) / (M - 1)``."""
    if M < 2:
        raise DomainError(f"chartist horizon must be >= 2, got {M}")
    return b * (p - p_M) / (M - 1)


def fundamentalist_drift(p: float, p_f: float, gamma: float) -> float:
    return gamma * (p_f - p)


def price_step(
    state: MarketState,
    params: ModelParams,
    n_c: float,
    n_f: float,
    xi: float,
    horizon_means: Mapping[int, tuple[int, float]] | None = None,
    N: int | None = None,
) -> float:
    """Next price given the current composition and one standard normal draw.

    ``n_c`` and ``n_f`` are the chartist and fundamentalist fractions. With
    heterogeneous horizons pass ``horizon_means`` mapping each horizon M to
    ``(chartist_count, p_M)`` together with the population size ``N``; the
    chartist term is then the count-weighted sum over horizons. Without it the
    single horizon of ``params.m_policy`` is used and the moving average is
    read from ``state``.
    """
    if abs(n_c + n_f - 1.0) > 1e-12:
        raise DomainError(f"fractions must sum to 1, got n_c={n_c!r}, n_f={n_f!r}")
    p = state.current

    chart = 0.0
    if horizon_means is None:
        if params.m_policy.is_heterogeneous:
            raise DomainError("heterogeneous horizons require horizon_means and N")
        M = params.m_policy.horizons[0]
        chart += chartist_drift(p, moving_average(state, M), params.b, M) * n_c
    else:
        if N is None or N < 1:
            raise DomainError("N >= 1 is required together with horizon_means")
        for M in sorted(horizon_means):
            count, p_M = horizon_means[M]
            chart += chartist_drift(p, p_M, params.b, M) * (count / N)

    p_new = p + params.sigma * xi + chart + fundamentalist_drift(p, params.p_f, params.gamma) * n_f
    if params.price_floor is not None and p_new < params.price_floor:
        p_new = params.price_floor
    return p_new
