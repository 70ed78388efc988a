"""Model constants and the validation shared by every layer."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence


class ModelError(Exception):
    """Base class for all errors raised by fcmarket."""


class ValidationError(ModelError, ValueError):
    """A parameter or configuration value violates its documented range.

    ``field`` names the offending key so callers (the CLI in particular) can
    report it without parsing the message.
    """

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


class InsufficientHistoryError(ModelError):
    """Not enough past prices to evaluate a windowed quantity."""


class DomainError(ModelError, ValueError):
    """Argument outside the mathematical domain of an operation."""


def _check_finite(name: str, value: float) -> None:
    if not math.isfinite(value):
        raise ValidationError(name, f"must be finite, got {value!r}")


@dataclass(frozen=True)
class HorizonPolicy:
    """Moving-average horizons carried by chartists, with sampling weights.

    A single horizon is the homogeneous model. Several horizons make each
    agent draw a personal horizon once, at creation.
    """

    horizons: tuple[int, ...]
    weights: tuple[float, ...]

    def __post_init__(self):
        hs = tuple(int(h) for h in self.horizons)
        ws = tuple(float(w) for w in self.weights)
        object.__setattr__(self, "horizons", hs)
        object.__setattr__(self, "weights", ws)
        if not hs:
            raise ValidationError("m_policy", "at least one horizon required")
        if len(hs) != len(ws):
            raise ValidationError("m_policy", "horizons and weights differ in length")
        if len(set(hs)) != len(hs):
            raise ValidationError("m_policy", "horizons must be distinct")
        if list(hs) != sorted(hs):
            raise ValidationError("m_policy", "horizons must be listed in increasing order")
        for h in hs:
            if h < 2:
                raise ValidationError("m_policy", f"horizon M must be >= 2, got {h}")
        for w in ws:
            _check_finite("m_policy", w)
            if w <= 0:
                raise ValidationError("m_policy", "weights must be positive")
        if abs(sum(ws) - 1.0) > 1e-9:
            raise ValidationError("m_policy", f"weights must sum to 1, got {sum(ws)!r}")

    @classmethod
    def single(cls, M: int) -> "HorizonPolicy":
        return cls((M,), (1.0,))

    @classmethod
    def mixed(cls, horizons: Sequence[int], weights: Sequence[float] | None = None) -> "HorizonPolicy":
        horizons = list(horizons)
        if weights is None:
            weights = [1.0 / len(horizons)] * len(horizons)
        pairs = sorted(zip(horizons, weights))
        return cls(tuple(h for h, _ in pairs), tuple(w for _, w in pairs))

    @property
    def is_heterogeneous(self) -> bool:
        return len(self.horizons) > 1

    @property
    def max_horizon(self) -> int:
        return self.horizons[-1]

    def cumulative_weights(self) -> tuple[float, ...]:
        out, acc = [], 0.0
        for w in self.weights:
            acc += w
            out.append(acc)
        out[-1] = 1.0
        return tuple(out)

    def sample_index(self, u: float) -> int:
        """Map a uniform draw in [0, 1) to a horizon index."""
        for j, c in enumerate(self.cumulative_weights()):
            if u < c:
                return j
        return len(self.horizons) - 1


@dataclass(frozen=True)
class ModelParams:
    """Scalar constants of the fundamentalist/chartist market.

    ``b`` and ``gamma`` are the chartist and fundamentalist price impacts,
    ``sigma`` the noise amplitude, ``p_f`` the fundamental price. ``B`` sets
    the switching time scale, ``r`` the idiosyncratic switching term through
    ``K = r / N`` and ``delta`` the bias towards the fundamentalist strategy.
    With ``exp_coupling`` the switching rates are multiplied by the
    exponential price-signal factors; without it the strategy dynamics is a
    pure herding process.

    Defaults are the reference set shipped in ``presets/reference.ini``: at
    N = 500 the market is intermittent, at N = 5000 locked in the
    fundamentalist state and at N = 50 it flips rapidly.
    """

    b: float = 1.63
    gamma: float = 0.005
    sigma: float = 1.0
    p_f: float = 100.0
    B: float = 0.2
    r: float = 0.5
    delta: float = 0.165
    m_policy: HorizonPolicy = field(default_factory=lambda: HorizonPolicy.single(10))
    exp_coupling: bool = True
    price_floor: float | None = None

    def __post_init__(self):
        for name in ("b", "gamma", "sigma", "p_f", "B", "r", "delta"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise ValidationError(name, f"must be a number, got {value!r}")
            _check_finite(name, float(value))
        if self.b < 0:
            raise ValidationError("b", "must be >= 0")
        if not 0 <= self.gamma < 1:
            raise ValidationError("gamma", "must satisfy 0 <= gamma < 1")
        if self.sigma < 0:
            raise ValidationError("sigma", "must be >= 0")
        if self.B <= 0:
            raise ValidationError("B", "must be > 0")
        if self.r < 0:
            raise ValidationError("r", "must be >= 0")
        if not -1 < self.delta < 1:
            raise ValidationError("delta", "must satisfy -1 < delta < 1")
        if not isinstance(self.m_policy, HorizonPolicy):
            raise ValidationError("m_policy", "must be a HorizonPolicy")
        if self.price_floor is not None:
            _check_finite("price_floor", self.price_floor)
            if self.price_floor <= 0:
                raise ValidationError("price_floor", "must be > 0 when set")

    def K(self, N: int) -> float:
        """Idiosyncratic switching term for a population of size N."""
        return self.r / N
