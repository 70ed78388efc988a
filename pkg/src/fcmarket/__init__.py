"""Minimal fundamentalist/chartist agent-based market with stylized-facts tooling."""

__version__ = "0.1.0"

from .params import (  # noqa: E402
    DomainError,
    HorizonPolicy,
    InsufficientHistoryError,
    ModelError,
    ModelParams,
    ValidationError,
)
from .market import MarketState, chartist_drift, fundamentalist_drift, moving_average, price_step  # noqa: E402
from .strategy import Agent, Population, Strategy, SwitchRates, update_strategies  # noqa: E402
from .selforg import SelfOrgPolicy, population_flow_step, rolling_variance  # noqa: E402
from .engine import (  # noqa: E402
    NumericOverflowError,
    SimConfig,
    SimOutput,
    derive_seeds,
    run_ensemble,
    run_simulation,
)

__all__ = [
    "Agent",
    "DomainError",
    "HorizonPolicy",
    "InsufficientHistoryError",
    "MarketState",
    "ModelError",
    "ModelParams",
    "NumericOverflowError",
    "Population",
    "SelfOrgPolicy",
    "SimConfig",
    "SimOutput",
    "Strategy",
    "SwitchRates",
    "ValidationError",
    "chartist_drift",
    "derive_seeds",
    "fundamentalist_drift",
    "moving_average",
    "population_flow_step",
    "price_step",
    "rolling_variance",
    "run_ensemble",
    "run_simulation",
    "update_strategies",
]
