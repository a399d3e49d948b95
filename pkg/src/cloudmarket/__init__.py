"""Contract pricing and market simulation for selling cloud computations."""

from .core import (
    CompletionHistogram,
    Configuration,
    Contract,
    DemandCurve,
    DimensionError,
    IntervalStats,
    PiecewiseUtility,
    PriceSchedule,
    UtilityPiece,
    cosine_similarity,
    eval_utility,
    expected_contract_utility,
    interval_stats,
    select_best_contract,
)
from .pricing import (
    PricingConstants,
    PricingOutcome,
    expected_demand,
    expected_profit,
    price,
    price_linear,
    price_oracle_grid,
    select_configuration,
)

__version__ = "0.1.0"
