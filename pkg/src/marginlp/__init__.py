"""Margin liquidity on constant-product pools: mechanics, strategy backtests, capital efficiency."""

from marginlp.errors import (
    CapacityError,
    DataValidationError,
    DomainError,
    MarginLiquidityError,
    PositionStateError,
    RatioViolationError,
)

__version__ = "0.1.0"

__all__ = [
    "CapacityError",
    "DataValidationError",
    "DomainError",
    "MarginLiquidityError",
    "PositionStateError",
    "RatioViolationError",
    "__version__",
]
