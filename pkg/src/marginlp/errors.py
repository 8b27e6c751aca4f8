"""Exception hierarchy shared by every module."""


class MarginLiquidityError(Exception):
    """Base class for all package errors."""


class DomainError(MarginLiquidityError, ValueError):
    """An input lies outside the mathematical domain of an operation."""


class RatioViolationError(DomainError):
    """A deposit does not match the pool's token ratio."""


class CapacityError(MarginLiquidityError):
    """Not enough liquidity is available to borrow."""


class PositionStateError(MarginLiquidityError):
    """An operation was attempted on a position in the wrong lifecycle state."""


class DataValidationError(MarginLiquidityError, ValueError):
    """Market data failed parsing or validation.

    ``row`` is the 1-based line number in the source file when known.
    """

    def __init__(self, message: str, row: int | None = None, rule: str | None = None):
        self.row = row
        self.rule = rule
        self.detail = message
        prefix = f"row {row}: " if row is not None else ""
        super().__init__(prefix + message)
