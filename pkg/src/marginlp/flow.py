"""Lower bounds on the swap volume a candle forces through a liquidity position.

Any price move from ``a`` to ``b`` on liquidity ``L`` requires at least the
reserve change between the two curve points: ``L*(sqrt(b) - sqrt(a))`` of X
on the way up and ``L*(1/sqrt(b) - 1/sqrt(a))`` of Y on the way down.  OHLCV
data hides whether the high or the low came first, so each bound uses the
cheaper of the two possible orderings.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from marginlp.errors import DomainError
from marginlp.market_data import Candle


@dataclass(frozen=True)
class FlowBounds:
    v_x: float
    v_y: float


def candle_flow_bounds(candle: Candle, liquidity: float) -> FlowBounds:
    """Minimum X->Y volume ``v_x`` and Y->X volume ``v_y`` for one candle.

    Bullish candles (open < close) assume the path open->low->high->close,
    all others open->high->low->close.
    """
    rule = candle.violation()
    if rule is not None:
        raise DomainError(f"invalid candle: {rule}")
    if liquidity < 0:
        raise DomainError(f"liquidity must be nonnegative, got {liquidity}")
    so, sh, sl, sc = (math.sqrt(p) for p in (candle.open, candle.high, candle.low, candle.close))
    if candle.open < candle.close:
        v_x = liquidity * (sh - sl)
        v_y = liquidity * (1 / sl - 1 / so) + liquidity * (1 / sc - 1 / sh)
    else:
        v_x = liquidity * (sh - so) + liquidity * (sc - sl)
        v_y = liquidity * (1 / sl - 1 / sh)
    return FlowBounds(v_x, v_y)


def fee_income(flow: FlowBounds, fee_fraction: float) -> tuple[float, float]:
    """Fees ``(fee_x, fee_y)`` earned on ``flow`` at fee fraction ``1 - phi``."""
    if not 0 <= fee_fraction < 1:
        raise DomainError(f"fee fraction must lie in [0, 1), got {fee_fraction}")
    return fee_fraction * flow.v_x, fee_fraction * flow.v_y
