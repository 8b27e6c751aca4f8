"""Sideways-market margin liquidity strategy: trend filter, sizing and PNL."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from datetime import timedelta
from typing import Sequence

import numpy as np

from marginlp.cpmm import Pool
from marginlp.errors import DomainError
from marginlp.flow import candle_flow_bounds
from marginlp.margin import (
    MarginPosition,
    loss_ratio,
    open_margin_position,
    raw_loss_ratio,
    split_collateral,
)
from marginlp.market_data import Candle

MS_PER_DAY = 86_400_000


@dataclass(frozen=True)
class TrendFit:
    slope: float
    intercept: float
    window: timedelta
    sample_count: int


@dataclass(frozen=True)
class StrategyConfig:
    alpha: float = 0.1
    beta: float = 0.2
    gamma: float = 0.05
    leverage: float = 3.0
    window: timedelta = timedelta(hours=2)
    fee_fraction: float = 0.0015

    def __post_init__(self):
        if not 0 < self.alpha < self.beta:
            raise DomainError(f"need 0 < alpha < beta, got alpha={self.alpha}, beta={self.beta}")
        if not 0 < self.gamma < 1:
            raise DomainError(f"gamma must lie in (0, 1), got {self.gamma}")
        if not self.leverage > 1:
            raise DomainError(f"leverage must exceed 1, got {self.leverage}")
        if not self.window > timedelta(0):
            raise DomainError(f"window must be positive, got {self.window}")
        if not 0 <= self.fee_fraction < 1:
            raise DomainError(f"fee_fraction must lie in [0, 1), got {self.fee_fraction}")

    @property
    def window_ms(self) -> int:
        return int(self.window / timedelta(milliseconds=1))


class CloseDecision(str, enum.Enum):
    NONE = "None"
    TREND_EXIT = "TrendExit"
    STOP_LOSS = "StopLoss"
    LIQUIDATION = "Liquidation"
    END_OF_DATA = "EndOfData"


@dataclass
class PositionState:
    position: MarginPosition
    entry_equity: float
    lent_liquidity: float
    pool: Pool
    cumulative_vx: float = 0.0
    cumulative_vy: float = 0.0


def price_trend_slope(times_ms: Sequence[int], prices: Sequence[float], window: timedelta | None = None) -> TrendFit:
    """Least-squares line through ``p / mean(p)`` against time in days.

    Time is measured from the last sample, so the intercept is the fitted
    normalized price now.  The slope reads as fractional drift per day.
    """
    t = np.asarray(times_ms, dtype=float)
    p = np.asarray(prices, dtype=float)
    if t.shape != p.shape or t.ndim != 1:
        raise DomainError("times and prices must be 1-d sequences of equal length")
    if len(t) < 2:
        raise DomainError(f"need at least 2 samples, got {len(t)}")
    tau = (t - t[-1]) / MS_PER_DAY
    span = tau.max() - tau.min()
    if span <= 0:
        raise DomainError("samples span zero time")
    y = p / p.mean()
    dtau = tau - tau.mean()
    slope = float(np.dot(dtau, y - y.mean()) / np.dot(dtau, dtau))
    intercept = float(y.mean() - slope * tau.mean())
    if window is None:
        window = timedelta(days=float(span))
    return TrendFit(slope, intercept, window, len(t))


def should_open(fit: TrendFit | None, config: StrategyConfig, position_open: bool = False) -> bool:
    if fit is None or position_open:
        return False
    return abs(fit.slope) <= config.alpha


def open_with_full_equity(
    equity_usd: float,
    prices: tuple[float, float, float],
    config: StrategyConfig,
    pool: Pool | None = None,
    time: int = 0,
) -> PositionState:
    """Spend all of ``equity_usd`` on collateral and open a leveraged position.

    Without a ``pool`` the position gets a pool of its own at the pair price.
    """
    p, px, py = prices
    collateral = split_collateral(equity_usd, p, px, py)
    if pool is None:
        seed = math.sqrt(collateral[0] * collateral[1])
        pool = Pool.at_price(seed, p, 1.0 - config.fee_fraction)
    position, lent, new_pool = open_margin_position(pool, collateral, config.leverage, time)
    return PositionState(
        position=position,
        entry_equity=px * position.collateral_x + py * position.collateral_y,
        lent_liquidity=lent,
        pool=new_pool,
    )


def accrue_candle(state: PositionState, candle: Candle) -> PositionState:
    """Add the candle's lower-bound flow through the position's liquidity."""
    flow = candle_flow_bounds(candle, state.lent_liquidity)
    state.cumulative_vx += flow.v_x
    state.cumulative_vy += flow.v_y
    return state


def fee_value(state: PositionState, price_x: float, price_y: float, fee_fraction: float) -> float:
    return fee_fraction * (state.cumulative_vx * price_x + state.cumulative_vy * price_y)


def mark_to_market(state: PositionState, prices: tuple[float, float, float], fee_fraction: float) -> float:
    """USD equity: collateral left after the loss ratio plus fees earned so far."""
    p, px, py = prices
    pos = state.position
    r = loss_ratio(pos.leverage, pos.entry_price, p)
    return (1.0 - r) * pos.collateral_value(px, py) + fee_value(state, px, py, fee_fraction)


def pnl(state: PositionState, prices: tuple[float, float, float], fee_fraction: float) -> float:
    return mark_to_market(state, prices, fee_fraction) - state.entry_equity


def should_close(
    fit: TrendFit | None,
    pnl_value: float,
    state: PositionState,
    current_price: float,
    config: StrategyConfig,
) -> CloseDecision:
    """Liquidation beats stop-loss, which beats a trend exit."""
    pos = state.position
    if raw_loss_ratio(pos.leverage, pos.entry_price, current_price) >= 1.0:
        return CloseDecision.LIQUIDATION
    if pnl_value < -config.gamma * state.entry_equity:
        return CloseDecision.STOP_LOSS
    if fit is not None and abs(fit.slope) > config.beta:
        return CloseDecision.TREND_EXIT
    return CloseDecision.NONE
