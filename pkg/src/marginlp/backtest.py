"""Candle-by-candle backtest of the margin liquidity strategy and a hold baseline."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from datetime import timedelta
from pathlib import Path

import numpy as np

from marginlp.cpmm import Pool
from marginlp.errors import DomainError
from marginlp.margin import close_margin_position, liquidation_bounds, loss_ratio, split_collateral
from marginlp.market_data import AlignedMarket, Candle
from marginlp.metrics import DEFAULT_RISK_FREE, max_drawdown, rate_of_return, sharpe_ratio
from marginlp.strategy import (
    CloseDecision,
    PositionState,
    StrategyConfig,
    TrendFit,
    accrue_candle,
    fee_value,
    mark_to_market,
    open_with_full_equity,
    price_trend_slope,
    should_close,
    should_open,
)


@dataclass(frozen=True)
class EquityPoint:
    time: int
    equity: float
    loss_ratio: float
    position_open: bool


@dataclass(frozen=True)
class Trade:
    open_time: int
    close_time: int
    reason: str
    pnl: float
    entry_equity: float
    exit_equity: float
    position: dict = field(default_factory=dict)
    settlement: dict = field(default_factory=dict)


@dataclass
class BacktestReport:
    sharpe: float
    mdd: float
    ror: float
    trades: list[Trade]
    equity_curve: list[EquityPoint]

    @property
    def equities(self) -> list[float]:
        return [pt.equity for pt in self.equity_curve]

    def to_dict(self) -> dict:
        return {
            "sharpe": self.sharpe if math.isfinite(self.sharpe) else "undefined",
            "mdd": self.mdd,
            "ror": self.ror,
            "trades": [asdict(t) for t in self.trades],
            "equity_curve": [asdict(pt) for pt in self.equity_curve],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    def write(self, out_dir: str | Path) -> None:
        """Write ``report.json``, ``equity.csv`` and ``trades.csv`` into ``out_dir``."""
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.json").write_text(self.to_json(), encoding="utf-8")
        with (out / "equity.csv").open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["time", "equity", "loss_ratio", "position_open"])
            for pt in self.equity_curve:
                w.writerow([pt.time, repr(pt.equity), repr(pt.loss_ratio), str(pt.position_open).lower()])
        with (out / "trades.csv").open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["open_time", "close_time", "reason", "pnl", "entry_equity", "exit_equity"])
            for t in self.trades:
                w.writerow([t.open_time, t.close_time, t.reason, repr(t.pnl), repr(t.entry_equity), repr(t.exit_equity)])

    def summary_line(self) -> str:
        sharpe = f"{self.sharpe:.4f}" if math.isfinite(self.sharpe) else "undefined"
        return f"sharpe={sharpe} mdd={self.mdd:.4f} ror={self.ror:.4f} trades={len(self.trades)}"


def _market_step(market: AlignedMarket) -> timedelta:
    if market.step is None:
        raise DomainError("market needs at least two candles to define a step")
    return timedelta(milliseconds=market.step)


def _report(curve: list[EquityPoint], trades: list[Trade], step: timedelta, risk_free_annual: float) -> BacktestReport:
    equity = [pt.equity for pt in curve]
    sharpe = sharpe_ratio(equity, step, risk_free_annual) if len(equity) >= 2 else math.nan
    return BacktestReport(sharpe, max_drawdown(equity), rate_of_return(equity), trades, curve)


class _TrendWindow:
    """Trend fits over the trailing window of pair open prices."""

    def __init__(self, times: np.ndarray, opens: np.ndarray, window: timedelta):
        self.times = times
        self.opens = opens
        self.window = window
        self.window_ms = int(window / timedelta(milliseconds=1))

    def fit(self, i: int) -> TrendFit | None:
        t = self.times[i]
        if t - self.times[0] < self.window_ms:
            return None
        start = int(np.searchsorted(self.times, t - self.window_ms, side="left"))
        if i - start + 1 < 2:
            return None
        return price_trend_slope(self.times[start : i + 1], self.opens[start : i + 1], self.window)


def _breached_bound(candle: Candle, entry_price: float, leverage: float) -> float | None:
    """Price at which the position is liquidated inside ``candle``, if any."""
    low, high = liquidation_bounds(leverage)
    hits_high = candle.high / entry_price > high
    hits_low = candle.low / entry_price < low
    if hits_high and hits_low:
        # bullish candles are assumed to visit the low first
        return entry_price * (low if candle.is_bullish else high)
    if hits_high:
        return entry_price * high
    if hits_low:
        return entry_price * low
    return None


def run_backtest(
    market: AlignedMarket,
    config: StrategyConfig,
    initial_equity_usd: float,
    risk_free_annual: float = DEFAULT_RISK_FREE,
) -> BacktestReport:
    """Run the strategy over ``market`` with decisions taken at each candle open.

    At each candle: evaluate closing rules at the open, open a new position
    if flat and the trend is sideways, record equity, then either liquidate
    (when the candle's high or low crosses a liquidation bound) or accrue the
    candle's fee flow.  An open position is closed at the last candle's open.
    """
    if len(market) == 0:
        raise DomainError("market is empty")
    if not initial_equity_usd > 0:
        raise DomainError("initial equity must be positive")
    step = _market_step(market)
    times = np.array(market.times, dtype=np.int64)
    if times[-1] - times[0] <= config.window_ms:
        raise DomainError(f"window {config.window} is not shorter than the market span")

    trend = _TrendWindow(times, np.array([c.open for c in market.candles_pair]), config.window)
    fee = config.fee_fraction
    cash = initial_equity_usd
    state: PositionState | None = None
    curve: list[EquityPoint] = []
    trades: list[Trade] = []
    last = len(market) - 1

    def realize(reason: CloseDecision, price: float, px: float, py: float, t: int, liquidate: bool) -> float:
        nonlocal state
        pool = Pool.at_price(state.pool.liquidity, price, state.pool.retained_fraction)
        settlement, _ = close_margin_position(state.position, pool, price, liquidate=liquidate)
        equity = (
            settlement.returned_to_owner_x * px
            + settlement.returned_to_owner_y * py
            + fee_value(state, px, py, fee)
        )
        trades.append(
            Trade(
                open_time=state.position.open_time,
                close_time=t,
                reason=reason.value,
                pnl=equity - state.entry_equity,
                entry_equity=state.entry_equity,
                exit_equity=equity,
                position=state.position.to_dict(),
                settlement=settlement.to_dict(),
            )
        )
        state = None
        return equity

    for i in range(len(market)):
        pair = market.candles_pair[i]
        t = pair.open_time
        p, px, py = pair.open, market.candles_x_usd[i].open, market.candles_y_usd[i].open
        fit = trend.fit(i)
        closed_now = False

        if state is not None:
            equity_now = mark_to_market(state, (p, px, py), fee)
            decision = should_close(fit, equity_now - state.entry_equity, state, p, config)
            if decision is not CloseDecision.NONE:
                cash = realize(decision, p, px, py, t, liquidate=decision is CloseDecision.LIQUIDATION)
                closed_now = True

        if state is None and not closed_now and i < last and cash > 0 and should_open(fit, config):
            state = open_with_full_equity(cash, (p, px, py), config, time=t)
            cash = 0.0

        if state is not None:
            pos = state.position
            curve.append(
                EquityPoint(t, mark_to_market(state, (p, px, py), fee), loss_ratio(pos.leverage, pos.entry_price, p), True)
            )
        else:
            curve.append(EquityPoint(t, cash, 0.0, False))

        if state is None:
            continue
        if i == last:
            cash = realize(CloseDecision.END_OF_DATA, p, px, py, t, liquidate=False)
            continue
        bound = _breached_bound(pair, state.position.entry_price, state.position.leverage)
        if bound is not None:
            cash = realize(CloseDecision.LIQUIDATION, bound, px, py, t, liquidate=True)
        else:
            accrue_candle(state, pair)

    return _report(curve, trades, step, risk_free_annual)


def run_baseline_hold(
    market: AlignedMarket, initial_equity_usd: float, risk_free_annual: float = DEFAULT_RISK_FREE
) -> BacktestReport:
    """Buy X and Y at the pair ratio on the first candle and hold."""
    if len(market) == 0:
        raise DomainError("market is empty")
    step = _market_step(market)
    p, px, py = market.candles_pair[0].open, market.candles_x_usd[0].open, market.candles_y_usd[0].open
    dx, dy = split_collateral(initial_equity_usd, p, px, py)
    curve = [
        EquityPoint(cx.open_time, cx.open * dx + cy.open * dy, 0.0, False)
        for cx, cy in zip(market.candles_x_usd, market.candles_y_usd)
    ]
    return _report(curve, [], step, risk_free_annual)
