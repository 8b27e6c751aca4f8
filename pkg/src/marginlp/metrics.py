"""Performance metrics over an equity curve."""

from __future__ import annotations

import math
from datetime import timedelta
from typing import Sequence

import numpy as np

from marginlp.errors import DomainError

YEAR = timedelta(days=365)
DEFAULT_RISK_FREE = 0.08


def simple_returns(equity: Sequence[float]) -> np.ndarray:
    e = np.asarray(equity, dtype=float)
    prev, cur = e[:-1], e[1:]
    # a wiped-out account stays at zero; count those steps as flat
    return np.divide(cur - prev, prev, out=np.zeros_like(prev), where=prev > 0)


def sharpe_ratio(equity: Sequence[float], step: timedelta, risk_free_annual: float = DEFAULT_RISK_FREE) -> float:
    """Annualized Sharpe ratio of per-step returns.

    The risk-free rate is compounded down to one step.  Returns a signed
    infinity (or NaN) when returns have zero variance.
    """
    if len(equity) < 2:
        raise DomainError("need at least 2 equity points")
    if step <= timedelta(0):
        raise DomainError("step must be positive")
    steps_per_year = YEAR / step
    rf_step = (1.0 + risk_free_annual) ** (1.0 / steps_per_year) - 1.0
    rets = simple_returns(equity)
    excess = float(np.mean(rets - rf_step))
    sd = float(np.std(rets, ddof=1)) if len(rets) > 1 else 0.0
    # returns carry ~eps of rounding from the equity division; below that the
    # series is constant for all practical purposes
    if sd <= 4 * np.finfo(float).eps * (1.0 + float(np.max(np.abs(rets)))):
        return math.copysign(math.inf, excess) if excess != 0 else math.nan
    return excess / sd * math.sqrt(steps_per_year)


def max_drawdown(equity: Sequence[float]) -> float:
    e = np.asarray(equity, dtype=float)
    if e.size == 0:
        raise DomainError("equity curve is empty")
    peak = np.maximum.accumulate(e)
    dd = np.divide(peak - e, peak, out=np.zeros_like(e), where=peak > 0)
    return float(dd.max())


def rate_of_return(equity: Sequence[float]) -> float:
    if len(equity) == 0:
        raise DomainError("equity curve is empty")
    if not equity[0] > 0:
        raise DomainError("initial equity must be positive")
    return float(equity[-1]) / float(equity[0])
