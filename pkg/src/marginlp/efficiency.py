"""Capital efficiency of concentrated and margin liquidity relative to a full-range pool.

Both measures depend only on the width ``R = p_high / p_low`` of the target
price range.  The comparison point is the geometric mid price
``sqrt(p_low * p_high)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from marginlp.errors import DomainError

MIN_WIDTH = 1e-12


@dataclass(frozen=True)
class PriceRange:
    p_low: float
    p_high: float

    def __post_init__(self):
        if not 0 < self.p_low < self.p_high:
            raise DomainError(f"need 0 < p_low < p_high, got [{self.p_low}, {self.p_high}]")

    @classmethod
    def from_ratio(cls, ratio: float, p_low: float = 1.0) -> PriceRange:
        return cls(p_low, p_low * ratio)

    @property
    def ratio(self) -> float:
        return self.p_high / self.p_low

    @property
    def mid(self) -> float:
        return math.sqrt(self.p_low * self.p_high)


def _width(price_range: PriceRange) -> float:
    ratio = price_range.ratio
    if ratio - 1.0 < MIN_WIDTH:
        raise DomainError(f"price range too narrow (R - 1 = {ratio - 1.0:g})")
    return ratio


def concentrated_efficiency(price_range: PriceRange) -> float:
    """How many times less capital a range-bound position needs than a full-range one."""
    ratio = _width(price_range)
    return 1.0 / -math.expm1(-0.25 * math.log(ratio))


def max_leverage(price_range: PriceRange) -> float:
    """Largest leverage whose liquidation band still covers the whole range."""
    ratio = _width(price_range)
    q = math.expm1(0.25 * math.log(ratio))  # R**0.25 - 1 without cancellation
    return (math.sqrt(ratio) + 1.0) / (q * q)


def margin_vs_concentrated(price_range: PriceRange) -> float:
    return max_leverage(price_range) / concentrated_efficiency(price_range)


def efficiency_curve(r_min: float, r_max: float, points: int) -> list[tuple[float, float, float]]:
    """Rows ``(R, concentrated, margin)`` on a log-spaced grid of range widths."""
    if not 1 < r_min < r_max:
        raise DomainError(f"need 1 < r_min < r_max, got ({r_min}, {r_max})")
    if points < 2:
        raise DomainError(f"need at least 2 points, got {points}")
    grid = np.geomspace(r_min, r_max, points)
    # pin endpoints so they match the single-point calculators exactly
    grid[0], grid[-1] = r_min, r_max
    rows = []
    for ratio in grid:
        rng = PriceRange.from_ratio(float(ratio))
        rows.append((float(ratio), concentrated_efficiency(rng), max_leverage(rng)))
    return rows
