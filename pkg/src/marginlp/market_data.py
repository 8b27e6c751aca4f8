"""OHLCV ingestion, validation and alignment.

Files are UTF-8 CSV with header ``open_time,open,high,low,close,volume``;
``open_time`` is the candle start in epoch milliseconds (UTC).  The pair
series quotes Y in units of X; the two USD series quote X and Y in USD.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from marginlp.errors import DataValidationError

logger = logging.getLogger(__name__)

HEADER = ("open_time", "open", "high", "low", "close", "volume")
COHERENCE_THRESHOLD = 0.01

RULE_POSITIVE = "all prices > 0"
RULE_LOW = "low ≤ min(open, close)"
RULE_HIGH = "high ≥ max(open, close)"
RULE_VOLUME = "volume ≥ 0"
RULE_STEP = "constant step between open_time values"


@dataclass(frozen=True)
class Candle:
    open_time: int
    open: float
    high: float
    low: float
    close: float
    volume: float = 0.0

    def violation(self) -> str | None:
        """Name of the first violated rule, or None for a valid candle."""
        prices = (self.open, self.high, self.low, self.close)
        if not all(p > 0 and math.isfinite(p) for p in prices):
            return RULE_POSITIVE
        if self.low > min(self.open, self.close):
            return RULE_LOW
        if self.high < max(self.open, self.close):
            return RULE_HIGH
        if not self.volume >= 0:
            return RULE_VOLUME
        return None

    def validate(self) -> Candle:
        rule = self.violation()
        if rule is not None:
            raise DataValidationError(f"candle at {self.open_time} violates {rule}", rule=rule)
        return self

    @property
    def is_bullish(self) -> bool:
        return self.open < self.close


def series_step(candles: Sequence[Candle]) -> int | None:
    if len(candles) < 2:
        return None
    return candles[1].open_time - candles[0].open_time


def validate_series(candles: Sequence[Candle], first_row: int = 2) -> None:
    """Check per-candle rules and the constant-step rule.

    ``first_row`` is the file line of ``candles[0]`` (line 1 is the header).
    """
    if not candles:
        raise DataValidationError("series is empty")
    for i, c in enumerate(candles):
        rule = c.violation()
        if rule is not None:
            raise DataValidationError(f"index {i} violates {rule}", row=first_row + i, rule=rule)
    step = series_step(candles)
    if step is None:
        return
    if step <= 0:
        raise DataValidationError("open_time must be strictly increasing at index 1", row=first_row + 1, rule=RULE_STEP)
    for i in range(2, len(candles)):
        gap = candles[i].open_time - candles[i - 1].open_time
        if gap != step:
            raise DataValidationError(
                f"step gap at index {i}: expected {step} ms, got {gap} ms", row=first_row + i, rule=RULE_STEP
            )


def load_ohlcv(path: str | Path) -> list[Candle]:
    path = Path(path)
    candles = []
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise DataValidationError(f"{path}: file is empty")
        if tuple(h.strip() for h in header) != HEADER:
            raise DataValidationError(f"{path}: header must be {','.join(HEADER)}", row=1)
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(HEADER):
                raise DataValidationError(f"{path}: expected {len(HEADER)} fields, got {len(row)}", row=lineno)
            try:
                candle = Candle(int(row[0]), *(float(v) for v in row[1:]))
            except ValueError as exc:
                raise DataValidationError(f"{path}: cannot parse {row!r} ({exc})", row=lineno) from None
            candles.append(candle)
    if not candles:
        raise DataValidationError(f"{path}: no candles")
    try:
        validate_series(candles)
    except DataValidationError as exc:
        raise DataValidationError(f"{path}: {exc.detail}", row=exc.row, rule=exc.rule) from None
    return candles


def write_ohlcv(candles: Sequence[Candle], path: str | Path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(HEADER)
        for c in candles:
            writer.writerow([c.open_time, repr(c.open), repr(c.high), repr(c.low), repr(c.close), repr(c.volume)])


@dataclass(frozen=True)
class AlignedMarket:
    step: int | None
    candles_pair: tuple[Candle, ...]
    candles_x_usd: tuple[Candle, ...]
    candles_y_usd: tuple[Candle, ...]
    dropped: dict = field(default_factory=dict)

    def __post_init__(self):
        times = [c.open_time for c in self.candles_pair]
        for other in (self.candles_x_usd, self.candles_y_usd):
            if [c.open_time for c in other] != times:
                raise DataValidationError("aligned series must share identical open_time sequences")
        object.__setattr__(self, "_index", {t: i for i, t in enumerate(times)})

    def __len__(self) -> int:
        return len(self.candles_pair)

    @property
    def times(self) -> list[int]:
        return [c.open_time for c in self.candles_pair]

    def index_of(self, t: int) -> int:
        try:
            return self._index[t]
        except KeyError:
            raise KeyError(f"timestamp {t} not in aligned market") from None

    def opens(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return tuple(
            np.array([c.open for c in s]) for s in (self.candles_pair, self.candles_x_usd, self.candles_y_usd)
        )


def align(pair: Sequence[Candle], x_usd: Sequence[Candle], y_usd: Sequence[Candle]) -> AlignedMarket:
    """Restrict the three series to their common timestamps."""
    series = {"pair": pair, "x_usd": x_usd, "y_usd": y_usd}
    for name, s in series.items():
        if not s:
            raise DataValidationError(f"{name} series is empty")
    steps = {series_step(s) for s in series.values()} - {None}
    if len(steps) > 1:
        raise DataValidationError(f"series have mismatched steps: {sorted(steps)}")
    common = set(c.open_time for c in pair) & set(c.open_time for c in x_usd) & set(c.open_time for c in y_usd)
    if not common:
        raise DataValidationError("series share no common timestamps")
    kept = {name: tuple(c for c in s if c.open_time in common) for name, s in series.items()}
    dropped = {name: len(series[name]) - len(kept[name]) for name in series}
    if any(dropped.values()):
        logger.info("alignment dropped rows: %s", dropped)
    return AlignedMarket(
        step=steps.pop() if steps else None,
        candles_pair=kept["pair"],
        candles_x_usd=kept["x_usd"],
        candles_y_usd=kept["y_usd"],
        dropped=dropped,
    )


def price_at(market: AlignedMarket, t: int) -> tuple[float, float, float]:
    """Open prices ``(p, p_x, p_y)`` at timestamp ``t``."""
    i = market.index_of(t)
    return market.candles_pair[i].open, market.candles_x_usd[i].open, market.candles_y_usd[i].open


def coherence_deviation(market: AlignedMarket) -> np.ndarray:
    """Per-candle ``|p - p_y/p_x| / p`` on open prices."""
    p, px, py = market.opens()
    return np.abs(p - py / px) / p


def coherence_check(market: AlignedMarket, threshold: float = COHERENCE_THRESHOLD) -> tuple[float, bool]:
    """Median cross-rate deviation and whether it exceeds ``threshold``."""
    median = float(np.median(coherence_deviation(market)))
    return median, median > threshold
