"""Margin and virtual-margin liquidity positions.

A margin position posts collateral ``(dx0, dy0)`` at the pool ratio,
borrows ``l`` times that bundle from a lender and deposits it as pool
liquidity.  A virtual position instead takes ownership of liquidity that
LPs already placed in the pool.  Both are liquidated once the divergence
loss of the borrowed liquidity reaches the collateral value.
"""

from __future__ import annotations

import enum
import math
from dataclasses import asdict, dataclass

from marginlp.cpmm import RATIO_RTOL, Pool, add_liquidity, marginal_price, remove_liquidity
from marginlp.errors import CapacityError, DomainError, PositionStateError, RatioViolationError


class PositionKind(str, enum.Enum):
    MARGIN = "Margin"
    VIRTUAL_MARGIN = "VirtualMargin"


class PositionStatus(str, enum.Enum):
    OPEN = "Open"
    CLOSED_VOLUNTARY = "ClosedVoluntary"
    LIQUIDATED = "Liquidated"


@dataclass
class MarginPosition:
    collateral_x: float
    collateral_y: float
    leverage: float
    entry_price: float
    open_time: int
    kind: PositionKind = PositionKind.MARGIN
    status: PositionStatus = PositionStatus.OPEN
    lent_liquidity: float = 0.0
    fee_rate_per_time: float = 0.0

    def __post_init__(self):
        _check_collateral(self.collateral_x, self.collateral_y)
        _check_leverage(self.leverage)
        if not self.entry_price > 0:
            raise DomainError(f"entry price must be positive, got {self.entry_price}")
        if abs(self.collateral_x - self.entry_price * self.collateral_y) > RATIO_RTOL * self.collateral_x:
            raise RatioViolationError(
                f"collateral ratio {self.collateral_x / self.collateral_y!r} "
                f"differs from entry price {self.entry_price!r}"
            )
        self.kind = PositionKind(self.kind)
        self.status = PositionStatus(self.status)

    @property
    def is_open(self) -> bool:
        return self.status is PositionStatus.OPEN

    def collateral_value(self, price_x: float, price_y: float) -> float:
        return price_x * self.collateral_x + price_y * self.collateral_y

    def to_dict(self) -> dict:
        d = asdict(self)
        d["kind"] = self.kind.value
        d["status"] = self.status.value
        return d


@dataclass(frozen=True)
class Settlement:
    returned_to_owner_x: float
    returned_to_owner_y: float
    returned_to_lender_x: float
    returned_to_lender_y: float
    loss_ratio: float
    position_fee_fraction: float = 0.0

    def to_dict(self) -> dict:
        return asdict(self)


def _check_collateral(dx: float, dy: float) -> None:
    if not (dx > 0 and dy > 0):
        raise DomainError(f"collateral must be positive in both tokens, got ({dx}, {dy})")


def _check_leverage(leverage: float) -> None:
    if not leverage > 1:
        raise DomainError(f"leverage must exceed 1, got {leverage}")


def split_collateral(budget_usd: float, pair_price: float, price_x_usd: float, price_y_usd: float):
    """Split a USD budget into ``(dx, dy)`` worth ``budget_usd`` with ``dx/dy == pair_price``."""
    if min(budget_usd, pair_price, price_x_usd, price_y_usd) <= 0:
        raise DomainError("budget and prices must all be positive")
    dy = budget_usd / (price_y_usd + price_x_usd * pair_price)
    return pair_price * dy, dy


def raw_loss_ratio(leverage: float, entry_price: float, current_price: float) -> float:
    """Divergence loss of the borrowed liquidity over the collateral value, unclamped."""
    _check_leverage(leverage)
    if not (entry_price > 0 and current_price > 0):
        raise DomainError("prices must be positive")
    # l * (sqrt(k) - 1)^2 / (1 + k) rewritten to avoid cancellation near k = 1
    diff = current_price - entry_price
    root_sum = math.sqrt(current_price) + math.sqrt(entry_price)
    return leverage * diff * diff / (root_sum * root_sum * (entry_price + current_price))


def loss_ratio(leverage: float, entry_price: float, current_price: float) -> float:
    """Loss ratio clamped to ``[0, 1]``; the lender never takes more than the collateral."""
    return min(raw_loss_ratio(leverage, entry_price, current_price), 1.0)


def liquidation_bounds(leverage: float) -> tuple[float, float]:
    """Price-change ratios ``p1/p0`` at which the loss ratio reaches one.

    The two bounds are reciprocal.
    """
    _check_leverage(leverage)
    s = math.sqrt(2.0 * leverage - 1.0)
    high = ((leverage + s) / (leverage - 1.0)) ** 2
    low = ((leverage - 1.0) / (leverage + s)) ** 2
    return low, high


def check_liquidation(position: MarginPosition, current_price: float) -> bool:
    if not current_price > 0:
        raise DomainError(f"price must be positive, got {current_price}")
    low, high = liquidation_bounds(position.leverage)
    ratio = current_price / position.entry_price
    return not (low <= ratio <= high)


def open_margin_position(pool: Pool, collateral: tuple[float, float], leverage: float, time: int):
    """Borrow ``leverage`` times the collateral and deposit it into ``pool``.

    Returns ``(position, lent_liquidity, new_pool)``.
    """
    dx, dy = collateral
    _check_collateral(dx, dy)
    _check_leverage(leverage)
    price = marginal_price(pool)
    if abs(dx - price * dy) > RATIO_RTOL * dx:
        raise RatioViolationError(f"collateral ratio {dx / dy!r} differs from pool price {price!r}")
    new_pool = add_liquidity(pool, leverage * dx, leverage * dy)
    lent = leverage * math.sqrt(dx * dy)
    position = MarginPosition(dx, dy, leverage, price, time, lent_liquidity=lent)
    return position, lent, new_pool


def _require_open(position: MarginPosition) -> None:
    if not position.is_open:
        raise PositionStateError(f"position is already {position.status.value}")


def close_margin_position(position: MarginPosition, pool: Pool, current_price: float, *, liquidate=False):
    """Withdraw the borrowed liquidity and settle with the lender.

    ``pool`` must already trade at ``current_price``.  ``liquidate=True``
    forces a liquidation, used when a bound was crossed between samples.
    Returns ``(settlement, new_pool)``.
    """
    _require_open(position)
    if position.kind is not PositionKind.MARGIN:
        raise PositionStateError("virtual positions settle through settle_virtual_position")
    pool_price = marginal_price(pool)
    if abs(pool_price - current_price) > RATIO_RTOL * current_price:
        raise DomainError(f"pool price {pool_price!r} differs from close price {current_price!r}")
    share = min(position.lent_liquidity / pool.liquidity, 1.0)
    new_pool, wx, wy = remove_liquidity(pool, share)

    raw = raw_loss_ratio(position.leverage, position.entry_price, current_price)
    liquidated = liquidate or raw >= 1.0 or check_liquidation(position, current_price)
    r = 1.0 if liquidated else raw
    cx, cy = position.collateral_x, position.collateral_y
    settlement = Settlement(
        returned_to_owner_x=(1.0 - r) * cx,
        returned_to_owner_y=(1.0 - r) * cy,
        returned_to_lender_x=wx + r * cx,
        returned_to_lender_y=wy + r * cy,
        loss_ratio=r,
    )
    position.status = PositionStatus.LIQUIDATED if liquidated else PositionStatus.CLOSED_VOLUNTARY
    return settlement, new_pool


def open_virtual_position(
    lp_liquidity_available: float,
    collateral: tuple[float, float],
    leverage: float,
    fee_rate_per_time: float,
    time: int,
) -> MarginPosition:
    """Take ownership of ``leverage * sqrt(dx*dy)`` of existing LP liquidity.

    Pool reserves are untouched; only ownership of swap-fee income moves.
    """
    dx, dy = collateral
    _check_collateral(dx, dy)
    _check_leverage(leverage)
    if fee_rate_per_time < 0:
        raise DomainError("fee rate must be nonnegative")
    owned = leverage * math.sqrt(dx * dy)
    if owned > lp_liquidity_available:
        raise CapacityError(f"requested liquidity {owned!r} exceeds available {lp_liquidity_available!r}")
    return MarginPosition(
        dx,
        dy,
        leverage,
        dx / dy,
        time,
        kind=PositionKind.VIRTUAL_MARGIN,
        lent_liquidity=owned,
        fee_rate_per_time=fee_rate_per_time,
    )


def virtual_fee_share(position: MarginPosition, pool: Pool) -> float:
    """Fraction of the pool's swap fees owed to a virtual position."""
    if pool.liquidity <= 0:
        raise DomainError("pool has no liquidity")
    return position.lent_liquidity / pool.liquidity


def settle_virtual_position(position: MarginPosition, current_price: float, elapsed_time: float) -> Settlement:
    """Compensate LPs for divergence loss and pay the position fee.

    The fee accrues linearly: a fraction ``fee_rate_per_time * elapsed_time``
    of the collateral bundle, i.e. that fraction of its value at entry,
    capped by whatever collateral the loss leaves.
    """
    _require_open(position)
    if position.kind is not PositionKind.VIRTUAL_MARGIN:
        raise PositionStateError("margin positions settle through close_margin_position")
    if elapsed_time < 0:
        raise DomainError("elapsed time must be nonnegative")
    raw = raw_loss_ratio(position.leverage, position.entry_price, current_price)
    liquidated = raw >= 1.0 or check_liquidation(position, current_price)
    r = 1.0 if liquidated else raw
    fee = min(position.fee_rate_per_time * elapsed_time, 1.0 - r)
    cx, cy = position.collateral_x, position.collateral_y
    owner = 1.0 - r - fee
    settlement = Settlement(
        returned_to_owner_x=owner * cx,
        returned_to_owner_y=owner * cy,
        returned_to_lender_x=(r + fee) * cx,
        returned_to_lender_y=(r + fee) * cy,
        loss_ratio=r,
        position_fee_fraction=fee,
    )
    position.status = PositionStatus.LIQUIDATED if liquidated else PositionStatus.CLOSED_VOLUNTARY
    return settlement
