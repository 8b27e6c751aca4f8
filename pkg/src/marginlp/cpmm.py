"""Constant-product pool state and price identities.

A pool holds ``x_amount`` of token X and ``y_amount`` of token Y with
``x_amount * y_amount == liquidity ** 2``.  Prices are plain floats giving
the marginal price of Y in units of X.  Every mutating operation returns a
new :class:`Pool`; swap fees are handed back to the caller and never
reinvested into the pool.

The arithmetic is generic: besides floats, any real type with ``**`` and
the usual operators (e.g. ``mpmath.mpf``) flows through unchanged.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from marginlp.errors import DomainError, RatioViolationError

PRODUCT_RTOL = 1e-12
RATIO_RTOL = 1e-9


def _sqrt(v):
    return math.sqrt(v) if isinstance(v, (float, int)) else v**0.5


def _close(a: float, b: float, rtol: float) -> bool:
    return abs(a - b) <= rtol * max(abs(a), abs(b))


@dataclass(frozen=True)
class Pool:
    x_amount: float
    y_amount: float
    liquidity: float
    retained_fraction: float = 1.0

    def __post_init__(self):
        if self.x_amount < 0 or self.y_amount < 0 or self.liquidity < 0:
            raise DomainError(f"pool amounts must be nonnegative, got {self}")
        if not 0 < self.retained_fraction <= 1:
            raise DomainError(f"retained_fraction must lie in (0, 1], got {self.retained_fraction}")
        product = self.x_amount * self.y_amount
        if not _close(product, self.liquidity**2, PRODUCT_RTOL):
            raise DomainError(
                f"x*y = {product!r} does not match L^2 = {self.liquidity**2!r}"
            )

    @classmethod
    def from_amounts(cls, x_amount: float, y_amount: float, retained_fraction: float = 1.0) -> Pool:
        if x_amount < 0 or y_amount < 0:
            raise DomainError("pool amounts must be nonnegative")
        return cls(x_amount, y_amount, _sqrt(x_amount * y_amount), retained_fraction)

    @classmethod
    def at_price(cls, liquidity: float, price: float, retained_fraction: float = 1.0) -> Pool:
        x, y = amounts_at_price(liquidity, price)
        return cls(x, y, liquidity, retained_fraction)

    @property
    def fee_fraction(self) -> float:
        return 1.0 - self.retained_fraction

    @property
    def is_empty(self) -> bool:
        return self.x_amount == 0 or self.y_amount == 0


def marginal_price(pool: Pool) -> float:
    """Price of Y in X: ``-dx/dy`` along the curve, i.e. ``x / y``."""
    if pool.y_amount <= 0:
        raise DomainError("marginal price undefined for a pool with no Y")
    return pool.x_amount / pool.y_amount


def amounts_at_price(liquidity: float, price: float) -> tuple[float, float]:
    """Reserves ``(L*sqrt(p), L/sqrt(p))`` of a pool with liquidity ``L`` at price ``p``."""
    if liquidity < 0:
        raise DomainError(f"liquidity must be nonnegative, got {liquidity}")
    if not price > 0:
        raise DomainError(f"price must be positive, got {price}")
    root = _sqrt(price)
    return liquidity * root, liquidity / root


def price_ratio_from_x(x_old: float, x_new: float) -> float:
    """``p_new / p_old`` on a fixed-liquidity curve, from the X reserves alone."""
    if x_old <= 0:
        raise DomainError("x_old must be positive")
    return (x_new / x_old) ** 2


def add_liquidity(pool: Pool, dx: float, dy: float) -> Pool:
    if dx < 0 or dy < 0:
        raise DomainError(f"deposit amounts must be nonnegative, got ({dx}, {dy})")
    if dx == 0 and dy == 0:
        return pool
    if pool.is_empty:
        # seeding deposit sets the price
        return Pool.from_amounts(pool.x_amount + dx, pool.y_amount + dy, pool.retained_fraction)
    if not _close(dx * pool.y_amount, dy * pool.x_amount, RATIO_RTOL):
        raise RatioViolationError(
            f"deposit ratio {dx}/{dy} does not match pool ratio {pool.x_amount}/{pool.y_amount}"
        )
    return Pool.from_amounts(pool.x_amount + dx, pool.y_amount + dy, pool.retained_fraction)


def remove_liquidity(pool: Pool, share: float) -> tuple[Pool, float, float]:
    """Withdraw ``share`` of every reserve; returns ``(pool', dx, dy)``."""
    if not 0 <= share <= 1:
        raise DomainError(f"share must lie in [0, 1], got {share}")
    dx = share * pool.x_amount
    dy = share * pool.y_amount
    keep = 1.0 - share
    new_pool = Pool(
        pool.x_amount * keep, pool.y_amount * keep, pool.liquidity * keep, pool.retained_fraction
    )
    return new_pool, dx, dy


def _swap(reserve_in: float, reserve_out: float, amount_in: float, phi: float):
    retained = phi * amount_in
    denom = reserve_in + retained
    amount_out = reserve_out * retained / denom
    # computed directly instead of reserve_out - amount_out to avoid cancellation
    new_out = reserve_out * reserve_in / denom
    return reserve_in + retained, new_out, amount_out, amount_in - retained


def swap_x_for_y(pool: Pool, dx_in: float) -> tuple[Pool, float, float]:
    """Sell ``dx_in`` of X.  Returns ``(pool', dy_out, fee_x)``."""
    if dx_in < 0:
        raise DomainError(f"swap input must be nonnegative, got {dx_in}")
    if pool.is_empty:
        raise DomainError("cannot swap against an empty pool")
    if dx_in == 0:
        return pool, 0.0, 0.0
    new_x, new_y, dy_out, fee_x = _swap(pool.x_amount, pool.y_amount, dx_in, pool.retained_fraction)
    return Pool(new_x, new_y, pool.liquidity, pool.retained_fraction), dy_out, fee_x


def swap_y_for_x(pool: Pool, dy_in: float) -> tuple[Pool, float, float]:
    """Sell ``dy_in`` of Y.  Returns ``(pool', dx_out, fee_y)``."""
    if dy_in < 0:
        raise DomainError(f"swap input must be nonnegative, got {dy_in}")
    if pool.is_empty:
        raise DomainError("cannot swap against an empty pool")
    if dy_in == 0:
        return pool, 0.0, 0.0
    new_y, new_x, dx_out, fee_y = _swap(pool.y_amount, pool.x_amount, dy_in, pool.retained_fraction)
    return Pool(new_x, new_y, pool.liquidity, pool.retained_fraction), dx_out, fee_y


def quoted_amount_y(liquidity: float, p_a: float, p_b: float) -> float:
    """Amount of Y the curve quotes between prices ``p_a <= p_b``."""
    if not 0 < p_a <= p_b:
        raise DomainError(f"need 0 < p_a <= p_b, got ({p_a}, {p_b})")
    return liquidity * (1.0 / _sqrt(p_a) - 1.0 / _sqrt(p_b))


def divergence_loss(dx0: float, dx1: float) -> float:
    """Loss in X of withdrawing vs holding, given deposited ``dx0`` and withdrawn ``dx1`` of X.

    Always nonpositive.
    """
    if dx0 <= 0:
        raise DomainError(f"deposited amount must be positive, got {dx0}")
    if dx1 < 0:
        raise DomainError(f"withdrawn amount must be nonnegative, got {dx1}")
    return -((dx1 - dx0) ** 2) / dx0


def value_in_x(dx: float, dy: float, price: float) -> float:
    """Value of a bundle in units of X at price ``price`` (X per Y)."""
    return dx + price * dy
