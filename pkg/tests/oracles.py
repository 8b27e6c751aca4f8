"""Independent reference computations used by the tests.

These drive the pool through explicit swaps and read results off the
resulting reserves; none of them call the closed forms they check.  The
value-difference oracles run the pool in 40-digit ``mpmath`` arithmetic so
that near-unchanged prices do not drown the loss in rounding noise.
"""

from __future__ import annotations

import mpmath
from scipy.optimize import brentq

from marginlp.cpmm import Pool, add_liquidity, marginal_price, remove_liquidity, swap_x_for_y, swap_y_for_x


def _solve_swap(pool: Pool, target: float, swap):
    """Input amount that moves the pool's marginal price to ``target`` through ``swap``."""
    start = marginal_price(pool)

    def gap(amount):
        return marginal_price(swap(pool, amount)[0]) / target - 1.0

    hi = pool.x_amount + pool.y_amount
    while gap(hi) * (1 if target > start else -1) < 0:
        hi *= 4.0
    return brentq(gap, 0.0, hi, xtol=1e-300, rtol=4 * 2.220446049250313e-16, maxiter=500)


def _float_pool(pool: Pool) -> Pool:
    return Pool(float(pool.x_amount), float(pool.y_amount), float(pool.liquidity), float(pool.retained_fraction))


def _as_mp(pool: Pool) -> Pool:
    x, y = mpmath.mpf(pool.x_amount), mpmath.mpf(pool.y_amount)
    return Pool(x, y, mpmath.sqrt(x * y), mpmath.mpf(pool.retained_fraction))


def drive_price(pool: Pool, target: float) -> tuple[Pool, float, float]:
    """Trade the pool to ``target`` with a single swap.

    The swap size is solved in floats; the swap itself runs in the pool's
    own number type.  Returns ``(pool', x_in, y_in)``; one input is zero.
    """
    shadow = _float_pool(pool)
    start = marginal_price(shadow)
    if target == start:
        return pool, 0.0, 0.0
    if target > start:
        dx = _solve_swap(shadow, target, swap_x_for_y)
        return swap_x_for_y(pool, type(pool.x_amount)(dx))[0], dx, 0.0
    dy = _solve_swap(shadow, target, swap_y_for_x)
    return swap_y_for_x(pool, type(pool.y_amount)(dy))[0], 0.0, dy


def path_volumes(liquidity: float, prices: list[float]) -> tuple[float, float]:
    """Exact X-in and Y-in volumes to walk a fixed-liquidity pool through ``prices``."""
    pool = Pool.from_amounts(liquidity * 1.0, liquidity * 1.0)
    pool = drive_price(pool, prices[0])[0]
    vx = vy = 0.0
    for target in prices[1:]:
        pool, x_in, y_in = drive_price(pool, target)
        vx += x_in
        vy += y_in
    return vx, vy


def numeric_price(pool: Pool, h: float = 1e-6) -> float:
    """``-dx/dy`` on the curve ``x = L^2 / y`` by central differences."""
    L2 = pool.liquidity**2
    y = pool.y_amount
    step = h * y
    return -(L2 / (y + step) - L2 / (y - step)) / (2 * step)


def lp_round_trip(pool: Pool, deposit_x: float, swap_x: float = 0.0, swap_y: float = 0.0):
    """Deposit at the pool ratio, let a trader swap, withdraw the same share.

    Returns ``(dx0, dx1, simulated_loss)`` where the loss is the X-valued
    difference between the withdrawn bundle and the deposited bundle held
    to the new price.
    """
    with mpmath.workdps(40):
        pool = _as_mp(pool)
        p0 = marginal_price(pool)
        dx0 = mpmath.mpf(deposit_x)
        dy0 = dx0 / p0
        before = pool.liquidity
        pool = add_liquidity(pool, dx0, dy0)
        share = (pool.liquidity - before) / pool.liquidity
        if swap_x:
            pool = swap_x_for_y(pool, mpmath.mpf(swap_x))[0]
        if swap_y:
            pool = swap_y_for_x(pool, mpmath.mpf(swap_y))[0]
        p1 = marginal_price(pool)
        _, dx1, dy1 = remove_liquidity(pool, share)
        loss = (dx1 + p1 * dy1) - (dx0 + p1 * dy0)
        return float(dx0), float(dx1), float(loss)


def simulated_loss_ratio(leverage: float, p0: float, p1: float, other_liquidity: float = 50.0):
    """Loss of ``leverage`` times a collateral bundle deposited at ``p0`` and withdrawn at ``p1``,
    over the collateral's value at ``p1``.

    Returns ``(ratio, actual_p0, actual_p1)`` as realized by the swaps.
    """
    with mpmath.workdps(40):
        pool = _as_mp(Pool.from_amounts(other_liquidity, other_liquidity))
        pool = drive_price(pool, p0)[0]
        p0a = marginal_price(pool)
        lev = mpmath.mpf(leverage)
        cy = mpmath.mpf(1)
        cx = p0a * cy
        before = pool.liquidity
        pool = add_liquidity(pool, lev * cx, lev * cy)
        share = (pool.liquidity - before) / pool.liquidity
        pool = drive_price(pool, p1)[0]
        p1a = marginal_price(pool)
        _, wx, wy = remove_liquidity(pool, share)
        held = lev * (cx + p1a * cy)
        withdrawn = wx + p1a * wy
        ratio = (held - withdrawn) / (cx + p1a * cy)
        return float(ratio), float(p0a), float(p1a)
