"""Implied volatilities of swaption prices and the smile shift caused by XVA.

Both inversions work on time value, ``price - annuity * max(F - K, 0)``, and
solve with Brent's method on a bracket that starts at zero volatility. A price
below intrinsic, or a zero price, has no implied volatility; that is returned
as an explicit outcome because with XVA it marks strikes where the option is
never worth exercising.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Mapping, Sequence

import numpy as np
from scipy.optimize import brentq
from scipy.special import ndtr

from .instruments import SwapSpec, swap_legs, swap_rates
from .ratesim import PathSet, discount_curve

_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)
_MAX_DOUBLINGS = 200


class Outcome(str, Enum):
    SOLVED = "solved"
    NO_SOLUTION = "no-solution"


@dataclass(frozen=True)
class ImpliedVol:
    vol: float | None
    outcome: Outcome

    @property
    def ok(self) -> bool:
        return self.outcome is Outcome.SOLVED


NO_SOLUTION = ImpliedVol(None, Outcome.NO_SOLUTION)


def _check(price, expiry, annuity):
    if price < 0:
        raise ValueError(f"negative price {price}")
    if expiry <= 0:
        raise ValueError("expiry must be positive")
    if annuity <= 0:
        raise ValueError("annuity must be positive")


def bachelier_price(forward, strike, expiry, annuity, vol):
    """Payer price under normal dynamics of the swap rate."""
    m = forward - strike
    s = vol * math.sqrt(expiry)
    if s == 0.0:
        return annuity * max(m, 0.0)
    d = m / s
    return annuity * (m * ndtr(d) + s * _INV_SQRT_2PI * math.exp(-0.5 * d * d))


def black_price(forward, strike, expiry, annuity, vol, shift=0.0):
    """Payer price under shifted lognormal dynamics of the swap rate."""
    f, k = forward + shift, strike + shift
    if f <= 0 or k <= 0:
        raise ValueError("shifted forward and strike must be positive")
    s = vol * math.sqrt(expiry)
    if s == 0.0:
        return annuity * max(f - k, 0.0)
    d1 = (math.log(f / k) + 0.5 * s * s) / s
    return annuity * (f * ndtr(d1) - k * ndtr(d1 - s))


def _otm_normal(m_abs, expiry, vol):
    # out-of-the-money Bachelier price per unit annuity; equals ITM time value
    s = vol * math.sqrt(expiry)
    if s == 0.0:
        return 0.0
    d = -m_abs / s
    return -m_abs * ndtr(d) + s * _INV_SQRT_2PI * math.exp(-0.5 * d * d)


def _solve(f, upper_start):
    hi = upper_start
    for _ in range(_MAX_DOUBLINGS):
        if f(hi) > 0:
            break
        hi *= 2.0
    else:
        return None
    return brentq(f, 0.0, hi, xtol=1e-16, rtol=4 * np.finfo(float).eps, maxiter=500)


def normal_implied_vol(price, forward, strike, expiry, annuity) -> ImpliedVol:
    _check(price, expiry, annuity)
    if price == 0.0:
        return NO_SOLUTION
    m = forward - strike
    tv = price / annuity - max(m, 0.0)
    if tv < 0.0:
        return NO_SOLUTION
    if tv == 0.0:
        return ImpliedVol(0.0, Outcome.SOLVED)
    m_abs = abs(m)
    vol = _solve(lambda v: _otm_normal(m_abs, expiry, v) - tv,
                 max(tv, m_abs) / math.sqrt(expiry))
    return NO_SOLUTION if vol is None else ImpliedVol(vol, Outcome.SOLVED)


def lognormal_implied_vol(price, forward, strike, expiry, annuity, shift=0.0) -> ImpliedVol:
    _check(price, expiry, annuity)
    if price == 0.0:
        return NO_SOLUTION
    f, k = forward + shift, strike + shift
    if f <= 0 or k <= 0:
        return NO_SOLUTION
    p = price / annuity
    tv = p - max(f - k, 0.0)
    if tv < 0.0 or p >= f:
        return NO_SOLUTION
    if tv == 0.0:
        return ImpliedVol(0.0, Outcome.SOLVED)
    # out-of-the-money side by parity: payer and receiver share time value
    if f > k:
        otm = lambda v: black_price(f, k, expiry, 1.0, v) - (f - k)
    else:
        otm = lambda v: black_price(f, k, expiry, 1.0, v)
    vol = _solve(lambda v: otm(v) - tv, 0.2)
    return NO_SOLUTION if vol is None else ImpliedVol(vol, Outcome.SOLVED)


@dataclass(frozen=True)
class SmilePoint:
    curve: str
    strike: float  # decimal
    forward: float  # decimal
    expiry: float  # years
    annuity: float  # currency per unit notional
    price: float  # currency
    implied_vol_normal: float | None  # decimal per sqrt(year)
    normal_outcome: Outcome
    implied_vol_lognormal: float | None
    lognormal_outcome: Outcome

    def __post_init__(self):
        if self.price < 0:
            raise ValueError("price must be non-negative")

    @property
    def no_solution(self) -> bool:
        return self.normal_outcome is Outcome.NO_SOLUTION


def forward_and_annuity(ps: PathSet, swap: SwapSpec) -> tuple[float, float]:
    """Par rate and fixed-leg annuity of ``swap`` on the t=0 curve."""
    legs = swap_legs(ps, 0, swap)
    annuity = float(legs.annuity(discount_curve(ps, 0))[0])
    return float(swap_rates(ps, 0, swap)[0]), annuity


def smile_point(curve, price, forward, strike, expiry, annuity, shift=0.0,
                receiver: bool = False) -> SmilePoint:
    """Implied vols of one option price per unit notional.

    A receiver price is mapped to the payer price by parity, which keeps time
    value; a zero or negative price has no solution on either side.
    """
    price = max(float(price), 0.0)
    if price == 0.0:
        return SmilePoint(curve, strike, forward, expiry, annuity, 0.0,
                          None, Outcome.NO_SOLUTION, None, Outcome.NO_SOLUTION)
    payer = price + annuity * (forward - strike) if receiver else price
    payer = max(payer, 0.0)
    n = normal_implied_vol(payer, forward, strike, expiry, annuity)
    ln = lognormal_implied_vol(payer, forward, strike, expiry, annuity, shift)
    return SmilePoint(curve, strike, forward, expiry, annuity, price,
                      n.vol, n.outcome, ln.vol, ln.outcome)


def smile_report(curves: Mapping[str, Sequence], forward: float, expiry: float,
                 annuity: float, notional: float = 1.0, shift: float = 0.0,
                 plain_curve: str | None = None, receiver: bool = False) -> list:
    """Smile points for each named curve of ExerciseReports.

    Each curve uses the with-XVA value of its reports except ``plain_curve``,
    which uses the no-XVA value (the cash-settled option carries no XVA).
    """
    out = []
    for name, reports in curves.items():
        for rep in reports:
            price = rep.value_noxva if name == plain_curve else rep.value_xva
            out.append(smile_point(name, price / notional, forward, rep.strike, expiry,
                                   annuity, shift, receiver))
    return out
