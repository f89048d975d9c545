"""Swaps and European swaptions valued pathwise on a simulated curve.

Single-curve valuation. The floating leg accrues on the tenor grid, so its
value is ``P(t, start) - P(t, end)`` before the start and
``(1 + tau L_fix) P(t, T_next) - P(t, end)`` once the current period has fixed.
Values at a date exclude cashflows paid on that date.

All valuations are linear in the discount curve: a swap at a grid date is a
pair of coefficient arrays (float leg, fixed annuity) over the tenor points.
Margin and capital revaluation reuse that representation.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .ratesim import GRID_TOL, PathSet, discount_curve

BP = 1e-4


class Direction(str, Enum):
    PAYER = "payer"
    RECEIVER = "receiver"

    @property
    def sign(self) -> float:
        return 1.0 if self is Direction.PAYER else -1.0


class Settlement(str, Enum):
    PHYSICAL = "physical"
    CASH = "cash"


@dataclass(frozen=True)
class SwapSpec:
    notional: float
    fixed_rate: float
    start: float
    end: float
    fixed_dates: tuple  # payment dates of the fixed leg, on the tenor grid
    direction: Direction = Direction.PAYER

    def __post_init__(self):
        object.__setattr__(self, "direction", Direction(self.direction))
        dates = tuple(float(x) for x in self.fixed_dates)
        object.__setattr__(self, "fixed_dates", dates)
        if not self.end > self.start:
            raise ValueError("swap end must be after start")
        if not dates or any(b <= a for a, b in zip((self.start,) + dates, dates)):
            raise ValueError("fixed dates must be increasing and after the start")
        if abs(dates[-1] - self.end) > GRID_TOL:
            raise ValueError("last fixed date must equal the swap end")

    @classmethod
    def regular(cls, notional, fixed_rate, start, tenor_years, fixed_freq=1.0,
                direction=Direction.PAYER) -> "SwapSpec":
        n = int(round(tenor_years / fixed_freq))
        dates = tuple(start + fixed_freq * (i + 1) for i in range(n))
        return cls(notional, fixed_rate, start, start + n * fixed_freq, dates, direction)

    def with_rate(self, fixed_rate: float) -> "SwapSpec":
        return SwapSpec(self.notional, fixed_rate, self.start, self.end,
                        self.fixed_dates, self.direction)

    def flipped(self) -> "SwapSpec":
        other = Direction.RECEIVER if self.direction is Direction.PAYER else Direction.PAYER
        return SwapSpec(self.notional, self.fixed_rate, self.start, self.end,
                        self.fixed_dates, other)

    def check_grid(self, ps: PathSet) -> None:
        for T in (self.start, self.end) + self.fixed_dates:
            ps.tenor_index(T)


@dataclass(frozen=True)
class SwaptionSpec:
    expiry: float
    underlying: SwapSpec
    settlement: Settlement = Settlement.PHYSICAL

    def __post_init__(self):
        object.__setattr__(self, "settlement", Settlement(self.settlement))
        if abs(self.expiry - self.underlying.start) > GRID_TOL:
            raise ValueError("swaption expiry must equal the underlying start")

    @property
    def strike(self) -> float:
        return self.underlying.fixed_rate


@dataclass(frozen=True)
class Legs:
    """Per-path coefficients on P(t, T_j): value = scale * (flt.P - K * ann.P)."""

    flt: np.ndarray  # (n_paths, n_tenor)
    ann: np.ndarray  # (n_tenor,)
    scale: float
    rate: float

    @property
    def coef(self) -> np.ndarray:
        return self.scale * (self.flt - self.rate * self.ann[None, :])

    def value(self, P: np.ndarray) -> np.ndarray:
        Pz = np.nan_to_num(P)
        return self.scale * (np.sum(self.flt * Pz, axis=1) - self.rate * (Pz @ self.ann))

    def annuity(self, P: np.ndarray) -> np.ndarray:
        return np.nan_to_num(P) @ self.ann


def swap_legs(ps: PathSet, d: int, spec: SwapSpec) -> Legs:
    """Coefficient form of the swap's remaining cashflows at grid date ``d``."""
    t = ps.date_grid[d]
    n_t = ps.tenor_grid.size
    flt = np.zeros((ps.n_paths, n_t))
    ann = np.zeros(n_t)
    scale = spec.notional * spec.direction.sign
    if t >= spec.end - GRID_TOL:
        return Legs(flt, ann, scale, spec.fixed_rate)
    j_start = ps.tenor_index(spec.start)
    j_end = ps.tenor_index(spec.end)
    if t <= spec.start + GRID_TOL:
        flt[:, j_start] = 1.0
    else:
        m = ps.front_index(d)
        if ps.tenor_grid[m] - t <= GRID_TOL:
            flt[:, m] = 1.0
        else:
            fix = ps.forwards[:, d, m - 1]
            flt[:, m] = 1.0 + ps.accruals[m - 1] * fix
    flt[:, j_end] -= 1.0
    prev = spec.start
    for T in spec.fixed_dates:
        if T > t + GRID_TOL:
            ann[ps.tenor_index(T)] += T - prev
        prev = T
    return Legs(flt, ann, scale, spec.fixed_rate)


def swap_values(ps: PathSet, d: int, spec: SwapSpec, bump: float = 0.0) -> np.ndarray:
    return swap_legs(ps, d, spec).value(discount_curve(ps, d, bump))


def swap_value(ps: PathSet, path: int, t: float, spec: SwapSpec) -> float:
    d = ps.date_index(t)
    return float(swap_values(ps, d, spec)[path])


def swap_rates(ps: PathSet, d: int, spec: SwapSpec) -> np.ndarray:
    legs = swap_legs(ps, d, spec)
    P = discount_curve(ps, d)
    return np.sum(legs.flt * np.nan_to_num(P), axis=1) / legs.annuity(P)


def swap_rate(ps: PathSet, path: int, t: float, spec: SwapSpec) -> float:
    d = ps.date_index(t)
    if t >= spec.end - GRID_TOL:
        raise ValueError("no remaining fixed payments")
    return float(swap_rates(ps, d, spec)[path])


def swap_delta(ps: PathSet, t: float, spec: SwapSpec) -> float:
    """Mean value change per +1bp parallel bump of the unfixed forwards."""
    d = ps.date_index(t)
    base = swap_values(ps, d, spec)
    bumped = swap_values(ps, d, spec, bump=BP)
    return float(np.mean(bumped - base))


def swap_cashflows(ps: PathSet, d: int, spec: SwapSpec) -> np.ndarray:
    """Net cashflow paid at grid date ``d`` on each path (payer sign convention)."""
    t = ps.date_grid[d]
    out = np.zeros(ps.n_paths)
    if t <= spec.start + GRID_TOL or t > spec.end + GRID_TOL:
        return out
    tenor = ps.tenor_grid
    j = int(np.searchsorted(tenor, t - GRID_TOL))
    if j < tenor.size and abs(tenor[j] - t) <= GRID_TOL and j >= 1:
        out += ps.accruals[j - 1] * ps.forwards[:, d, j - 1]
    prev = spec.start
    for T in spec.fixed_dates:
        if abs(T - t) <= GRID_TOL:
            out -= spec.fixed_rate * (T - prev)
        prev = T
    return spec.notional * spec.direction.sign * out
