"""Initial margin by historical expected shortfall, and regulatory capital.

Initial margin revalues the portfolio under every historical shock to the
pathwise zero curve, takes the 97.5% expected shortfall of the P&L and scales
it from the 5-day shock horizon to 10 days. Capital is a current-exposure
style counterparty charge plus a scenario-grid market-risk charge.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .instruments import SwapSpec, swap_legs
from .ratesim import GRID_TOL, PathSet, discount_curve


@dataclass(frozen=True)
class ShockSeries:
    """Absolute zero-yield shocks, one row per historical scenario."""

    tenors: np.ndarray
    shocks: np.ndarray

    def __post_init__(self):
        tenors = np.asarray(self.tenors, dtype=float)
        shocks = np.asarray(self.shocks, dtype=float)
        if tenors.ndim != 1 or tenors.size == 0 or np.any(np.diff(tenors) <= 0):
            raise ValueError("shock tenors must be strictly increasing")
        if shocks.ndim != 2 or shocks.shape[1] != tenors.size:
            raise ValueError("shock matrix must be rectangular with one column per tenor")
        if not np.all(np.isfinite(shocks)):
            raise ValueError("shocks must be finite")
        object.__setattr__(self, "tenors", tenors)
        object.__setattr__(self, "shocks", shocks)

    def __len__(self):
        return self.shocks.shape[0]

    def at(self, maturities) -> np.ndarray:
        """Shocks interpolated to residual maturities, flat beyond the ends."""
        m = np.asarray(maturities, dtype=float)
        idx = np.searchsorted(self.tenors, m)
        lo = np.clip(idx - 1, 0, self.tenors.size - 1)
        hi = np.clip(idx, 0, self.tenors.size - 1)
        span = self.tenors[hi] - self.tenors[lo]
        w = np.where(span > 0, (m - self.tenors[lo]) / np.where(span > 0, span, 1.0), 0.0)
        w = np.clip(w, 0.0, 1.0)
        return self.shocks[:, lo] * (1 - w) + self.shocks[:, hi] * w

    @classmethod
    def synthetic(cls, tenors, daily_vols, correlation: float = 0.9, n_scenarios: int = 2500,
                  overlap_days: int = 5, seed: int = 0) -> "ShockSeries":
        """Overlapping multi-day sums of correlated normal daily shocks."""
        tenors = np.asarray(tenors, dtype=float)
        vols = np.broadcast_to(np.asarray(daily_vols, dtype=float), tenors.shape)
        # exponential decay of correlation with tenor distance
        dist = np.abs(tenors[:, None] - tenors[None, :])
        corr = correlation ** (dist / max(dist.max(), 1.0))
        chol = np.linalg.cholesky(corr)
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))
        daily = rng.standard_normal((n_scenarios + overlap_days - 1, tenors.size)) @ chol.T * vols
        c = np.vstack([np.zeros(tenors.size), np.cumsum(daily, axis=0)])
        windows = c[overlap_days:] - c[:-overlap_days]
        return cls(tenors, windows[:n_scenarios])

    @classmethod
    def read_csv(cls, path) -> "ShockSeries":
        """Header row of tenors in years, then one row of decimal shocks per date."""
        path = Path(path)
        with path.open(newline="") as fh:
            rows = list(csv.reader(fh))
        if not rows:
            raise ValueError(f"{path}: empty shock file")
        try:
            tenors = [float(x) for x in rows[0]]
        except ValueError as exc:
            raise ValueError(f"{path}:1: header must be tenors in years ({exc})") from None
        data = []
        for lineno, row in enumerate(rows[1:], start=2):
            if not row:
                continue
            if len(row) != len(tenors):
                raise ValueError(f"{path}:{lineno}: expected {len(tenors)} fields, got {len(row)}")
            try:
                data.append([float(x) for x in row])
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from None
        if not data:
            raise ValueError(f"{path}: no shock rows")
        return cls(np.array(tenors), np.array(data))

    def write_csv(self, path) -> None:
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow([repr(float(t)) for t in self.tenors])
            for row in self.shocks:
                w.writerow([repr(float(x)) for x in row])


@dataclass(frozen=True)
class ImConfig:
    es_level: float = 0.975
    horizon_scale: float = math.sqrt(2.0)
    overlap_days: int = 5

    def __post_init__(self):
        if not 0.5 < self.es_level < 1.0:
            raise ValueError("es_level must lie in (0.5, 1)")
        if not self.horizon_scale > 0:
            raise ValueError("horizon_scale must be positive")


# maturity upper bound (years), absolute yield shift; coupons below the
# threshold use the second table
DEFAULT_YIELD_SHIFTS = (
    (1.0, 0.0100), (2.0, 0.0090), (3.0, 0.0080), (4.0, 0.0075), (5.0, 0.0075),
    (7.0, 0.0070), (10.0, 0.0065), (15.0, 0.0060), (20.0, 0.0060), (math.inf, 0.0060),
)
DEFAULT_LOW_COUPON_SHIFTS = (
    (1.0, 0.0100), (1.9, 0.0090), (2.8, 0.0080), (3.6, 0.0075), (4.3, 0.0075),
    (5.7, 0.0070), (7.3, 0.0065), (9.3, 0.0060), (10.6, 0.0060), (math.inf, 0.0060),
)
DEFAULT_ADDONS = ((1.0, 0.0), (5.0, 0.005), (math.inf, 0.015))


@dataclass(frozen=True)
class CapitalConfig:
    counterparty_rating: str = "BB"
    risk_weight: float = 1.0
    capital_ratio: float = 0.08
    ccr_addon_table: tuple = DEFAULT_ADDONS
    vol_scenarios: tuple = (-0.25, 0.0, 0.25)
    yield_shift: tuple = DEFAULT_YIELD_SHIFTS
    low_coupon_yield_shift: tuple = DEFAULT_LOW_COUPON_SHIFTS
    coupon_threshold: float = 0.03
    include_market_risk: bool = True

    def __post_init__(self):
        if self.risk_weight < 0 or self.capital_ratio < 0:
            raise ValueError("weights must be non-negative")
        if len(self.vol_scenarios) != 3:
            raise ValueError("scenario grid must be 3x3")
        for table in (self.ccr_addon_table, self.yield_shift, self.low_coupon_yield_shift):
            bounds = [b for b, _ in table]
            if any(b2 <= b1 for b1, b2 in zip(bounds, bounds[1:])) or any(v < 0 for _, v in table):
                raise ValueError("lookup tables need increasing bounds and non-negative values")

    def addon(self, maturity: float) -> float:
        return _lookup(self.ccr_addon_table, maturity)

    def shift(self, maturity: float, coupon: float) -> float:
        table = self.yield_shift if coupon >= self.coupon_threshold else self.low_coupon_yield_shift
        return _lookup(table, maturity)


def _lookup(table, key: float) -> float:
    for bound, value in table:
        if key <= bound + GRID_TOL:
            return float(value)
    return float(table[-1][1])


def tail_count(n: int, level: float) -> int:
    # round first so 0.025 * 1000 is 25, not 26
    return max(1, math.ceil(round((1.0 - level) * n, 9)))


def expected_shortfall(pnl, level: float = 0.975):
    """Mean loss over the worst ceil((1-level) n) outcomes, as a positive amount.

    ``pnl`` may be 2-D, in which case each row is a separate distribution.
    """
    pnl = np.asarray(pnl, dtype=float)
    n = pnl.shape[-1]
    if n < 1:
        raise ValueError("expected shortfall needs at least one sample")
    if not 0.0 < level < 1.0:
        raise ValueError("level must lie in (0, 1)")
    k = tail_count(n, level)
    # sorting the tail fixes the summation order, so results do not depend on
    # how the partition happened to arrange it
    worst = np.sort(np.partition(pnl, k - 1, axis=-1)[..., :k] if k < n else pnl, axis=-1)
    return -np.mean(worst, axis=-1)


def _shock_factors(ps: PathSet, d: int, shocks: ShockSeries) -> np.ndarray:
    """exp(-dy * tau) per scenario and tenor point; 1 for dead tenor points."""
    tau = np.maximum(ps.tenor_grid - ps.date_grid[d], 0.0)
    return np.exp(-shocks.at(tau) * tau[None, :])


def im_from_legs(ps: PathSet, d: int, coef: np.ndarray, shocks: ShockSeries,
                 cfg: ImConfig = ImConfig()) -> np.ndarray:
    """Initial margin on every path for a portfolio with curve coefficients ``coef``."""
    if not np.any(coef):
        return np.zeros(ps.n_paths)
    P = np.nan_to_num(discount_curve(ps, d))
    cp = coef * P
    base = cp.sum(axis=1)
    shocked = cp @ _shock_factors(ps, d, shocks).T
    es = expected_shortfall(shocked - base[:, None], cfg.es_level)
    return np.maximum(cfg.horizon_scale * es, 0.0)


def portfolio_coef(ps: PathSet, d: int, portfolio: Sequence[SwapSpec]) -> np.ndarray:
    coef = np.zeros((ps.n_paths, ps.tenor_grid.size))
    for spec in portfolio:
        coef += swap_legs(ps, d, spec).coef
    return coef


def compute_im(ps: PathSet, path: int, t: float, portfolio: Sequence[SwapSpec],
               shocks: ShockSeries, cfg: ImConfig = ImConfig()) -> float:
    d = ps.date_index(t)
    coef = portfolio_coef(ps, d, portfolio)[path:path + 1]
    if not np.any(coef):
        return 0.0
    P = np.nan_to_num(discount_curve(ps, d))[path:path + 1]
    cp = coef * P
    pnl = cp @ _shock_factors(ps, d, shocks).T - cp.sum()
    return float(max(cfg.horizon_scale * expected_shortfall(pnl[0], cfg.es_level), 0.0))


def yield_scenario_values(ps: PathSet, d: int, coef: np.ndarray, shift_per_tenor: np.ndarray):
    """Portfolio values under (-shift, 0, +shift) parallel zero-yield moves."""
    t = ps.date_grid[d]
    tau = np.maximum(ps.tenor_grid - t, 0.0)
    cp = coef * np.nan_to_num(discount_curve(ps, d))
    return [cp @ np.exp(-s * shift_per_tenor * tau) for s in (-1.0, 0.0, 1.0)]


def market_risk_from_legs(ps: PathSet, d: int, coef: np.ndarray, maturity: float,
                          coupon: float, cfg: CapitalConfig) -> np.ndarray:
    """Worst loss over the 3x3 (vol x yield) grid, floored at zero.

    Swaps carry no volatility exposure, so the three volatility rows coincide;
    the grid is kept so option positions slot in unchanged.
    """
    if not np.any(coef):
        return np.zeros(ps.n_paths)
    shift = cfg.shift(maturity, coupon)
    down, base, up = yield_scenario_values(ps, d, coef, np.full(ps.tenor_grid.size, shift))
    worst = np.zeros(ps.n_paths)
    for _vol in cfg.vol_scenarios:
        for v in (down, base, up):
            worst = np.maximum(worst, base - v)
    return worst


def _residual_maturity(portfolio: Sequence[SwapSpec], t: float) -> float:
    return max((s.end - t for s in portfolio if s.end > t + GRID_TOL), default=0.0)


def _weighted_coupon(portfolio: Sequence[SwapSpec]) -> float:
    total = sum(abs(s.notional) for s in portfolio)
    return sum(abs(s.notional) * s.fixed_rate for s in portfolio) / total if total else 0.0


def market_risk_capital(ps: PathSet, path: int, t: float, portfolio: Sequence[SwapSpec],
                        cfg: CapitalConfig = CapitalConfig()) -> float:
    d = ps.date_index(t)
    coef = portfolio_coef(ps, d, portfolio)
    k = market_risk_from_legs(ps, d, coef, _residual_maturity(portfolio, t),
                              _weighted_coupon(portfolio), cfg)
    return float(k[path])


def ccr_capital(V, notional: float, maturity: float, cfg: CapitalConfig = CapitalConfig()):
    """8% x risk weight x (max(V, 0) + add-on x notional)."""
    ead = np.maximum(V, 0.0) + cfg.addon(maturity) * abs(notional)
    return cfg.capital_ratio * cfg.risk_weight * ead


def capital_at(ps: PathSet, d: int, portfolio: Sequence[SwapSpec], cfg: CapitalConfig,
               values: np.ndarray | None = None) -> np.ndarray:
    t = ps.date_grid[d]
    live = [s for s in portfolio if s.end > t + GRID_TOL]
    if not live:
        return np.zeros(ps.n_paths)
    coef = portfolio_coef(ps, d, live)
    if values is None:
        values = (coef * np.nan_to_num(discount_curve(ps, d))).sum(axis=1)
    maturity = _residual_maturity(live, t)
    k = ccr_capital(values, sum(abs(s.notional) for s in live), maturity, cfg)
    if cfg.include_market_risk:
        k = k + market_risk_from_legs(ps, d, coef, maturity, _weighted_coupon(live), cfg)
    return k


def total_capital_profile(ps: PathSet, portfolio: Sequence[SwapSpec],
                          cfg: CapitalConfig = CapitalConfig()) -> np.ndarray:
    """K(t) = K_CCR + K_MR on every path and grid date, shape (n_paths, n_dates)."""
    return np.column_stack([capital_at(ps, d, portfolio, cfg) for d in range(ps.n_dates)])
