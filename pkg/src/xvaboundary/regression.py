"""Regression estimates of conditional expectations on path states.

The default estimator is a moving-average filter: sort the paths by regressor,
merge tied regressor values, and replace each knot's ordinate by the mean over
a window of ``bandwidth`` neighbouring knots. Windows are centred where
possible and shifted inward at the ends so they always hold ``bandwidth``
knots. Predictions interpolate linearly between knots and clamp outside.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Mapping

import numpy as np

from .ratesim import GRID_TOL, PathSet, discount_curve


class Fallback(str, Enum):
    NONE = "none"
    QUADRATIC = "quadratic"


@dataclass(frozen=True)
class LocalRegressionConfig:
    bandwidth: int = 15
    fallback: Fallback = Fallback.NONE

    def __post_init__(self):
        object.__setattr__(self, "fallback", Fallback(self.fallback))
        if self.bandwidth < 1:
            raise ValueError("bandwidth must be at least 1")


@dataclass(frozen=True)
class RegressorSpec:
    """Phase 1 (exercise to maturity): mean discount to the remaining tenor
    dates up to ``maturity``. Phase 2 (valuation date to exercise): discount
    factor back to t=0, i.e. the reciprocal numeraire."""

    phase: int
    maturity: float | None = None

    def __post_init__(self):
        if self.phase not in (1, 2):
            raise ValueError("phase must be 1 or 2")
        if self.phase == 1 and self.maturity is None:
            raise ValueError("phase-1 regressor needs the swap maturity")

    def values(self, ps: PathSet, d: int) -> np.ndarray:
        if self.phase == 2:
            return 1.0 / ps.numeraire[:, d]
        t = ps.date_grid[d]
        tenor = ps.tenor_grid
        sel = (tenor > t + GRID_TOL) & (tenor <= self.maturity + GRID_TOL)
        if not np.any(sel):
            return np.ones(ps.n_paths)
        return np.mean(discount_curve(ps, d)[:, sel], axis=1)


@dataclass(frozen=True)
class RegressionSurface:
    knots: np.ndarray | None
    ordinates: np.ndarray | None
    coefficients: np.ndarray | None = None
    observation_date: float | None = None
    quantity_id: object = None

    def __call__(self, x):
        return predict(self, x)


def predict(surface: RegressionSurface, x):
    if surface.coefficients is not None:
        return np.polynomial.polynomial.polyval(np.asarray(x, dtype=float), surface.coefficients)
    k, y = surface.knots, surface.ordinates
    if k.size == 1:
        return np.full(np.shape(x), y[0]) if np.ndim(x) else float(y[0])
    out = np.interp(x, k, y)
    return out if np.ndim(x) else float(out)


class LocalSmoother:
    """Sort order, tie merging and window bounds for one regressor sample.

    Reused across every target regressed on the same paths and date.
    """

    def __init__(self, xs, cfg: LocalRegressionConfig = LocalRegressionConfig()):
        xs = np.asarray(xs, dtype=float)
        if cfg.bandwidth > xs.size:
            raise ValueError(f"bandwidth {cfg.bandwidth} exceeds sample size {xs.size}")
        self.cfg = cfg
        self.xs = xs
        self.order = np.argsort(xs, kind="stable")
        knots, inverse, counts = np.unique(xs, return_inverse=True, return_counts=True)
        self.knots = knots
        self.inverse = inverse.ravel()
        self.counts = counts
        self.starts = np.concatenate([[0], np.cumsum(counts)[:-1]])
        n = knots.size
        b = min(cfg.bandwidth, n)
        lo = np.clip(np.arange(n) - (b - 1) // 2, 0, n - b)
        self.lo, self.hi = lo, lo + b
        if cfg.fallback is Fallback.QUADRATIC:
            self.vander = np.vander(xs, 3, increasing=True)

    def _knot_sums(self, ys: np.ndarray) -> np.ndarray:
        return np.add.reduceat(ys[self.order], self.starts, axis=0)

    def _window(self, sums: np.ndarray) -> np.ndarray:
        # tied paths count individually, so the window mean is over samples
        c = np.concatenate([np.zeros((1,) + sums.shape[1:]), np.cumsum(sums, axis=0)])
        n = np.concatenate([[0], np.cumsum(self.counts)])
        width = (n[self.hi] - n[self.lo]).reshape((-1,) + (1,) * (sums.ndim - 1))
        return (c[self.hi] - c[self.lo]) / width

    def _quadratic(self, ys: np.ndarray) -> np.ndarray:
        coef, *_ = np.linalg.lstsq(self.vander, ys, rcond=None)
        return coef

    def smooth(self, ys) -> np.ndarray:
        """Fitted conditional expectation at every sample point.

        ``ys`` may be 1-D or ``(n_samples, n_targets)``.
        """
        ys = np.asarray(ys, dtype=float)
        if ys.shape[0] != self.xs.size:
            raise ValueError("xs and ys must have the same length")
        if self.cfg.fallback is Fallback.QUADRATIC:
            return self.vander @ self._quadratic(ys)
        return self._window(self._knot_sums(ys))[self.inverse]

    def fit(self, ys, observation_date=None, quantity_id=None) -> RegressionSurface:
        ys = np.asarray(ys, dtype=float)
        if ys.shape != self.xs.shape:
            raise ValueError("xs and ys must have the same length")
        if self.cfg.fallback is Fallback.QUADRATIC:
            return RegressionSurface(None, None, self._quadratic(ys), observation_date, quantity_id)
        return RegressionSurface(self.knots, self._window(self._knot_sums(ys)), None,
                                 observation_date, quantity_id)


def fit_local_regression(xs, ys, cfg: LocalRegressionConfig = LocalRegressionConfig()) -> RegressionSurface:
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if xs.shape != ys.shape:
        raise ValueError("xs and ys must have the same length")
    return LocalSmoother(xs, cfg).fit(ys)


def fit_conditional_expectations(ps: PathSet, targets: Mapping, reg: RegressorSpec,
                                 obs_date: float,
                                 cfg: LocalRegressionConfig = LocalRegressionConfig()) -> dict:
    """One surface per target key, all regressed on ``reg`` at ``obs_date``.

    ``targets`` maps a key such as ``(branch, term, date_index)`` to the
    pathwise realisations to be projected.
    """
    if not targets:
        raise ValueError("no targets to regress")
    d = ps.date_index(obs_date)
    smoother = LocalSmoother(reg.values(ps, d), cfg)
    return {key: smoother.fit(ys, obs_date, key) for key, ys in targets.items()}
