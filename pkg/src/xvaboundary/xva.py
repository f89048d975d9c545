"""Generic valuation-adjustment integrals and their standard instantiations.

Every adjustment has the form

    XVA(alpha, beta, gamma, delta) = -int_t^T alpha(u) exp(-int_t^u beta) E_t[gamma(u)^delta] du

and is evaluated with the trapezoid rule on the exposure grid. Profiles built
by the engine are already deflated by the simulation numeraire, in which case
the short rate is dropped from ``beta`` (``ExposureProfile.discounted``).
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Callable, Sequence

import numpy as np


class Exponent(str, Enum):
    POSITIVE = "+"
    IDENTITY = "1"

    def apply(self, values):
        return np.maximum(values, 0.0) if self is Exponent.POSITIVE else values


class Quantity(str, Enum):
    V = "V"
    X = "X"
    I_C = "I_C"
    K = "K"
    I_B = "I_B"


TERM_NAMES = ("CVA", "FVA", "COLVA_X", "COLVA_IC", "KVA", "MVA")


@dataclass(frozen=True)
class CreditFundingParams:
    lambda_B: float = 0.0
    lambda_C: float = 0.0
    R_B: float = 0.4
    R_C: float = 0.4
    s_F: float | None = None
    s_X: float = 0.0
    r_IC: float = 0.0
    s_IB: float = 0.0
    gamma_K: float = 0.0
    phi: float = 0.0
    r: float = 0.0
    kva_alpha: str = "table"  # "table": gamma_K - r_B phi, "pde": gamma_K - r phi

    def __post_init__(self):
        for name in ("R_B", "R_C", "phi"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")
        for name in ("lambda_B", "lambda_C"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        implied = (1.0 - self.R_B) * self.lambda_B
        if self.s_F is None:
            object.__setattr__(self, "s_F", implied)
        elif abs(self.s_F - implied) > 1e-12:
            raise ValueError(
                f"s_F={self.s_F} inconsistent with s_F=(1-R_B)*lambda_B={implied}")
        if self.kva_alpha not in ("table", "pde"):
            raise ValueError("kva_alpha must be 'table' or 'pde'")

    @property
    def r_B(self) -> float:
        return self.r + self.s_F

    @classmethod
    def zero(cls) -> "CreditFundingParams":
        return cls(R_B=0.0, R_C=0.0)


def _const(c: float) -> Callable:
    return lambda t: np.full(np.shape(t), float(c))


@dataclass(frozen=True)
class XvaTermSpec:
    name: str
    alpha: Callable
    beta: Callable
    gamma_id: Quantity
    delta: Exponent
    r: float = 0.0  # short-rate part of beta, dropped for deflated profiles

    def __post_init__(self):
        object.__setattr__(self, "gamma_id", Quantity(self.gamma_id))
        object.__setattr__(self, "delta", Exponent(self.delta))


def _beta(p: CreditFundingParams) -> Callable:
    return _const(p.lambda_B + p.lambda_C)


def cva_term(p: CreditFundingParams) -> XvaTermSpec:
    return XvaTermSpec("CVA", _const((1 - p.R_C) * p.lambda_C), _beta(p), Quantity.V,
                       Exponent.POSITIVE, p.r)


def fva_term(p: CreditFundingParams) -> XvaTermSpec:
    return XvaTermSpec("FVA", _const(p.s_F), _beta(p), Quantity.V, Exponent.IDENTITY, p.r)


def colva_x_term(p: CreditFundingParams) -> XvaTermSpec:
    return XvaTermSpec("COLVA_X", _const(p.s_X), _beta(p), Quantity.X, Exponent.IDENTITY, p.r)


def colva_ic_term(p: CreditFundingParams) -> XvaTermSpec:
    return XvaTermSpec("COLVA_IC", _const(p.r_IC), _beta(p), Quantity.I_C, Exponent.IDENTITY, p.r)


def kva_term(p: CreditFundingParams) -> XvaTermSpec:
    rate = p.r_B if p.kva_alpha == "table" else p.r
    return XvaTermSpec("KVA", _const(p.gamma_K - rate * p.phi), _beta(p), Quantity.K,
                       Exponent.IDENTITY, p.r)


def mva_term(p: CreditFundingParams) -> XvaTermSpec:
    return XvaTermSpec("MVA", _const(p.s_F - p.s_IB), _beta(p), Quantity.I_B,
                       Exponent.IDENTITY, p.r)


TERM_BUILDERS = {
    "CVA": cva_term,
    "FVA": fva_term,
    "COLVA_X": colva_x_term,
    "COLVA_IC": colva_ic_term,
    "KVA": kva_term,
    "MVA": mva_term,
}


def standard_terms(p: CreditFundingParams, names: Sequence[str] = TERM_NAMES) -> list:
    return [TERM_BUILDERS[n](p) for n in names]


def closeout_gC(V, X, R_C):
    if not 0.0 <= R_C <= 1.0:
        raise ValueError("R_C must lie in [0, 1]")
    e = np.asarray(V) - X
    return R_C * np.maximum(e, 0.0) + np.minimum(e, 0.0) + X


def closeout_gB(V, X, R_B):
    if not 0.0 <= R_B <= 1.0:
        raise ValueError("R_B must lie in [0, 1]")
    e = np.asarray(V) - X
    return np.maximum(e, 0.0) + R_B * np.minimum(e, 0.0) + X


@dataclass(frozen=True)
class ExposureProfile:
    times: np.ndarray
    values: np.ndarray
    provenance: str = "pathwise-average"
    discounted: bool = True

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        values = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)
        if times.size == 0:
            raise ValueError("empty exposure profile")
        if times.shape != values.shape[:1]:
            raise ValueError("profile values must match the time grid")
        if np.any(np.diff(times) <= 0):
            raise ValueError("profile times must be strictly increasing")
        if not np.all(np.isfinite(values)):
            raise ValueError("profile values must be finite")


def _survival_discount(term: XvaTermSpec, times: np.ndarray, discounted: bool) -> np.ndarray:
    beta = np.asarray(term.beta(times), dtype=float)
    if not discounted:
        beta = beta + term.r
    # cumulative trapezoid of beta; exact for piecewise-linear beta
    integral = np.concatenate([[0.0], np.cumsum(0.5 * (beta[1:] + beta[:-1]) * np.diff(times))])
    return np.exp(-integral)


def term_weights(term: XvaTermSpec, times, discounted: bool = True) -> np.ndarray:
    times = np.asarray(times, dtype=float)
    if times.size == 0:
        raise ValueError("empty grid")
    if np.any(np.diff(times) <= 0):
        raise ValueError("grid must be strictly increasing")
    dt = np.diff(times)
    half = np.zeros(times.size)
    half[:-1] += 0.5 * dt
    half[1:] += 0.5 * dt
    return -np.asarray(term.alpha(times), dtype=float) * _survival_discount(term, times, discounted) * half


def build_weights(terms: Sequence[XvaTermSpec], grid, discounted: bool = True) -> np.ndarray:
    """w[j, i] with U = sum_j sum_i w[j, i] E[gamma_j(t_i)^delta_j]."""
    grid = np.asarray(grid, dtype=float)
    if not terms:
        return np.zeros((0, grid.size))
    return np.vstack([term_weights(term, grid, discounted) for term in terms])


def xva_term_integral(term: XvaTermSpec, profile: ExposureProfile) -> float:
    t = profile.times
    if t.size < 2:
        return 0.0
    f = np.asarray(term.alpha(t), dtype=float) * _survival_discount(term, t, profile.discounted) * profile.values
    return float(-0.5 * np.sum((f[1:] + f[:-1]) * np.diff(t)))


def aggregate_U(term_values) -> float:
    if isinstance(term_values, dict):
        term_values = term_values.values()
    return float(sum(term_values, 0.0))
