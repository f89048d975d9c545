"""Exercise decisions that include forward valuation adjustments.

The single-option engine is a two-phase regression scheme:

* phase 1 rolls the underlying swap's realised cashflows from swap maturity
  back to the exercise date, regressing on the mean discount to the swap's
  remaining tenor dates at every grid date. This gives ``V_ex``;
* at the exercise date every integrand ``gamma_j(t_i)^delta_j`` of the
  adjustment integrals is regressed on the same state, giving ``U_ex`` (and
  ``U_noex`` for the no-exercise branch, zero for a stand-alone option);
* the option is exercised where ``V_ex + U_ex > V_noex + U_noex``;
* the decided value pays the pathwise swap value on exercised paths, and
  phase 2 rolls it back to t=0 with the discount factor to t=0 as
  regressor.

Adjustments accrued after exercise are carried inside the decided value, so
phase 2 discounts them together with the swap value.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .instruments import Settlement, SwapSpec, SwaptionSpec, swap_cashflows, swap_delta, swap_values
from .margin import CapitalConfig, ImConfig, ShockSeries, capital_at, im_from_legs, portfolio_coef
from .ratesim import GRID_TOL, PathSet
from .regression import (LocalRegressionConfig, LocalSmoother, RegressorSpec,
                         fit_conditional_expectations)
from .xva import Quantity, build_weights

DEFAULT_MAX_OPTIONS = 4


@dataclass(frozen=True)
class EngineConfig:
    regression: LocalRegressionConfig = LocalRegressionConfig()
    im: ImConfig = ImConfig()
    capital: CapitalConfig = CapitalConfig()
    shocks: ShockSeries | None = None
    im_stride: int = 1
    collateralised: bool = False  # variation margin X = V when set, else X = 0
    max_options: int = DEFAULT_MAX_OPTIONS

    def __post_init__(self):
        if self.im_stride < 1:
            raise ValueError("im_stride must be at least 1")


@dataclass(frozen=True)
class XvaContext:
    terms: tuple
    engine: EngineConfig = EngineConfig()

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple(self.terms))
        needs_im = any(t.gamma_id is Quantity.I_B for t in self.terms)
        if needs_im and self.engine.shocks is None:
            raise ValueError("an initial-margin term needs a shock series")


@dataclass(frozen=True)
class ExerciseContext:
    V_ex: np.ndarray
    V_noex: np.ndarray
    U_ex: np.ndarray
    U_noex: np.ndarray

    def __post_init__(self):
        for name in ("V_ex", "V_noex", "U_ex", "U_noex"):
            if not np.all(np.isfinite(getattr(self, name))):
                raise ValueError(f"{name} must be finite")


def decide_exercise(ctx: ExerciseContext):
    """Exercise iff V_ex + U_ex > V_noex + U_noex; ties do not exercise."""
    return np.asarray(ctx.V_ex + ctx.U_ex) > np.asarray(ctx.V_noex + ctx.U_noex)


class NettingSet:
    """Pathwise adjustment integrands for trades netted under one agreement.

    ``swaps`` are every swap that may be live in the set; a boolean member
    matrix of shape ``(n_paths, n_swaps)`` says which ones a path holds. A
    member swap is live from its start until its end.
    """

    def __init__(self, ps: PathSet, swaps: Sequence[SwapSpec], engine: EngineConfig):
        self.ps = ps
        self.swaps = list(swaps)
        self.engine = engine
        for s in self.swaps:
            s.check_grid(ps)
        self.start_idx = np.array([ps.date_index(s.start) for s in self.swaps], dtype=int)
        self._values: dict[int, np.ndarray] = {}
        self._cache: dict[tuple, tuple] = {}

    def values(self, i: int) -> np.ndarray:
        """Risk-free value of swap ``i`` on every path and date from its start."""
        if i not in self._values:
            ps = self.ps
            out = np.zeros((ps.n_paths, ps.n_dates))
            for d in range(self.start_idx[i], ps.n_dates):
                if ps.date_grid[d] >= self.swaps[i].end - GRID_TOL:
                    break
                out[:, d] = swap_values(ps, d, self.swaps[i])
            self._values[i] = out
        return self._values[i]

    def _active(self, members: np.ndarray, d: int) -> np.ndarray:
        return members & (self.start_idx <= d)[None, :]

    def portfolio_value(self, members: np.ndarray, d: int) -> np.ndarray:
        active = self._active(members, d)
        v = np.zeros(self.ps.n_paths)
        for i in range(len(self.swaps)):
            if active[:, i].any():
                v += np.where(active[:, i], self.values(i)[:, d], 0.0)
        return v

    def _per_code(self, kind: str, code: int, d: int) -> np.ndarray:
        key = (kind, code, d)
        if key not in self._cache:
            comp = [s for i, s in enumerate(self.swaps) if code >> i & 1]
            ps = self.ps
            if kind == "im":
                coef = portfolio_coef(ps, d, comp)
                out = im_from_legs(ps, d, coef, self.engine.shocks, self.engine.im)
            else:
                full = np.ones((ps.n_paths, len(self.swaps)), dtype=bool)
                mask = np.zeros(len(self.swaps), dtype=bool)
                mask[[i for i in range(len(self.swaps)) if code >> i & 1]] = True
                values = self.portfolio_value(full & mask[None, :], d)
                out = capital_at(ps, d, comp, self.engine.capital, values=values)
            self._cache[key] = out
        return self._cache[key]

    def _by_composition(self, kind: str, members: np.ndarray, d: int) -> np.ndarray:
        active = self._active(members, d)
        codes = active.astype(np.int64) @ (1 << np.arange(len(self.swaps), dtype=np.int64))
        out = np.zeros(self.ps.n_paths)
        for code in np.unique(codes):
            if code == 0:
                continue
            sel = codes == code
            out[sel] = self._per_code(kind, int(code), d)[sel]
        return out

    def integrands(self, members: np.ndarray, d0: int, d1: int, needed) -> dict:
        """gamma(t_k) for k in [d0, d1], keyed by Quantity, shape (n_paths, n_k)."""
        ps = self.ps
        ks = np.arange(d0, d1 + 1)
        out = {}
        V = np.column_stack([self.portfolio_value(members, k) for k in ks])
        X = V.copy() if self.engine.collateralised else np.zeros_like(V)
        out[Quantity.V] = V - X
        out[Quantity.X] = X
        out[Quantity.I_C] = np.zeros_like(V)
        if Quantity.K in needed:
            out[Quantity.K] = np.column_stack([self._by_composition("k", members, k) for k in ks])
        if Quantity.I_B in needed:
            stride = self.engine.im_stride
            knots = sorted(set(range(d0, d1 + 1, stride)) | {d1})
            im_knots = np.column_stack([self._by_composition("im", members, k) for k in knots])
            out[Quantity.I_B] = np.array([np.interp(ks, knots, row) for row in im_knots]) \
                if len(knots) > 1 else im_knots
        return out

    def deflated_targets(self, members, d0: int, d1: int, terms) -> np.ndarray:
        """gamma_j(t_k)^delta_j * B(t_d0) / B(t_k), shape (n_terms, n_paths, n_k)."""
        needed = {t.gamma_id for t in terms}
        gam = self.integrands(members, d0, d1, needed)
        B = self.ps.numeraire
        defl = B[:, d0:d0 + 1] / B[:, d0:d1 + 1]
        return np.stack([t.delta.apply(gam[t.gamma_id]) * defl for t in terms])


def _smoothers(ps: PathSet, reg: RegressorSpec, dates, cfg: LocalRegressionConfig) -> dict:
    return {d: LocalSmoother(reg.values(ps, d), cfg) for d in dates}


def roll_back(ps: PathSet, smoothers: dict, values: np.ndarray, d_from: int, d_to: int,
              cashflows=None) -> np.ndarray:
    """Backward induction of a value from ``d_from`` to ``d_to``.

    At each date the deflated next-date value (plus that date's cashflow) is
    replaced by its regression estimate on the current state.
    """
    B = ps.numeraire
    y = values
    for d in range(d_from - 1, d_to - 1, -1):
        nxt = y if cashflows is None else y + cashflows(d + 1)
        y = smoothers[d].smooth(nxt * B[:, d] / B[:, d + 1])
    return y


@dataclass
class LsmResult:
    value: float
    stderr: float
    single_step: float
    exercised: np.ndarray
    V_ex: np.ndarray
    U_ex: np.ndarray
    U_noex: np.ndarray
    U_terms: dict
    decided: np.ndarray
    n_surfaces: int = 0
    surfaces: dict = field(default_factory=dict, repr=False)


def forward_xva(ps: PathSet, net: NettingSet, members: np.ndarray, d_ex: int, d_end: int,
                terms, reg: RegressorSpec, cfg: LocalRegressionConfig, branch: str):
    """Per-term adjustment at ``d_ex`` for the trades in ``members``.

    Integrand values at the exercise date are known; later ones are replaced
    by one regression surface each, ``(d_end - d_ex) x len(terms)`` in all.
    """
    n_terms = len(terms)
    if n_terms == 0 or d_end <= d_ex:
        return np.zeros((n_terms, ps.n_paths)), {}
    grid = ps.date_grid[d_ex:d_end + 1]
    W = build_weights(terms, grid, discounted=True)
    Y = net.deflated_targets(members, d_ex, d_end, terms)
    targets = {(branch, term.name, d_ex + k): Y[j, :, k]
               for j, term in enumerate(terms) for k in range(1, grid.size)}
    surfaces = fit_conditional_expectations(ps, targets, reg, ps.date_grid[d_ex], cfg)
    x = reg.values(ps, d_ex)
    U = W[:, :1] * Y[:, :, 0]
    for j, term in enumerate(terms):
        for k in range(1, grid.size):
            U[j] = U[j] + W[j, k] * surfaces[(branch, term.name, d_ex + k)](x)
    return U, surfaces


def two_phase_lsm(ps: PathSet, option: SwaptionSpec, xva_ctx: XvaContext | None = None,
                  reg_cfg: LocalRegressionConfig | None = None) -> LsmResult:
    swap = option.underlying
    swap.check_grid(ps)
    if reg_cfg is None:
        reg_cfg = xva_ctx.engine.regression if xva_ctx else LocalRegressionConfig()
    e = ps.date_index(option.expiry)
    M = ps.date_index(swap.end)
    reg1 = RegressorSpec(1, swap.end)
    sm1 = _smoothers(ps, reg1, range(e, M), reg_cfg)

    V_ex = roll_back(ps, sm1, np.zeros(ps.n_paths), M, e,
                     cashflows=lambda d: swap_cashflows(ps, d, swap))
    V_noex = np.zeros(ps.n_paths)

    terms = xva_ctx.terms if xva_ctx else ()
    U_terms = {t.name: np.zeros(ps.n_paths) for t in terms}
    U_ex = np.zeros(ps.n_paths)
    U_noex = np.zeros(ps.n_paths)
    surfaces = {}
    if terms and option.settlement is Settlement.PHYSICAL:
        net = NettingSet(ps, [swap], xva_ctx.engine)
        members = np.ones((ps.n_paths, 1), dtype=bool)
        U, s_ex = forward_xva(ps, net, members, e, M, terms, reg1, reg_cfg, "ex")
        Un, s_noex = forward_xva(ps, net, ~members, e, M, terms, reg1, reg_cfg, "noex")
        surfaces = {**s_ex, **s_noex}
        U_terms = {t.name: U[j] for j, t in enumerate(terms)}
        U_ex = U.sum(axis=0)
        U_noex = Un.sum(axis=0)

    ctx = ExerciseContext(V_ex, V_noex, U_ex, U_noex)
    ex = decide_exercise(ctx)
    # decide on the regression, pay the pathwise swap value: the smoothed
    # estimate is noisy around zero and would bias the option value down
    V_path = swap_values(ps, e, swap)
    H = np.where(ex, V_path + U_ex, V_noex + U_noex)

    sm2 = _smoothers(ps, RegressorSpec(2), range(0, e), reg_cfg)
    rolled = roll_back(ps, sm2, H, e, 0)
    deflated = H / ps.numeraire[:, e]
    return LsmResult(
        value=float(np.mean(rolled)),
        stderr=float(np.std(deflated, ddof=1) / math.sqrt(ps.n_paths)) if ps.n_paths > 1 else 0.0,
        single_step=float(np.mean(deflated)),
        exercised=ex, V_ex=V_ex, U_ex=U_ex, U_noex=U_noex, U_terms=U_terms,
        decided=H, n_surfaces=len(surfaces), surfaces=surfaces)


def single_step_value(ps: PathSet, option: SwaptionSpec) -> tuple[float, float]:
    """Discounted expected intrinsic value at expiry from the pathwise swap value."""
    e = ps.date_index(option.expiry)
    payoff = np.maximum(swap_values(ps, e, option.underlying), 0.0) / ps.numeraire[:, e]
    se = float(np.std(payoff, ddof=1) / math.sqrt(ps.n_paths)) if ps.n_paths > 1 else 0.0
    return float(np.mean(payoff)), se


@dataclass
class ExerciseReport:
    strike: float
    exercise_prob_xva: float
    exercise_prob_noxva: float
    value_xva: float
    value_noxva: float
    stderr_xva: float
    stderr_noxva: float
    swap_delta: float  # value per +1bp at expiry, currency
    xva_at_exercise: dict  # per term, mean over exercised paths, currency (negative = cost)
    xva_in_price: dict  # per term, E[1_ex U_term / B(T_ex)]
    xva_in_price_se: dict
    exercised_paths: int
    xva_at_exercise_all_paths: bool = False

    @property
    def xva_multiples(self) -> dict:
        d = abs(self.swap_delta)
        return {k: (-v / d if d > 0 else 0.0) for k, v in self.xva_at_exercise.items()}

    @property
    def total_xva_at_exercise(self) -> float:
        return float(sum(self.xva_at_exercise.values(), 0.0))


def price_with_xva_boundary(ps: PathSet, option: SwaptionSpec, xva_ctx: XvaContext,
                            plain: LsmResult | None = None) -> tuple[ExerciseReport, LsmResult, LsmResult]:
    """Price with and without adjustments on the same paths and summarise the boundary."""
    if plain is None:
        plain = two_phase_lsm(ps, option, None, xva_ctx.engine.regression)
    adj = two_phase_lsm(ps, option, xva_ctx)
    e = ps.date_index(option.expiry)
    ex = adj.exercised
    n_ex = int(ex.sum())
    use = ex if n_ex else np.ones(ps.n_paths, dtype=bool)
    B = ps.numeraire[:, e]
    at_ex, in_price, in_price_se = {}, {}, {}
    for name, u in adj.U_terms.items():
        at_ex[name] = float(np.mean(u[use]))
        contrib = np.where(ex, u, 0.0) / B
        in_price[name] = float(np.mean(contrib))
        in_price_se[name] = float(np.std(contrib, ddof=1) / math.sqrt(ps.n_paths)) if ps.n_paths > 1 else 0.0
    report = ExerciseReport(
        strike=option.strike,
        exercise_prob_xva=float(np.mean(ex)),
        exercise_prob_noxva=float(np.mean(plain.exercised)),
        value_xva=adj.value, value_noxva=plain.value,
        stderr_xva=adj.stderr, stderr_noxva=plain.stderr,
        swap_delta=swap_delta(ps, option.expiry, option.underlying),
        xva_at_exercise=at_ex, xva_in_price=in_price, xva_in_price_se=in_price_se,
        exercised_paths=n_ex, xva_at_exercise_all_paths=(n_ex == 0))
    return report, plain, adj


# -- portfolios ---------------------------------------------------------------


def _n_dates(opt) -> int:
    dates = getattr(opt, "exercise_dates", None)
    return 1 if dates is None else len(dates)


def enumerate_decision_states(portfolio: Sequence, cap: int = DEFAULT_MAX_OPTIONS) -> list:
    """Every exercise-status vector: 0 = not exercised, k = exercised on date k."""
    if len(portfolio) > cap:
        raise ValueError(
            f"{len(portfolio)} options exceed the decision-state cap of {cap}; "
            "exhaustive enumeration is for desk-scale netting sets only")
    return list(itertools.product(*[range(_n_dates(o) + 1) for o in portfolio]))


@dataclass
class PortfolioResult:
    value: float
    stderr: float
    state_values: dict  # (date, state) -> mean economic value at that date
    state_xva: dict  # (date, state) -> {term: mean adjustment}
    exercise_freq: dict  # option index -> fraction of paths exercising
    exercised: np.ndarray  # (n_paths, n_options)


def _actions(group: Sequence[int]) -> list:
    acts = [frozenset(c) for r in range(len(group) + 1) for c in itertools.combinations(group, r)]
    return acts


def portfolio_backward_induction(ps: PathSet, options: Sequence[SwaptionSpec],
                                 xva_ctx: XvaContext | None = None,
                                 existing: Sequence[SwapSpec] = ()) -> PortfolioResult:
    """Joint exercise of European swaptions in one netting set.

    The state before an exercise date is the exercise vector of the options
    that expired earlier. For each state and each subset of the options
    expiring on the date, the economic value is the regressed value of the
    netting set's swaps plus its adjustment integrals, with later decisions
    following the policy already found for later dates. The subset with the
    highest value is chosen on each path; ties go to the subset listed first,
    which exercises fewest options.
    """
    engine = xva_ctx.engine if xva_ctx else EngineConfig()
    terms = xva_ctx.terms if xva_ctx else ()
    cfg = engine.regression
    n = len(options)
    enumerate_decision_states(options, engine.max_options)
    if any(o.settlement is not Settlement.PHYSICAL for o in options):
        raise ValueError("portfolio induction supports physically settled options only")

    swaps = [o.underlying for o in options] + list(existing)
    net = NettingSet(ps, swaps, engine)
    n_paths = ps.n_paths
    maturity = max(s.end for s in swaps) if swaps else 0.0
    d_end = ps.date_index(maturity) if swaps else 0
    reg1 = RegressorSpec(1, maturity) if swaps else RegressorSpec(2)
    expiries = [ps.date_index(o.expiry) for o in options]
    dates = sorted(set(expiries))
    groups = {d: [i for i in range(n) if expiries[i] == d] for d in dates}
    starts = [ps.date_index(s.start) for s in swaps]
    sm1 = _smoothers(ps, reg1, range(min(dates + starts + [d_end]), d_end), cfg) if dates else {}

    # regressed risk-free value of each swap at every decision date
    est = {}
    for i, s in enumerate(swaps):
        si, ei = ps.date_index(s.start), ps.date_index(s.end)
        targets = [d for d in dates if d >= si] + [si]
        for d in sorted(set(targets)):
            if d >= ei:
                est[(i, d)] = np.zeros(n_paths)
                continue
            est[(i, d)] = roll_back(ps, sm1, np.zeros(n_paths), ei, d,
                                    cashflows=lambda k, s=s: swap_cashflows(ps, k, s))

    base_members = np.zeros((n_paths, len(swaps)), dtype=bool)
    base_members[:, n:] = True
    policy: dict = {}  # date -> (prior option indices, {prior_state: chosen action index per path})
    state_values, state_xva, best_values = {}, {}, {}

    def complete(members: np.ndarray, after: int) -> np.ndarray:
        """Apply the stored policy for decision dates after ``after``."""
        members = members.copy()
        for d in dates:
            if d <= after:
                continue
            prior, chosen = policy[d]
            acts = _actions(groups[d])
            key = members[:, prior].astype(np.int64) @ (1 << np.arange(len(prior), dtype=np.int64)) \
                if prior else np.zeros(n_paths, dtype=np.int64)
            for code, action_idx in chosen.items():
                sel = key == code
                for a_i, act in enumerate(acts):
                    rows = sel & (action_idx == a_i)
                    for i in act:
                        members[rows, i] = True
        return members

    def economic_value(members: np.ndarray, d: int):
        """Value at ``d`` of everything the members imply from ``d`` on.

        Returns the regressed value used for decisions, the pathwise value
        paid once decided, and the per-term adjustments.
        """
        B = ps.numeraire
        measurable = np.zeros(n_paths)
        future = np.zeros(n_paths)
        realised = np.zeros(n_paths)
        for i in range(len(swaps)):
            held = members[:, i]
            if not held.any():
                continue
            si = ps.date_index(swaps[i].start)
            realised += np.where(held, net.values(i)[:, max(si, d)] * B[:, d] / B[:, max(si, d)], 0.0)
            if si <= d:
                if (i, d) in est:
                    measurable += np.where(held, est[(i, d)], 0.0)
                else:
                    measurable += np.where(held, roll_back(
                        ps, sm1, np.zeros(n_paths), ps.date_index(swaps[i].end), d,
                        cashflows=lambda k, s=swaps[i]: swap_cashflows(ps, k, s)), 0.0)
            else:
                future += np.where(held, est[(i, si)] * B[:, d] / B[:, si], 0.0)
        U = np.zeros((len(terms), n_paths))
        if terms and d < d_end:
            W = build_weights(terms, ps.date_grid[d:d_end + 1], discounted=True)
            Y = net.deflated_targets(members, d, d_end, terms)
            U = W[:, 0:1] * Y[:, :, 0]
            later = np.einsum("jk,jpk->jp", W[:, 1:], Y[:, :, 1:])
            U = U + sm1[d].smooth(later.T).T
        if future.any():
            future = sm1[d].smooth(future)
        u = U.sum(axis=0)
        return measurable + future + u, realised + u, U

    for d in reversed(dates):
        prior = [i for i in range(n) if expiries[i] < d]
        acts = _actions(groups[d])
        chosen = {}
        for pstate in itertools.product((0, 1), repeat=len(prior)):
            code = sum(b << k for k, b in enumerate(pstate))
            members = base_members.copy()
            for k, i in enumerate(prior):
                members[:, i] = bool(pstate[k])
            vals, paid = [], []
            for a_i, act in enumerate(acts):
                m = members.copy()
                for i in act:
                    m[:, i] = True
                m = complete(m, d)
                v, r, U = economic_value(m, d)
                vals.append(v)
                paid.append(r)
                key = (float(ps.date_grid[d]), tuple(pstate), tuple(sorted(act)))
                state_values[key] = float(np.mean(v))
                state_xva[key] = {t.name: float(np.mean(U[j])) for j, t in enumerate(terms)}
            best = np.zeros(n_paths, dtype=int)
            best_v = vals[0]
            for a_i in range(1, len(acts)):
                better = vals[a_i] > best_v
                best = np.where(better, a_i, best)
                best_v = np.where(better, vals[a_i], best_v)
            chosen[code] = best
            best_values[(d, code)] = np.choose(best, paid)
        policy[d] = (prior, chosen)

    final = complete(base_members, -1)
    if dates:
        d0 = dates[0]
        H = best_values[(d0, 0)]
    else:
        d0 = 0
        H = np.zeros(n_paths)
    sm2 = _smoothers(ps, RegressorSpec(2), range(0, d0), cfg)
    rolled = roll_back(ps, sm2, H, d0, 0)
    deflated = H / ps.numeraire[:, d0]
    se = float(np.std(deflated, ddof=1) / math.sqrt(n_paths)) if n_paths > 1 else 0.0
    exercised = final[:, :n]
    return PortfolioResult(
        value=float(np.mean(rolled)), stderr=se,
        state_values=state_values, state_xva=state_xva,
        exercise_freq={i: float(np.mean(exercised[:, i])) for i in range(n)},
        exercised=exercised)
