"""Experiment orchestration and report files.

All CSVs are comma-delimited with a header row, ``.`` decimals, LF line
endings and a fixed float format, so a fixed config and seed reproduce them
byte for byte. Timings go to the JSON manifest only.
"""

from __future__ import annotations

import csv
import json
import time
from pathlib import Path

import numpy as np

from . import __version__
from .config import RunConfig
from .exercise import EngineConfig, XvaContext, portfolio_backward_induction, price_with_xva_boundary
from .instruments import BP, Direction, SwapSpec, SwaptionSpec, swap_rates
from .margin import CapitalConfig, ImConfig, ShockSeries
from .ratesim import PathSet, simulate_paths
from .regression import LocalRegressionConfig
from .smile import forward_and_annuity, smile_report
from .xva import TERM_NAMES, CreditFundingParams, standard_terms

EXERCISE_CSV = "exercise_report.csv"
SMILE_CSV = "smile.csv"
MVA_CSV = "mva_table.csv"
PORTFOLIO_CSV = "portfolio_states.csv"
PORTFOLIO_SUMMARY_CSV = "portfolio_summary.csv"
MANIFEST = "manifest.json"

CURVE_PLAIN = "cash_settled"
CURVE_EX_MR = "xva_ex_market_risk"
CURVE_INCL_MR = "xva_incl_market_risk"


def fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, str):
        return x
    x = float(x)
    if x == 0.0:
        return "0"
    return f"{x:.10g}"


def write_csv(path: Path, header, rows) -> None:
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])


def _bp(x, notional) -> float:
    return x / notional / BP


# -- building blocks from config -------------------------------------------


def simulate(cfg: RunConfig, seed: int | None = None) -> PathSet:
    sim = cfg.simulation
    return simulate_paths(cfg.model.params(), np.array(sim.grid()), sim.n_paths,
                          sim.seed if seed is None else seed)


def credit_params(cfg: RunConfig) -> CreditFundingParams:
    return CreditFundingParams(**cfg.credit.model_dump())


def shock_series(cfg: RunConfig, base_dir: Path | None) -> ShockSeries | None:
    m = cfg.margin
    if m.shocks_file is not None:
        p = Path(m.shocks_file)
        if not p.is_absolute() and base_dir is not None:
            p = base_dir / p
        return ShockSeries.read_csv(p)
    if m.synthetic is not None:
        s = m.synthetic
        return ShockSeries.synthetic(s.tenors, s.daily_vol, s.correlation, s.n_scenarios,
                                     m.overlap_days, s.seed)
    return None


def engine_config(cfg: RunConfig, shocks: ShockSeries | None,
                  market_risk: bool | None = None) -> EngineConfig:
    c = cfg.capital
    mr = cfg.xva.market_risk if market_risk is None else market_risk
    capital = CapitalConfig(
        counterparty_rating=c.rating, risk_weight=c.risk_weight, capital_ratio=c.capital_ratio,
        ccr_addon_table=tuple(c.addons), vol_scenarios=tuple(c.vol_scenarios),
        yield_shift=tuple(c.yield_shifts), low_coupon_yield_shift=tuple(c.low_coupon_yield_shifts),
        coupon_threshold=c.coupon_threshold, include_market_risk=mr)
    m = cfg.margin
    return EngineConfig(
        regression=LocalRegressionConfig(cfg.regression.bandwidth, cfg.regression.fallback),
        im=ImConfig(m.es_level, m.horizon_scale, m.overlap_days),
        capital=capital, shocks=shocks, im_stride=m.im_stride,
        collateralised=cfg.xva.collateralised,
        max_options=cfg.portfolio.max_options if cfg.portfolio else 4)


def xva_context(cfg: RunConfig, shocks, market_risk: bool | None = None) -> XvaContext:
    terms = standard_terms(credit_params(cfg), cfg.xva.terms)
    return XvaContext(terms, engine_config(cfg, shocks, market_risk))


def underlying(cfg: RunConfig, strike: float) -> SwapSpec:
    s = cfg.swaption
    return SwapSpec.regular(s.notional, strike, s.expiry, s.tenor, s.fixed_freq,
                            Direction(s.direction))


def strikes(cfg: RunConfig, ps: PathSet) -> list:
    s = cfg.swaption
    if s is None:
        return []
    if s.strikes is not None:
        return list(s.strikes)
    atm = float(swap_rates(ps, 0, underlying(cfg, 0.0))[0])
    offsets = s.strike_offsets_bp if s.strike_offsets_bp is not None else []
    return [atm + o * BP for o in offsets]


# -- experiments -------------------------------------------------------------


def price_sweep(cfg: RunConfig, ps: PathSet, shocks, market_risk: bool | None = None) -> list:
    """ExerciseReport per strike, with the plain engine run once per strike."""
    ctx = xva_context(cfg, shocks, market_risk)
    out = []
    for k in strikes(cfg, ps):
        option = SwaptionSpec(cfg.swaption.expiry, underlying(cfg, k), cfg.swaption.settlement)
        report, _, adj = price_with_xva_boundary(ps, option, ctx)
        out.append((report, adj.n_surfaces))
    return out


def needs_ex_mr_curve(cfg: RunConfig, market_risk: bool) -> bool:
    return market_risk and "KVA" in cfg.xva.terms


EXERCISE_HEADER = (
    ["strike_pct", "exercise_prob_xva", "exercise_prob_noxva", "value_xva_bp", "value_noxva_bp",
     "stderr_xva_bp", "stderr_noxva_bp", "swap_delta_bp", "exercised_paths",
     "xva_at_exercise_all_paths", "total_xva_at_exercise_bp", "n_surfaces"]
    + [f"{t}_{c}" for t in TERM_NAMES for c in ("at_exercise_bp", "delta_multiple", "in_price_bp")])


def exercise_rows(reports, notional: float):
    for rep, n_surf in reports:
        row = [rep.strike * 100, rep.exercise_prob_xva, rep.exercise_prob_noxva,
               _bp(rep.value_xva, notional), _bp(rep.value_noxva, notional),
               _bp(rep.stderr_xva, notional), _bp(rep.stderr_noxva, notional),
               _bp(rep.swap_delta, notional), rep.exercised_paths,
               rep.xva_at_exercise_all_paths, _bp(rep.total_xva_at_exercise, notional), n_surf]
        mult = rep.xva_multiples
        for t in TERM_NAMES:
            row += [_bp(rep.xva_at_exercise.get(t, 0.0), notional), mult.get(t, 0.0),
                    _bp(rep.xva_in_price.get(t, 0.0), notional)]
        yield row


MVA_HEADER = ["strike_pct", "mva_at_exercise_bp", "mva_in_price_bp"]


def mva_rows(reports, notional: float):
    """MVA as a positive cost in bp of notional, at exercise and in the t=0 price."""
    for rep, _ in reports:
        yield [rep.strike * 100, -_bp(rep.xva_at_exercise.get("MVA", 0.0), notional),
               -_bp(rep.xva_in_price.get("MVA", 0.0), notional)]


SMILE_HEADER = ["curve", "strike_pct", "forward_pct", "expiry_years", "annuity", "price_bp",
                "normal_vol_bp", "normal_outcome", "lognormal_vol_pct", "lognormal_outcome"]


def smile_points(cfg: RunConfig, ps: PathSet, reports, reports_ex_mr, market_risk: bool) -> list:
    if cfg.swaption is None or not reports:
        return []
    fwd, ann = forward_and_annuity(ps, underlying(cfg, 0.0))
    shift = float(cfg.model.params().shifts.mean())
    plain = [r for r, _ in reports]
    curves = {CURVE_PLAIN: plain}
    if market_risk:
        curves[CURVE_EX_MR] = [r for r, _ in (reports_ex_mr if reports_ex_mr is not None else reports)]
        curves[CURVE_INCL_MR] = plain
    else:
        curves[CURVE_EX_MR] = plain
    return smile_report(curves, fwd, cfg.swaption.expiry, ann, cfg.swaption.notional, shift,
                        plain_curve=CURVE_PLAIN, receiver=cfg.swaption.direction == "receiver")


def smile_rows(points):
    for p in points:
        yield [p.curve, p.strike * 100, p.forward * 100, p.expiry, p.annuity, p.price / BP,
               None if p.implied_vol_normal is None else p.implied_vol_normal / BP,
               p.normal_outcome.value,
               None if p.implied_vol_lognormal is None else p.implied_vol_lognormal * 100,
               p.lognormal_outcome.value]


def portfolio_specs(cfg: RunConfig):
    opts, swaps = [], []
    if cfg.portfolio is None:
        return opts, swaps
    for o in cfg.portfolio.options:
        sw = SwapSpec.regular(o.notional, o.strike, o.expiry, o.tenor, o.fixed_freq,
                              Direction(o.direction))
        opts.append(SwaptionSpec(o.expiry, sw))
    for s in cfg.portfolio.swaps:
        swaps.append(SwapSpec.regular(s.notional, s.rate, s.start, s.tenor, s.fixed_freq,
                                      Direction(s.direction)))
    return opts, swaps


PORTFOLIO_HEADER = ["date_years", "prior_state", "action", "value"] + [f"{t}" for t in TERM_NAMES]
PORTFOLIO_SUMMARY_HEADER = ["item", "value"]


def _state(bits) -> str:
    return "".join(str(int(b)) for b in bits) or "-"


def portfolio_rows(result):
    for (t, prior, act), v in sorted(result.state_values.items()):
        xv = result.state_xva[(t, prior, act)]
        yield [t, _state(prior), ";".join(str(i) for i in act) or "none", v] + \
            [xv.get(name, 0.0) for name in TERM_NAMES]


def portfolio_summary_rows(result):
    yield ["value", result.value]
    yield ["stderr", result.stderr]
    for i, f in sorted(result.exercise_freq.items()):
        yield [f"exercise_freq_{i}", f]


# -- entry point ---------------------------------------------------------------


OUTPUTS = {
    "price": (EXERCISE_CSV,),
    "smile": (SMILE_CSV,),
    "mva-table": (MVA_CSV,),
    "portfolio": (PORTFOLIO_CSV, PORTFOLIO_SUMMARY_CSV),
    "run": (EXERCISE_CSV, SMILE_CSV, MVA_CSV, PORTFOLIO_CSV, PORTFOLIO_SUMMARY_CSV),
}


def run_case(cfg: RunConfig, out_dir, *, command: str = "run", seed: int | None = None,
             market_risk: bool | None = None, base_dir: Path | None = None,
             config_hash: str = "", config_path: str = "", warnings=()) -> dict:
    """Run one experiment and write its reports; returns the manifest."""
    if command not in OUTPUTS:
        raise ValueError(f"unknown command {command!r}")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    mr = cfg.xva.market_risk if market_risk is None else market_risk
    seed = cfg.simulation.seed if seed is None else seed
    wanted = OUTPUTS[command]
    timings = {}

    t0 = time.perf_counter()
    ps = simulate(cfg, seed)
    shocks = shock_series(cfg, base_dir)
    timings["simulate_s"] = time.perf_counter() - t0

    notional = cfg.swaption.notional if cfg.swaption else 1.0
    reports, reports_ex_mr = [], None
    if {EXERCISE_CSV, SMILE_CSV, MVA_CSV} & set(wanted):
        t0 = time.perf_counter()
        reports = price_sweep(cfg, ps, shocks, mr)
        if SMILE_CSV in wanted and needs_ex_mr_curve(cfg, mr):
            reports_ex_mr = price_sweep(cfg, ps, shocks, False)
        timings["price_s"] = time.perf_counter() - t0

    written = []
    if EXERCISE_CSV in wanted:
        write_csv(out_dir / EXERCISE_CSV, EXERCISE_HEADER, exercise_rows(reports, notional))
        written.append(EXERCISE_CSV)
    if MVA_CSV in wanted:
        write_csv(out_dir / MVA_CSV, MVA_HEADER, mva_rows(reports, notional))
        written.append(MVA_CSV)
    if SMILE_CSV in wanted:
        points = smile_points(cfg, ps, reports, reports_ex_mr, mr)
        write_csv(out_dir / SMILE_CSV, SMILE_HEADER, smile_rows(points))
        written.append(SMILE_CSV)
    if PORTFOLIO_CSV in wanted:
        t0 = time.perf_counter()
        opts, swaps = portfolio_specs(cfg)
        ctx = xva_context(cfg, shocks, mr)
        result = portfolio_backward_induction(ps, opts, ctx, existing=swaps)
        timings["portfolio_s"] = time.perf_counter() - t0
        write_csv(out_dir / PORTFOLIO_CSV, PORTFOLIO_HEADER, portfolio_rows(result))
        write_csv(out_dir / PORTFOLIO_SUMMARY_CSV, PORTFOLIO_SUMMARY_HEADER,
                  portfolio_summary_rows(result))
        written += [PORTFOLIO_CSV, PORTFOLIO_SUMMARY_CSV]

    manifest = {
        "name": cfg.name,
        "command": command,
        "version": __version__,
        "config_path": config_path,
        "config_hash": config_hash,
        "seed": seed,
        "n_paths": cfg.simulation.n_paths,
        "market_risk": mr,
        "terms": list(cfg.xva.terms),
        "outputs": written,
        "warnings": list(warnings),
        "timings": timings,
    }
    (out_dir / MANIFEST).write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    return manifest
