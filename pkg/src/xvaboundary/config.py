"""Run configuration: a TOML file validated into typed sections.

Unknown keys are rejected and every problem in a file is reported at once,
each message prefixed with the line of the offending key where it can be
located. A missing ``simulation.n_paths`` falls back to 4096 with a warning.
"""

from __future__ import annotations

import hashlib
import logging
import math
import re
import sys
from pathlib import Path
from typing import Literal

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .margin import DEFAULT_ADDONS, DEFAULT_LOW_COUPON_SHIFTS, DEFAULT_YIELD_SHIFTS
from .ratesim import CirParams, LmmParams
from .xva import TERM_NAMES

log = logging.getLogger(__name__)

DEFAULT_N_PATHS = 4096
CONFIG_DIR = Path(__file__).parent / "configs"


class ConfigError(ValueError):
    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("invalid configuration:\n  " + "\n  ".join(self.errors))


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class SimulationSection(_Section):
    n_paths: int = Field(DEFAULT_N_PATHS, ge=1)
    horizon: float = Field(10.0, gt=0)
    steps_per_year: int = Field(12, ge=1)
    seed: int = Field(20150731, ge=0)

    def grid(self):
        n = int(round(self.horizon * self.steps_per_year))
        return [i / self.steps_per_year for i in range(n + 1)]


class CirSection(_Section):
    theta: float = Field(gt=0)
    eta: float | list[float] = 0.0

    @field_validator("eta")
    @classmethod
    def _eta(cls, v):
        vals = v if isinstance(v, list) else [v]
        if any(x < 0 for x in vals):
            raise ValueError("eta must be non-negative")
        return v


class ModelSection(_Section):
    tenor_grid: list[float]
    initial_forwards: list[float]
    shifts: float | list[float] = 0.0
    vol_loadings: list
    bucket_starts: list[float] = [0.0]
    cir: CirSection

    @model_validator(mode="after")
    def _build(self):
        self.params()
        return self

    def params(self) -> LmmParams:
        return LmmParams(self.tenor_grid, self.initial_forwards, self.shifts,
                         self.vol_loadings, CirParams(self.cir.theta, self.cir.eta),
                         self.bucket_starts)


Direction = Literal["payer", "receiver"]


class SwaptionSection(_Section):
    expiry: float = Field(gt=0)
    tenor: float = Field(gt=0)
    notional: float = Field(1.0, gt=0)
    fixed_freq: float = Field(1.0, gt=0)
    direction: Direction = "payer"
    settlement: Literal["physical", "cash"] = "physical"
    strikes: list[float] | None = None  # decimal
    strike_offsets_bp: list[float] | None = None  # relative to the model ATM

    @model_validator(mode="after")
    def _one_sweep(self):
        if self.strikes is not None and self.strike_offsets_bp is not None:
            raise ValueError("give either strikes or strike_offsets_bp, not both")
        return self


class CreditSection(_Section):
    lambda_B: float = Field(0.0, ge=0)
    lambda_C: float = Field(0.0, ge=0)
    R_B: float = Field(0.4, ge=0, le=1)
    R_C: float = Field(0.4, ge=0, le=1)
    s_F: float | None = None
    s_X: float = 0.0
    r_IC: float = 0.0
    s_IB: float = 0.0
    gamma_K: float = 0.0
    phi: float = Field(0.0, ge=0, le=1)
    r: float = 0.0
    kva_alpha: Literal["table", "pde"] = "table"

    @model_validator(mode="after")
    def _funding_spread(self):
        if self.s_F is not None:
            implied = (1.0 - self.R_B) * self.lambda_B
            if abs(self.s_F - implied) > 1e-12:
                raise ValueError(
                    f"s_F={self.s_F} violates s_F=(1-R_B)*lambda_B={implied:.12g}")
        return self


class XvaSection(_Section):
    terms: list[Literal[TERM_NAMES]] = []
    market_risk: bool = True
    collateralised: bool = False


class SyntheticShocks(_Section):
    tenors: list[float]
    daily_vol: float | list[float] = 0.0006
    correlation: float = Field(0.9, gt=0, le=1)
    n_scenarios: int = Field(2500, ge=1)
    seed: int = 0


class MarginSection(_Section):
    es_level: float = Field(0.975, gt=0.5, lt=1)
    horizon_scale: float = Field(math.sqrt(2.0), gt=0)
    overlap_days: int = Field(5, ge=1)
    im_stride: int = Field(1, ge=1)
    shocks_file: str | None = None
    synthetic: SyntheticShocks | None = None

    @model_validator(mode="after")
    def _one_source(self):
        if self.shocks_file is not None and self.synthetic is not None:
            raise ValueError("give either shocks_file or synthetic, not both")
        return self


Table = list[tuple[float, float]]


class CapitalSection(_Section):
    rating: str = "BB"
    risk_weight: float = Field(1.0, ge=0)
    capital_ratio: float = Field(0.08, ge=0)
    addons: Table = [tuple(r) for r in DEFAULT_ADDONS]
    yield_shifts: Table = [tuple(r) for r in DEFAULT_YIELD_SHIFTS]
    low_coupon_yield_shifts: Table = [tuple(r) for r in DEFAULT_LOW_COUPON_SHIFTS]
    coupon_threshold: float = 0.03
    vol_scenarios: tuple[float, float, float] = (-0.25, 0.0, 0.25)


class RegressionSection(_Section):
    bandwidth: int = Field(15, ge=1)
    fallback: Literal["none", "quadratic"] = "none"


class PortfolioOption(_Section):
    expiry: float = Field(gt=0)
    tenor: float = Field(gt=0)
    strike: float
    notional: float = Field(1.0, gt=0)
    fixed_freq: float = Field(1.0, gt=0)
    direction: Direction = "payer"


class PortfolioSwap(_Section):
    start: float = Field(ge=0)
    tenor: float = Field(gt=0)
    rate: float
    notional: float = Field(1.0, gt=0)
    fixed_freq: float = Field(1.0, gt=0)
    direction: Direction = "payer"


class PortfolioSection(_Section):
    options: list[PortfolioOption] = []
    swaps: list[PortfolioSwap] = []
    max_options: int = Field(4, ge=0)


class OutputSection(_Section):
    dir: str = "out"


class RunConfig(_Section):
    name: str = "run"
    description: str = ""
    simulation: SimulationSection = SimulationSection()
    model: ModelSection
    swaption: SwaptionSection | None = None
    credit: CreditSection = CreditSection()
    xva: XvaSection = XvaSection()
    margin: MarginSection = MarginSection()
    capital: CapitalSection = CapitalSection()
    regression: RegressionSection = RegressionSection()
    portfolio: PortfolioSection | None = None
    output: OutputSection = OutputSection()

    @model_validator(mode="after")
    def _cross_checks(self):
        if "MVA" in self.xva.terms and self.margin.shocks_file is None and self.margin.synthetic is None:
            raise ValueError("an MVA term needs margin.shocks_file or margin.synthetic")
        if self.simulation.horizon < self.model.tenor_grid[-1] - 1e-9:
            raise ValueError("simulation.horizon must cover the tenor grid")
        return self


def _line_of(text: str, loc) -> int | None:
    """Line number of the key at ``loc`` (section path then key), if found."""
    keys = [k for k in loc if isinstance(k, str)]
    if not keys:
        return None
    lines = text.splitlines()
    start = 0
    # narrow to the deepest table header that matches a prefix of the path
    for depth in range(len(keys), 0, -1):
        header = re.compile(r"^\s*\[\[?\s*" + re.escape(".".join(keys[:depth])) + r"\s*\]\]?\s*$")
        hits = [i for i, ln in enumerate(lines) if header.match(ln)]
        if hits:
            start = hits[0]
            if depth == len(keys):
                return start + 1
            keys = keys[depth:]
            break
    key = re.compile(r"^\s*" + re.escape(keys[-1]) + r"\s*=")
    for i in range(start, len(lines)):
        if i > start and lines[i].lstrip().startswith("[") and start > 0:
            break
        if key.match(lines[i]):
            return i + 1
    return start + 1 if start else None


def _format_errors(text: str, exc: ValidationError, source: str) -> list:
    out = []
    for err in exc.errors():
        loc = tuple(err["loc"])
        where = ".".join(str(k) for k in loc) or "<root>"
        line = _line_of(text, loc)
        prefix = f"{source}:{line}: " if line else f"{source}: "
        msg = err["msg"].removeprefix("Value error, ")
        out.append(f"{prefix}{where}: {msg}")
    return out


def validate_config(text: str, source: str = "<config>") -> tuple[RunConfig, list]:
    """Parse and validate config text. Returns the config and any warnings.

    Raises ``ConfigError`` carrying every problem found.
    """
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError([f"{source}: {exc}"]) from None
    warnings = []
    if "n_paths" not in raw.get("simulation", {}):
        warnings.append(f"{source}: simulation.n_paths missing, using {DEFAULT_N_PATHS}")
    try:
        cfg = RunConfig.model_validate(raw)
    except ValidationError as exc:
        raise ConfigError(_format_errors(text, exc, source)) from None
    for w in warnings:
        log.warning(w)
    return cfg, warnings


def load_config(path) -> tuple[RunConfig, list, str]:
    """Validate a config file; also returns the SHA-256 of its bytes."""
    path = Path(path)
    data = path.read_bytes()
    cfg, warnings = validate_config(data.decode("utf-8"), str(path))
    return cfg, warnings, hashlib.sha256(data).hexdigest()


def shipped_config(case: str) -> Path:
    path = CONFIG_DIR / f"{case}.toml"
    if not path.exists():
        names = sorted(p.stem for p in CONFIG_DIR.glob("*.toml"))
        raise ConfigError([f"unknown case {case!r}; shipped cases: {', '.join(names)}"])
    return path
