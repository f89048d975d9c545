"""Monte Carlo valuation of swaptions whose exercise decision includes XVA."""

__version__ = "0.1.0"

from .exercise import (EngineConfig, ExerciseContext, ExerciseReport, XvaContext, decide_exercise,
                       enumerate_decision_states, portfolio_backward_induction,
                       price_with_xva_boundary, single_step_value, two_phase_lsm)
from .instruments import Direction, Settlement, SwapSpec, SwaptionSpec, swap_delta, swap_rate, swap_value
from .margin import (CapitalConfig, ImConfig, ShockSeries, ccr_capital, compute_im,
                     expected_shortfall, market_risk_capital, total_capital_profile)
from .ratesim import CirParams, LmmParams, PathSet, discount_factor, evolve_cir, simulate_paths
from .regression import (LocalRegressionConfig, RegressionSurface, RegressorSpec,
                         fit_conditional_expectations, fit_local_regression, predict)
from .smile import SmilePoint, lognormal_implied_vol, normal_implied_vol, smile_report
from .xva import (CreditFundingParams, ExposureProfile, XvaTermSpec, aggregate_U, build_weights,
                  closeout_gB, closeout_gC, standard_terms, xva_term_integral)
