import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from xvaboundary.exercise import (EngineConfig, ExerciseContext, XvaContext, decide_exercise,
                                  enumerate_decision_states, portfolio_backward_induction,
                                  price_with_xva_boundary, single_step_value, two_phase_lsm)
from xvaboundary.instruments import Direction, Settlement, SwapSpec, SwaptionSpec, swap_rate, swap_values
from xvaboundary.xva import CreditFundingParams, standard_terms

from conftest import flat_paths

COSTS = CreditFundingParams(lambda_B=0.005, lambda_C=0.01, gamma_K=0.10)


def option(strike, expiry=5.0, tenor=5.0, direction=Direction.PAYER, settlement=Settlement.PHYSICAL):
    return SwaptionSpec(expiry, SwapSpec.regular(1.0, strike, expiry, tenor, direction=direction), settlement)


def zero_ctx(names=("CVA", "FVA", "KVA")):
    return XvaContext(standard_terms(CreditFundingParams.zero(), names))


# -- decision rule ---------------------------------------------------------------


def test_decide_exercise_examples():
    ctx = ExerciseContext(V_ex=np.array([1.0, 1.0, -1.0, 0.5]), V_noex=np.zeros(4),
                          U_ex=np.array([-0.5, -1.0, 2.0, -0.5]), U_noex=np.zeros(4))
    np.testing.assert_array_equal(decide_exercise(ctx), [True, False, True, False])


def test_exercise_context_rejects_nan():
    with pytest.raises(ValueError, match="U_ex"):
        ExerciseContext(np.zeros(2), np.zeros(2), np.array([0.0, np.nan]), np.zeros(2))


@settings(max_examples=100, deadline=None)
@given(v=arrays(float, 20, elements=st.floats(-1, 1)), u=arrays(float, 20, elements=st.floats(-1, 0)),
       extra=st.floats(0, 1))
def test_more_cost_never_exercises_more(v, u, extra):
    z = np.zeros(20)
    base = decide_exercise(ExerciseContext(v, z, u, z))
    costlier = decide_exercise(ExerciseContext(v, z, u - extra, z))
    plain = decide_exercise(ExerciseContext(v, z, z, z))
    assert not np.any(costlier & ~base)
    assert not np.any(base & ~plain)


# -- single option ----------------------------------------------------------------


def test_zero_vol_deep_itm_is_discounted_intrinsic():
    ps = flat_paths(n_paths=16)
    opt = option(0.005)
    res = two_phase_lsm(ps, opt)
    assert res.exercised.all()
    assert res.value == pytest.approx(float(swap_values(ps, 0, opt.underlying)[0]), rel=1e-12)


def test_zero_vol_deep_otm_is_worthless():
    res = two_phase_lsm(flat_paths(n_paths=16), option(0.05))
    assert not res.exercised.any() and res.value == 0.0


def test_zero_xva_degeneracy_bit_identical(ref_paths):
    atm = swap_rate(ref_paths, 0, 0.0, option(0.02).underlying)
    for k in (atm - 0.01, atm, atm + 0.01):
        opt = option(k)
        plain = two_phase_lsm(ref_paths, opt)
        adj = two_phase_lsm(ref_paths, opt, zero_ctx())
        np.testing.assert_array_equal(adj.exercised, plain.exercised)
        assert adj.value == pytest.approx(plain.value, rel=1e-12, abs=0)


def test_costs_lower_exercise_and_value(ref_paths):
    atm = swap_rate(ref_paths, 0, 0.0, option(0.02).underlying)
    ctx = XvaContext(standard_terms(COSTS, ["CVA", "FVA", "KVA"]))
    rep, plain, adj = price_with_xva_boundary(ref_paths, option(atm), ctx)
    assert rep.exercise_prob_xva < rep.exercise_prob_noxva
    assert rep.value_xva < rep.value_noxva
    assert all(v < 0 for v in rep.xva_at_exercise.values())
    assert all(m > 0 for m in rep.xva_multiples.values())
    # exercised paths are exactly those where the economic value is positive
    np.testing.assert_array_equal(adj.exercised, adj.V_ex + adj.U_ex > 0)


def test_surface_count_short_grid():
    ps = flat_paths(horizon=4.0, steps_per_year=1, n_paths=64, vol=0.2)
    opt = option(0.02, expiry=1.0, tenor=3.0)
    ctx = XvaContext(standard_terms(COSTS, ["CVA"]))
    assert two_phase_lsm(ps, opt, ctx).n_surfaces == 6


def test_cash_settled_has_no_xva(ref_paths):
    opt = option(0.02, settlement=Settlement.CASH)
    ctx = XvaContext(standard_terms(COSTS, ["CVA", "FVA"]))
    res = two_phase_lsm(ref_paths, opt, ctx)
    assert not np.any(res.U_ex) and all(not np.any(u) for u in res.U_terms.values())
    np.testing.assert_array_equal(res.exercised, two_phase_lsm(ref_paths, opt).exercised)


def test_lsm_close_to_single_step(ref_paths):
    opt = option(0.0246)
    res = two_phase_lsm(ref_paths, opt)
    ss, se = single_step_value(ref_paths, opt)
    assert abs(res.value - ss) <= 3 * se


# -- decision states and portfolios -------------------------------------------------


def test_state_counts():
    assert [len(enumerate_decision_states([None] * n)) for n in range(5)] == [1, 2, 4, 8, 16]

    class Berm:
        def __init__(self, m):
            self.exercise_dates = list(range(m))

    assert len(enumerate_decision_states([Berm(2), Berm(3)])) == 12
    assert enumerate_decision_states([]) == [()]
    with pytest.raises(ValueError, match="cap"):
        enumerate_decision_states([None] * 5)


def test_portfolio_of_one_matches_single(ref_paths):
    opt = option(0.0246)
    single = two_phase_lsm(ref_paths, opt)
    port = portfolio_backward_induction(ref_paths, [opt])
    assert abs(port.value - single.value) <= single.stderr
    assert abs(port.exercise_freq[0] - np.mean(single.exercised)) < 0.02


def test_independent_options_add_without_xva(ref_paths):
    a, b = option(0.0175, expiry=2.0, tenor=5.0), option(0.0246, expiry=5.0, tenor=5.0)
    port = portfolio_backward_induction(ref_paths, [a, b])
    ra, rb = two_phase_lsm(ref_paths, a), two_phase_lsm(ref_paths, b)
    assert abs(port.value - (ra.value + rb.value)) <= 3 * np.hypot(ra.stderr, rb.stderr)


def test_offsetting_swaps_net_out_cva(ref_paths):
    k = 0.0246
    opts = [option(k), option(k, direction=Direction.RECEIVER)]
    ctx = XvaContext(standard_terms(COSTS, ["CVA"]))
    res = portfolio_backward_induction(ref_paths, opts, ctx)
    t = 5.0
    both = res.state_xva[(t, (), (0, 1))]["CVA"]
    alone = res.state_xva[(t, (), (0,))]["CVA"] + res.state_xva[(t, (), (1,))]["CVA"]
    assert alone < 0
    assert abs(both) <= 0.10 * abs(alone)


def test_portfolio_rejects_cash_settlement(flat2):
    with pytest.raises(ValueError, match="physically"):
        portfolio_backward_induction(flat2, [option(0.02, settlement=Settlement.CASH)])


def test_engine_config_checks():
    with pytest.raises(ValueError):
        EngineConfig(im_stride=0)
    with pytest.raises(ValueError, match="shock"):
        XvaContext(standard_terms(COSTS, ["MVA"]))
