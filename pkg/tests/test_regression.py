import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from xvaboundary.exercise import two_phase_lsm
from xvaboundary.instruments import SwapSpec, SwaptionSpec
from xvaboundary.ratesim import PathSet
from xvaboundary.regression import (Fallback, LocalRegressionConfig, LocalSmoother, RegressorSpec,
                                    fit_conditional_expectations, fit_local_regression, predict)

from conftest import flat_paths

finite = st.floats(-1e3, 1e3, allow_nan=False)


def test_constant_targets():
    xs = np.random.default_rng(0).normal(size=200)
    s = fit_local_regression(xs, np.full(200, 3.25))
    assert np.all(s.ordinates == 3.25)
    assert s(np.array([-10.0, 0.0, 10.0])).tolist() == [3.25] * 3


def test_linear_symmetric_window():
    xs = np.arange(1.0, 101.0)
    s = fit_local_regression(xs, xs.copy(), LocalRegressionConfig(bandwidth=15))
    assert s(50.0) == pytest.approx(50.0, abs=1e-12)


def test_global_window_gives_mean():
    rng = np.random.default_rng(1)
    xs, ys = rng.normal(size=57), rng.normal(size=57)
    s = fit_local_regression(xs, ys, LocalRegressionConfig(bandwidth=57))
    np.testing.assert_allclose(s(np.linspace(-3, 3, 11)), ys.mean(), rtol=1e-13)


def test_end_windows_hold_full_bandwidth():
    xs = np.arange(10.0)
    s = fit_local_regression(xs, xs ** 2, LocalRegressionConfig(bandwidth=3))
    # first knot averages knots 0, 1, 2; last averages 7, 8, 9
    assert s.ordinates[0] == pytest.approx((0 + 1 + 4) / 3)
    assert s.ordinates[-1] == pytest.approx((49 + 64 + 81) / 3)
    assert s.ordinates[5] == pytest.approx((16 + 25 + 36) / 3)


def test_predict_at_knot_clamp_and_midpoint():
    xs = np.array([0.0, 1.0, 2.0, 3.0])
    s = fit_local_regression(xs, np.array([1.0, 5.0, 2.0, 8.0]), LocalRegressionConfig(bandwidth=1))
    assert predict(s, 2.0) == 2.0
    assert predict(s, -7.0) == 1.0
    assert predict(s, 99.0) == 8.0
    assert predict(s, 1.5) == pytest.approx(3.5)


def test_ties_merge_into_strictly_increasing_knots():
    xs = np.array([3.0, 1.0, 1.0, 2.0, 3.0, 3.0])
    ys = np.array([1.0, 2.0, 4.0, 6.0, 2.0, 3.0])
    s = fit_local_regression(xs, ys, LocalRegressionConfig(bandwidth=1))
    assert s.knots.tolist() == [1.0, 2.0, 3.0]
    assert s.ordinates.tolist() == [3.0, 6.0, 2.0]


def test_exact_for_regressor_measurable_targets_on_ties():
    rng = np.random.default_rng(2)
    xs = rng.integers(0, 20, size=500).astype(float)
    ys = np.sin(xs)
    sm = LocalSmoother(xs, LocalRegressionConfig(bandwidth=1))
    np.testing.assert_allclose(sm.smooth(ys), ys, rtol=0, atol=1e-15)


def test_errors():
    with pytest.raises(ValueError):
        fit_local_regression(np.arange(5.0), np.arange(4.0))
    with pytest.raises(ValueError):
        fit_local_regression(np.arange(5.0), np.arange(5.0), LocalRegressionConfig(bandwidth=6))
    with pytest.raises(ValueError):
        LocalRegressionConfig(bandwidth=0)
    with pytest.raises(ValueError):
        RegressorSpec(3)
    with pytest.raises(ValueError):
        RegressorSpec(1)


def test_quadratic_fallback_is_exact_on_quadratics():
    xs = np.linspace(-2, 2, 41)
    ys = 1.0 - 2.0 * xs + 0.5 * xs ** 2
    s = fit_local_regression(xs, ys, LocalRegressionConfig(fallback=Fallback.QUADRATIC))
    assert s.coefficients is not None
    assert s(1.3) == pytest.approx(1.0 - 2.6 + 0.5 * 1.69, abs=1e-12)


def test_smooth_matches_fit_at_samples():
    rng = np.random.default_rng(3)
    xs, ys = rng.normal(size=300), rng.normal(size=300)
    sm = LocalSmoother(xs)
    np.testing.assert_allclose(sm.smooth(ys), sm.fit(ys)(xs), rtol=1e-14)
    both = sm.smooth(np.column_stack([ys, 2 * ys]))
    np.testing.assert_allclose(both[:, 1], 2 * both[:, 0], rtol=1e-14)


@settings(max_examples=60, deadline=None)
@given(data=st.data(), n=st.integers(5, 60))
def test_fitted_values_are_averages(data, n):
    xs = data.draw(arrays(float, n, elements=st.floats(-5, 5)))
    ys = data.draw(arrays(float, n, elements=finite))
    bw = data.draw(st.integers(1, n))
    fitted = LocalSmoother(xs, LocalRegressionConfig(bandwidth=bw)).smooth(ys)
    tol = 1e-9 * (1 + np.abs(ys).max())
    assert fitted.min() >= ys.min() - tol and fitted.max() <= ys.max() + tol


@settings(max_examples=40, deadline=None)
@given(data=st.data(), n=st.integers(5, 40))
def test_order_of_samples_does_not_matter(data, n):
    xs = data.draw(arrays(float, n, elements=st.floats(-5, 5)))
    ys = data.draw(arrays(float, n, elements=finite))
    perm = np.random.default_rng(n).permutation(n)
    a = fit_local_regression(xs, ys, LocalRegressionConfig(bandwidth=3))
    b = fit_local_regression(xs[perm], ys[perm], LocalRegressionConfig(bandwidth=3))
    np.testing.assert_allclose(a.ordinates, b.ordinates, rtol=1e-12, atol=1e-9)


# -- conditional expectations on paths -------------------------------------------


def _hand_pathset():
    """Eight paths, two dates; the numeraire at t=1 takes two values."""
    B1 = np.array([1.02, 1.02, 1.02, 1.02, 1.05, 1.05, 1.05, 1.05])
    B2 = np.array([1.03, 1.05, 1.04, 1.06, 1.08, 1.10, 1.07, 1.12])
    numeraire = np.column_stack([np.ones(8), B1, B2])
    grid = np.array([0.0, 1.0, 2.0])
    tenor = np.array([0.0, 1.0, 2.0])
    fwd = np.zeros((8, 3, 2))
    return PathSet(grid, tenor, fwd, np.ones((8, 3)), numeraire, 0)


def test_terminal_discount_by_hand():
    ps = _hand_pathset()
    gamma = 1.0 / ps.numeraire[:, 2]
    surf = fit_conditional_expectations(ps, {"P": gamma}, RegressorSpec(2), 1.0,
                                        LocalRegressionConfig(bandwidth=1))["P"]
    x = 1.0 / ps.numeraire[:, 1]
    lo, hi = gamma[:4].mean(), gamma[4:].mean()
    assert surf(x[0]) == pytest.approx(lo, rel=1e-15)
    assert surf(x[7]) == pytest.approx(hi, rel=1e-15)
    assert surf.observation_date == 1.0 and surf.quantity_id == "P"


def test_deterministic_targets_give_constant_surfaces():
    ps = flat_paths(rate=0.02, vol=0.0, n_paths=40)
    d = ps.date_index(3.0)
    targets = {("ex", "CVA", k): np.full(40, 0.1 * k) for k in range(4)}
    out = fit_conditional_expectations(ps, targets, RegressorSpec(1, 6.0), 3.0)
    for (_, _, k), surf in out.items():
        assert np.all(surf.ordinates == pytest.approx(0.1 * k, abs=1e-15))


def test_empty_targets_rejected(flat2):
    with pytest.raises(ValueError):
        fit_conditional_expectations(flat2, {}, RegressorSpec(2), 0.0)


def test_obs_date_off_grid_rejected(flat2):
    with pytest.raises(ValueError):
        fit_conditional_expectations(flat2, {"a": np.ones(8)}, RegressorSpec(2), 0.013)


def test_phase_one_regressor_is_mean_remaining_discount():
    ps = flat_paths(rate=0.02, vol=0.0, n_paths=2)
    x = RegressorSpec(1, 4.0).values(ps, ps.date_index(2.0))
    assert x[0] == pytest.approx((1 / 1.02 + 1 / 1.02 ** 2) / 2, rel=1e-15)


def test_quadratic_fallback_close_to_local(ref_paths):
    """Switching the estimator moves the ATM price by at most one standard error."""
    opt = SwaptionSpec(5.0, SwapSpec.regular(1.0, 0.0246, 5.0, 5.0))
    local = two_phase_lsm(ref_paths, opt)
    quad = two_phase_lsm(ref_paths, opt, reg_cfg=LocalRegressionConfig(fallback="quadratic"))
    assert abs(local.value - quad.value) <= local.stderr
