import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from intraday_alpha import features as ft
from intraday_alpha.errors import IndexOutOfRange, InsufficientData, MissingData
from intraday_alpha.features import (
    FEATURE_NAMES,
    FIRST_FEATURE_DAY,
    LAGS,
    N_FOREST_FEATURES,
    ScalerParams,
    apply_scaler,
    close_return,
    fit_scaler,
    forest_feature_matrix,
    forest_features,
    intraday_return,
    lstm_sequence,
    open_return,
    quartiles,
)
from intraday_alpha.market_data import PricePanel

from conftest import panel_from_arrays, random_walk_panel


def one_stock(op, cp):
    return panel_from_arrays(np.asarray(op, float)[:, None], np.asarray(cp, float)[:, None])


def test_lag_set():
    assert len(LAGS) == 31
    assert LAGS[:20] == tuple(range(1, 21))
    assert LAGS[20:] == (40, 60, 80, 100, 120, 140, 160, 180, 200, 220, 240)
    assert N_FOREST_FEATURES == 93 == len(FEATURE_NAMES)
    assert FEATURE_NAMES[0] == "ir_1" and FEATURE_NAMES[31] == "cr_1" and FEATURE_NAMES[-1] == "or_240"


def test_intraday_return_arithmetic():
    p = one_stock([100.0, 50.0], [102.0, 49.0])
    assert intraday_return(p, 0, 1, 1) == pytest.approx(0.02, abs=1e-15)
    assert intraday_return(p, 0, 1, 0) == pytest.approx(-0.02, abs=1e-15)
    q = one_stock([7.0, 7.0], [7.0, 7.0])
    assert intraday_return(q, 0, 1, 1) == 0.0


def test_close_return_arithmetic_and_boundary():
    cp = np.full(6, 100.0)
    cp[4] = 110.0
    p = one_stock(np.full(6, 100.0), cp)
    assert close_return(p, 0, 5, 3) == pytest.approx(0.10, abs=1e-15)
    assert close_return(p, 0, 4, 2) == 0.0
    assert close_return(p, 0, 4, 3) == 0.0  # t = m + 1 reads cp_0
    with pytest.raises(IndexOutOfRange):
        close_return(p, 0, 3, 3)


def test_open_return_arithmetic_and_missing():
    p = one_stock([100.0, 95.0], [100.0, 90.0])
    assert open_return(p, 0, 1, 1) == pytest.approx(-0.05, abs=1e-15)
    assert open_return(one_stock([3.0, 3.0], [3.0, 3.0]), 0, 1, 1) == 0.0
    op = np.array([[100.0, 100.0], [np.nan, 100.0]])
    q = panel_from_arrays(op, op)
    with pytest.raises(MissingData):
        open_return(q, 0, 1, 1)


def test_constant_prices_give_zero_features():
    p = one_stock(np.full(300, 42.0), np.full(300, 42.0))
    f = forest_features(p, 0, 299)
    assert f.shape == (93,)
    assert np.all(f == 0.0)


def test_first_defined_day():
    # the deepest read is the close 241 days back, so day 241 is the first with a full row
    assert FIRST_FEATURE_DAY == 241
    p = random_walk_panel(300, 1)
    assert np.isfinite(forest_features(p, 0, 241)).all()
    with pytest.raises(IndexOutOfRange):
        forest_features(p, 0, 240)
    with pytest.raises(IndexOutOfRange):
        forest_features(p, 0, 239)


def test_vectorised_matches_scalar():
    p = random_walk_panel(320, 3, seed=5)
    mat = forest_feature_matrix(p.open, p.close_adj)
    assert mat.shape == (320, 3, 93)
    assert np.isnan(mat[:FIRST_FEATURE_DAY]).all()
    for s in range(3):
        for t in (241, 260, 319):
            np.testing.assert_array_equal(mat[t, s], forest_features(p, s, t))


def test_anti_lookahead_mutation():
    p = random_walk_panel(420, 2, seed=9)
    base = forest_feature_matrix(p.open, p.close_adj)
    params = fit_scaler(p, 0, range(0, 400))
    rng = np.random.default_rng(0)
    for t in rng.integers(241, 420, size=15):
        cp = p.close_adj.copy()
        cp[t, 0] *= 1.37
        mutated = PricePanel(p.dates, p.tickers, p.open, cp, p.volume)
        after = forest_feature_matrix(mutated.open, mutated.close_adj)
        np.testing.assert_array_equal(after[: t + 1], base[: t + 1])
        assert not np.array_equal(after[t + 1:, 0], base[t + 1:, 0]) or t == 419
        np.testing.assert_array_equal(lstm_sequence(mutated, 0, int(t), params), lstm_sequence(p, 0, int(t), params))


@settings(max_examples=30, deadline=None)
@given(lam=st.floats(1e-3, 1e3), seed=st.integers(0, 1000))
def test_scale_equivariance(lam, seed):
    p = random_walk_panel(260, 1, seed=seed)
    a = forest_feature_matrix(p.open, p.close_adj)[241:]
    b = forest_feature_matrix(p.open * lam, p.close_adj * lam)[241:]
    np.testing.assert_allclose(a, b, rtol=0, atol=1e-12)


def test_quartiles_linear_rule():
    q1, q2, q3 = quartiles([1, 2, 3, 4, 5, 6, 7, 8])
    assert (q1, q2, q3) == (2.75, 4.5, 6.25)
    assert quartiles([3.0] * 10) == (3.0, 3.0, 3.0)
    with pytest.raises(InsufficientData):
        quartiles([1, 2, 3])


def test_quartiles_ignore_outlier_magnitude():
    rng = np.random.default_rng(1)
    x = list(rng.normal(size=100))
    a = quartiles(x + [1e6])
    b = quartiles(x + [1e3])
    assert a == b


def test_quartiles_match_sort_oracle():
    rng = np.random.default_rng(2)
    for n in (4, 5, 17, 100, 101):
        x = rng.normal(size=n)
        xs = np.sort(x)
        for q, got in zip((0.25, 0.5, 0.75), quartiles(x)):
            h = (n - 1) * q
            lo = int(np.floor(h))
            hi = min(lo + 1, n - 1)
            want = xs[lo] + (h - lo) * (xs[hi] - xs[lo])
            assert got == pytest.approx(want, abs=1e-15)


def test_apply_scaler_cases():
    params = ScalerParams(np.array([[1.0, 2.0, 4.0], [0.0, 0.0, 0.0], [-1.0, 0.0, 1.0]]))
    assert apply_scaler(params, 2.0, "ir") == 0.0
    assert apply_scaler(params, 4.0, "ir") == pytest.approx((4 - 2) / (4 - 1))
    assert apply_scaler(params, 123.0, "cr") == 0.0
    assert apply_scaler(params, 0.5, 2) == 0.25


@settings(max_examples=100, deadline=None)
@given(
    q=st.lists(st.floats(-1, 1), min_size=3, max_size=3).map(sorted),
    a=st.floats(-10, 10),
    b=st.floats(-10, 10),
)
def test_apply_scaler_monotone(q, a, b):
    params = ScalerParams(np.array([q, q, q]))
    lo, hi = min(a, b), max(a, b)
    assert apply_scaler(params, lo, "ir") <= apply_scaler(params, hi, "ir")


def test_lstm_sequence_shape_and_overlap():
    p = random_walk_panel(400, 1, seed=4)
    params = fit_scaler(p, 0, range(0, 300))
    a = lstm_sequence(p, 0, 300, params)
    b = lstm_sequence(p, 0, 301, params)
    assert a.shape == (240, 3)
    np.testing.assert_array_equal(a[1:], b[:-1])
    with pytest.raises(IndexOutOfRange):
        lstm_sequence(p, 0, 240, params)
    assert lstm_sequence(p, 0, 241, params).shape == (240, 3)


def test_lstm_sequence_constant_prices_zero():
    p = one_stock(np.full(300, 9.0), np.full(300, 9.0))
    params = fit_scaler(p, 0, range(0, 280))
    assert np.all(lstm_sequence(p, 0, 290, params) == 0.0)


def test_lstm_sequence_row_values():
    p = random_walk_panel(300, 1, seed=8)
    params = fit_scaler(p, 0, range(0, 250))
    seq = lstm_sequence(p, 0, 299, params)
    t = 299
    raw = [intraday_return(p, 0, t, 1), close_return(p, 0, t, 1), open_return(p, 0, t, 1)]
    want = [apply_scaler(params, v, k) for v, k in zip(raw, ("ir", "cr", "or"))]
    np.testing.assert_allclose(seq[-1], want, rtol=0, atol=1e-13)


def test_scaler_uses_training_days_only():
    p = random_walk_panel(400, 1, seed=12)
    a = fit_scaler(p, 0, range(0, 300))
    cp = p.close_adj.copy()
    cp[310:] *= 3.0
    q = PricePanel(p.dates, p.tickers, p.open, cp, p.volume)
    b = fit_scaler(q, 0, range(0, 300))
    np.testing.assert_array_equal(a.q, b.q)
