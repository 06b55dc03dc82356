import numpy as np
import pytest

from intraday_alpha import features as ft
from intraday_alpha.dataset import SequenceView, build_dataset
from intraday_alpha.errors import EmptyUniverse
from intraday_alpha.labels import label_day
from intraday_alpha.market_data import PricePanel
from intraday_alpha.study_periods import periods_for_panel

from conftest import random_walk_panel


@pytest.fixture(scope="module")
def panel():
    return random_walk_panel(1008, 4, seed=21)


@pytest.fixture(scope="module")
def period(panel):
    (p,) = periods_for_panel(panel)
    return p


def test_row_counts_single_stock():
    p = random_walk_panel(1008, 1, seed=2)
    (period,) = periods_for_panel(p)
    ds = build_dataset(p, period, "forest")
    # training days 241..755
    assert len(ds.train) == 756 - ft.FIRST_FEATURE_DAY == 515
    assert len(ds.trade) == 252
    assert ds.train.features.shape == (515, 93)


def test_order_and_targets(panel, period):
    ds = build_dataset(panel, period, "forest")
    S = len(period.universe)
    assert list(ds.train.stock_index) == sorted(ds.train.stock_index)
    for s in range(S):
        days = ds.train.day_index[ds.train.stock_index == s]
        assert list(days) == list(range(241, 756))
    rng = np.random.default_rng(0)
    for i in rng.integers(0, len(ds.train), 40):
        s, t = int(ds.train.stock_index[i]), int(ds.train.day_index[i])
        assert ds.train.target[i] == label_day(panel, period.universe, t).labels[s]
        np.testing.assert_array_equal(ds.train.features[i], ft.forest_features(panel, s, t))


def test_lstm_rows_match_sequences(panel, period):
    ds = build_dataset(panel, period, "lstm")
    assert isinstance(ds.train.features, SequenceView)
    assert ds.train.features.shape == (len(ds.train), 240, 3)
    rng = np.random.default_rng(1)
    idx = rng.integers(0, len(ds.trade), 10)
    batch = ds.trade.features[idx]
    for row, i in zip(batch, idx):
        s, t = int(ds.trade.stock_index[i]), int(ds.trade.day_index[i])
        want = ft.lstm_sequence(panel, s, t, ds.scalers[s])
        np.testing.assert_allclose(row, want, rtol=0, atol=1e-12)


@pytest.mark.parametrize("kind", ["forest", "lstm"])
def test_trade_prices_do_not_leak_into_training(panel, period, kind):
    base = build_dataset(panel, period, kind)
    cp = panel.close_adj.copy()
    op = panel.open.copy()
    cp[756:] *= np.linspace(0.5, 2.0, 252)[:, None]
    op[757:] *= 1.1
    mutated = PricePanel(panel.dates, panel.tickers, op, cp, panel.volume)
    after = build_dataset(mutated, period, kind)
    np.testing.assert_array_equal(after.train.target, base.train.target)
    np.testing.assert_array_equal(np.asarray(after.train.features), np.asarray(base.train.features))


def test_empty_universe(panel, period):
    with pytest.raises(EmptyUniverse):
        build_dataset(panel, period.with_universe(()), "forest")


@pytest.mark.parametrize("kind", ["forest", "lstm"])
def test_cache_round_trip(tmp_path, panel, period, kind):
    a = build_dataset(panel, period, kind, cache_dir=tmp_path)
    assert list(tmp_path.iterdir())
    b = build_dataset(panel, period, kind, cache_dir=tmp_path)
    np.testing.assert_array_equal(np.asarray(a.train.features), np.asarray(b.train.features))
    np.testing.assert_array_equal(a.trade.target, b.trade.target)
    np.testing.assert_array_equal(a.trade.stock_index, b.trade.stock_index)


def test_sampleset_subset(panel, period):
    ds = build_dataset(panel, period, "lstm")
    sub = ds.train.subset(np.arange(5, 10))
    assert len(sub) == 5
    np.testing.assert_array_equal(sub.features[np.arange(5)], ds.train.features[np.arange(5, 10)])
