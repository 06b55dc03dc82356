import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from intraday_alpha.errors import CalendarTooShort, ConfigError, MalformedRow
from intraday_alpha.study_periods import (
    ConstituencyTable,
    build_universe,
    generate_periods,
    load_membership,
    periods_for_panel,
)

from conftest import panel_from_arrays


def test_twenty_nine_years_give_26_periods():
    periods = generate_periods(29 * 252)
    assert len(periods) == 26
    for a, b in zip(periods, periods[1:]):
        assert a.trade_range.stop == b.trade_range.start


def test_exact_window_single_period():
    (p,) = generate_periods(1008)
    assert p.trade_range == range(756, 1008)
    assert p.train_range == range(0, 756)


def test_two_periods_abut():
    p0, p1 = generate_periods(1008 + 252)
    assert p0.trade_range == range(756, 1008)
    assert p1.trade_range == range(1008, 1260)
    assert p1.train_range == range(252, 1008)


def test_short_final_period():
    periods = generate_periods(1008 + 100)
    assert len(periods) == 2
    assert periods[-1].trade_range == range(1008, 1108)


def test_calendar_too_short():
    with pytest.raises(CalendarTooShort):
        generate_periods(1007)


@pytest.mark.parametrize("w,s,t", [(756, 252, 756), (700, 252, 756), (1008, 0, 756), (1008, 100, 756)])
def test_bad_params(w, s, t):
    with pytest.raises(ConfigError):
        generate_periods(5000, w, s, t)


@settings(max_examples=200, deadline=None)
@given(
    train=st.integers(1, 60),
    trade=st.integers(1, 40),
    n_extra=st.integers(0, 300),
)
def test_trade_ranges_tile_the_calendar(train, trade, n_extra):
    window = train + trade
    n = window + n_extra
    periods = generate_periods(n, window, trade, train)
    covered = [d for p in periods for d in p.trade_range]
    assert covered == list(range(train, n))
    for p in periods:
        assert p.full_range.start == p.train_range.start
        assert p.train_range.stop == p.trade_range.start
        assert p.trade_range.stop == p.full_range.stop
        assert len(p.full_range) >= train + 1
    assert generate_periods(n, window, trade, train) == periods


def _panel(n, s):
    return np.full((n, s), 10.0)


def test_universe_excludes_incomplete_history():
    op = _panel(1008, 3)
    op[100, 1] = np.nan
    panel = panel_from_arrays(op, op)
    (p,) = periods_for_panel(panel)
    assert p.universe == (0, 2)


def test_universe_all_members():
    op = _panel(1008, 3)
    (p,) = periods_for_panel(panel_from_arrays(op, op))
    assert p.universe == (0, 1, 2)


def test_empty_membership_gives_empty_universe():
    op = _panel(1008, 3)
    panel = panel_from_arrays(op, op)
    (p,) = generate_periods(panel.dates)
    assert build_universe(panel, p, ConstituencyTable()) == []


def test_membership_file(tmp_path):
    op = _panel(1008, 3)
    panel = panel_from_arrays(op, op)
    last_train = str(panel.dates[755])
    f = tmp_path / "m.csv"
    f.write_text(f"ticker,start_date,end_date\nT00,1990-01-01,2100-01-01\nT02,{last_train},{last_train}\nT01,1990-01-01,1990-12-31\n")
    table = load_membership(f)
    (p,) = periods_for_panel(panel, table)
    assert p.universe == (0, 2)


def test_membership_bad_rows(tmp_path):
    f = tmp_path / "m.csv"
    f.write_text("ticker,start_date,end_date\nA,2001-01-02,2000-01-01\n")
    with pytest.raises(MalformedRow):
        load_membership(f)
