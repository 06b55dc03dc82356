import sys

import numpy as np
import pytest

from intraday_alpha.market_data import PricePanel
from intraday_alpha.synth import SynthParams, make_panel


def panel_from_arrays(op, cp, volume=None, start="2001-01-02", tickers=None):
    op = np.asarray(op, dtype=np.float64)
    cp = np.asarray(cp, dtype=np.float64)
    n, s = op.shape
    if volume is None:
        volume = np.where(np.isnan(op), np.nan, 1000.0)
    dates = np.busday_offset(np.datetime64(start, "D"), np.arange(n), roll="forward")
    tickers = tickers or tuple(f"T{i:02d}" for i in range(s))
    return PricePanel(dates, tuple(tickers), op, cp, np.asarray(volume, dtype=np.float64))


def random_walk_panel(n_days, n_stocks, seed=0):
    rng = np.random.default_rng(seed)
    ir = 0.01 * rng.standard_normal((n_days, n_stocks))
    gap = 0.003 * rng.standard_normal((n_days, n_stocks))
    op = np.empty((n_days, n_stocks))
    cp = np.empty((n_days, n_stocks))
    op[0] = 50 + 10 * rng.random(n_stocks)
    cp[0] = op[0] * (1 + ir[0])
    for t in range(1, n_days):
        op[t] = cp[t - 1] * (1 + gap[t])
        cp[t] = op[t] * (1 + ir[t])
    return panel_from_arrays(op, cp)


@pytest.fixture(scope="session")
def small_panel():
    """20 stocks, 1100 days: one full study period."""
    return random_walk_panel(1100, 20, seed=3)


@pytest.fixture(scope="session")
def synth_panel_20():
    return make_panel(SynthParams(n_stocks=20, n_years=6, seed=1))


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in mod.summary_lines():
        terminalreporter.write_line(line)
