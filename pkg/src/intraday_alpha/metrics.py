"""Performance statistics of a daily return series.

Conventions (all pinned, none inferred from a toolbox):

* standard deviation uses ``ddof = 1``; ``standard_error = std / sqrt(n)``
* quartiles and VaR are empirical quantiles with linear interpolation;
  VaR is reported as a signed return (negative means loss)
* CVaR is the mean of all returns at or below the VaR level
* skewness and excess kurtosis are the bias-corrected sample estimators
* Sharpe = mean / std * sqrt(periods_per_year), risk-free rate 0
* Sortino = mean / downside deviation * sqrt(periods_per_year), where the
  downside deviation is ``sqrt(mean(min(r - target, 0)^2))``
* annual return is geometric: ``prod(1 + r) ** (periods_per_year / n) - 1``
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields
from typing import Optional, Sequence

import numpy as np
from scipy import stats

from .errors import SeriesTooShort, ZeroDownside, ZeroVolatility

PERIODS_PER_YEAR = 252


@dataclass(frozen=True)
class MetricsReport:
    mean_long: float
    mean_short: float
    mean_return: float
    standard_error: float
    minimum: float
    q1: float
    median: float
    q3: float
    maximum: float
    share_positive: float
    std_dev: float
    skewness: float
    kurtosis: float
    var_1pct: float
    cvar_1pct: float
    var_5pct: float
    cvar_5pct: float
    max_drawdown: float
    ann_return: float
    ann_std: float
    ann_downside_dev: float
    sharpe: float
    sortino: float
    ann_return_arithmetic: float
    n_days: int

    def as_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def field_names(cls):
        return [f.name for f in fields(cls)]


def _as_array(returns) -> np.ndarray:
    return np.asarray(returns, dtype=np.float64).ravel()


def sample_std(returns) -> float:
    r = _as_array(returns)
    if len(r) < 2:
        raise SeriesTooShort("need at least 2 returns for a standard deviation")
    if np.ptp(r) == 0:
        return 0.0
    return float(np.std(r, ddof=1))


def quantile(returns, q: float) -> float:
    return float(np.quantile(_as_array(returns), q, method="linear"))


def historical_var(returns, alpha: float) -> float:
    r = _as_array(returns)
    if len(r) == 0:
        raise SeriesTooShort("empty return series")
    if not 0 < alpha < 1:
        raise ValueError("alpha must be in (0, 1)")
    return quantile(r, alpha)


def historical_cvar(returns, alpha: float) -> float:
    r = _as_array(returns)
    var = historical_var(r, alpha)
    return float(r[r <= var].mean())


def wealth_curve(returns) -> np.ndarray:
    """Compounded wealth ``W_0 = 1, W_t = prod_{i<=t} (1 + r_i)``; length ``n + 1``."""
    return np.concatenate([[1.0], np.cumprod(1.0 + _as_array(returns))])


def max_drawdown(returns) -> float:
    w = wealth_curve(returns)
    peak = np.maximum.accumulate(w)
    return float(np.max(1.0 - w / peak))


def downside_deviation(returns, target: float = 0.0) -> float:
    r = _as_array(returns)
    d = np.minimum(r - target, 0.0)
    return float(math.sqrt(np.mean(d * d)))


def annualized_stats(returns, periods_per_year: int = PERIODS_PER_YEAR) -> dict:
    r = _as_array(returns)
    if len(r) < 2:
        raise SeriesTooShort("need at least 2 returns")
    growth = float(np.prod(1.0 + r))
    ann_return = growth ** (periods_per_year / len(r)) - 1.0 if growth > 0 else -1.0
    root = math.sqrt(periods_per_year)
    return {
        "ann_return": ann_return,
        "ann_std": sample_std(r) * root,
        "ann_downside_dev": downside_deviation(r) * root,
    }


def sharpe_ratio(returns, periods_per_year: int = PERIODS_PER_YEAR, risk_free: float = 0.0) -> float:
    """``risk_free`` is an annual rate, converted to a per-period rate."""
    r = _as_array(returns)
    sd = sample_std(r)
    if sd == 0:
        raise ZeroVolatility("zero standard deviation")
    excess = r.mean() - risk_free / periods_per_year
    return float(excess / sd * math.sqrt(periods_per_year))


def sortino_ratio(returns, periods_per_year: int = PERIODS_PER_YEAR, target: float = 0.0) -> float:
    r = _as_array(returns)
    if len(r) < 2:
        raise SeriesTooShort("need at least 2 returns")
    dd = downside_deviation(r, target)
    if dd == 0:
        raise ZeroDownside("no returns below the target")
    return float((r.mean() - target) / dd * math.sqrt(periods_per_year))


def _or_nan(fn, *args):
    try:
        return fn(*args)
    except (ZeroVolatility, ZeroDownside):
        return math.nan


def _moment(fn, r):
    if len(r) < 4 or np.ptp(r) == 0:
        return math.nan
    return float(fn(r))


def compute_report(
    returns,
    long_returns: Optional[Sequence[float]] = None,
    short_returns: Optional[Sequence[float]] = None,
    periods_per_year: int = PERIODS_PER_YEAR,
) -> MetricsReport:
    """All statistics for one return series.

    ``long_returns`` / ``short_returns`` are the per-day leg returns; their
    means become ``mean_long`` / ``mean_short`` (NaN when not supplied).
    Undefined ratios (zero volatility or no downside) are NaN.
    """
    r = _as_array(returns)
    if len(r) < 2:
        raise SeriesTooShort(f"need at least 2 returns, got {len(r)}")
    q1, med, q3 = np.quantile(r, [0.25, 0.5, 0.75], method="linear")
    sd = sample_std(r)
    ann = annualized_stats(r, periods_per_year)
    return MetricsReport(
        mean_long=float(np.mean(long_returns)) if long_returns is not None and len(long_returns) else math.nan,
        mean_short=float(np.mean(short_returns)) if short_returns is not None and len(short_returns) else math.nan,
        mean_return=float(r.mean()),
        standard_error=sd / math.sqrt(len(r)),
        minimum=float(r.min()),
        q1=float(q1),
        median=float(med),
        q3=float(q3),
        maximum=float(r.max()),
        share_positive=float(np.mean(r > 0)),
        std_dev=sd,
        skewness=_moment(lambda x: stats.skew(x, bias=False), r),
        kurtosis=_moment(lambda x: stats.kurtosis(x, fisher=True, bias=False), r),
        var_1pct=historical_var(r, 0.01),
        cvar_1pct=historical_cvar(r, 0.01),
        var_5pct=historical_var(r, 0.05),
        cvar_5pct=historical_cvar(r, 0.05),
        max_drawdown=max_drawdown(r),
        ann_return=ann["ann_return"],
        ann_std=ann["ann_std"],
        ann_downside_dev=ann["ann_downside_dev"],
        sharpe=_or_nan(sharpe_ratio, r, periods_per_year),
        sortino=_or_nan(sortino_ratio, r, periods_per_year),
        ann_return_arithmetic=(1.0 + float(r.mean())) ** periods_per_year - 1.0,
        n_days=len(r),
    )
