"""Daily intraday long-short strategy: features, classifiers, walk-forward backtest, statistics."""

from .backtest import ReturnSeries, StrategyConfig, run_backtest
from .market_data import PricePanel, load_panel, write_panel
from .metrics import MetricsReport, compute_report
from .models import ClassifierSpec, fit, predict_proba
from .study_periods import StudyPeriod, generate_periods, periods_for_panel

__version__ = "0.1.0"

__all__ = [
    "ClassifierSpec",
    "MetricsReport",
    "PricePanel",
    "ReturnSeries",
    "StrategyConfig",
    "StudyPeriod",
    "compute_report",
    "fit",
    "generate_periods",
    "load_panel",
    "periods_for_panel",
    "predict_proba",
    "run_backtest",
    "write_panel",
]
