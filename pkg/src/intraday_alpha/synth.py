"""Synthetic price panels with a planted intraday-return autocorrelation.

Each stock's intraday return follows ``ir[t] = phi * ir[t-1] + noise * eps``;
``phi = 0`` gives a signal-free control.  Opens gap from the previous close
by an independent overnight shock.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .market_data import PricePanel
from .seeding import substream

DAYS_PER_YEAR = 252


@dataclass(frozen=True)
class SynthParams:
    n_stocks: int = 100
    n_years: int = 6
    phi: float = 0.3
    noise: float = 0.02
    overnight_noise: float = 0.005
    zero_volume_prob: float = 0.0
    seed: int = 0
    start: str = "2000-01-03"

    def __post_init__(self):
        if self.n_stocks < 1 or self.n_years < 1:
            raise ConfigError("n_stocks and n_years must be positive")
        if not 0 <= self.phi < 1:
            raise ConfigError("phi must be in [0, 1)")
        if self.noise <= 0 or self.overnight_noise < 0:
            raise ConfigError("noise scales must be positive")
        if not 0 <= self.zero_volume_prob < 1:
            raise ConfigError("zero_volume_prob must be in [0, 1)")


def make_panel(params: SynthParams) -> PricePanel:
    rng = substream(params.seed, "synth")
    n, S = params.n_years * DAYS_PER_YEAR, params.n_stocks
    eps = rng.standard_normal((n, S))
    ir = np.empty((n, S))
    ir[0] = params.noise * eps[0]
    for t in range(1, n):
        ir[t] = params.phi * ir[t - 1] + params.noise * eps[t]
    np.clip(ir, -0.5, 0.5, out=ir)
    gap = np.clip(params.overnight_noise * rng.standard_normal((n, S)), -0.5, 0.5)
    op = np.empty((n, S))
    cp = np.empty((n, S))
    op[0] = 100.0 * np.exp(0.3 * rng.standard_normal(S))
    cp[0] = op[0] * (1.0 + ir[0])
    for t in range(1, n):
        op[t] = cp[t - 1] * (1.0 + gap[t])
        cp[t] = op[t] * (1.0 + ir[t])
    volume = rng.integers(1_000, 100_000, size=(n, S)).astype(np.float64)
    if params.zero_volume_prob > 0:
        volume[rng.random((n, S)) < params.zero_volume_prob] = 0.0
    dates = np.busday_offset(np.datetime64(params.start, "D"), np.arange(n), roll="forward")
    tickers = tuple(f"S{i:03d}" for i in range(S))
    return PricePanel(dates, tickers, op, cp, volume)
