"""Run configuration: a flat ``key = value`` file, every key overridable by a flag.

Example::

    # demo.cfg
    panel = data/demo_panel.csv
    model = forest
    n_trees = 100
    seed = 7
    out = runs/demo
"""

from __future__ import annotations

import dataclasses
import datetime as dt
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Optional

from .backtest import StrategyConfig
from .errors import ConfigError
from .models.base import ClassifierSpec
from .study_periods import STRIDE_DAYS, TRAIN_DAYS, WINDOW_DAYS, validate_period_params


@dataclass
class RunConfig:
    panel: Optional[str] = None
    membership: Optional[str] = None
    out: str = "out"
    model: str = "forest"
    seed: int = 0
    start: Optional[str] = None
    end: Optional[str] = None
    window_days: int = WINDOW_DAYS
    stride_days: int = STRIDE_DAYS
    train_days: int = TRAIN_DAYS
    k: int = 10
    cost_per_halfturn: float = 0.0005
    skip_degenerate_days: bool = False
    n_trees: int = 1000
    max_depth: int = 10
    features_per_split: Optional[int] = None
    hidden_units: int = 25
    dropout_rate: float = 0.1
    learning_rate: float = 0.001
    batch_size: int = 512
    early_stop_patience: int = 10
    validation_fraction: float = 0.2
    max_epochs: int = 1000
    rolling_window: int = 252
    cache_dir: Optional[str] = None
    save_models: bool = False

    def classifier_spec(self) -> ClassifierSpec:
        return ClassifierSpec(
            kind=self.model,
            n_trees=self.n_trees,
            max_depth=self.max_depth,
            features_per_split=self.features_per_split,
            hidden_units=self.hidden_units,
            dropout_rate=self.dropout_rate,
            learning_rate=self.learning_rate,
            batch_size=self.batch_size,
            early_stop_patience=self.early_stop_patience,
            validation_fraction=self.validation_fraction,
            max_epochs=self.max_epochs,
            seed=self.seed,
        )

    def strategy(self) -> StrategyConfig:
        return StrategyConfig(
            k=self.k, cost_per_halfturn=self.cost_per_halfturn, skip_degenerate_days=self.skip_degenerate_days
        )

    def validate(self, check_paths: bool = True) -> None:
        """Raise ConfigError for anything that would fail later; no computation happens here."""
        if self.panel is None:
            raise ConfigError("panel path is required")
        if check_paths:
            for key in ("panel", "membership"):
                p = getattr(self, key)
                if p is not None and not Path(p).is_file():
                    raise ConfigError(f"{key} file not found: {p}")
        validate_period_params(self.window_days, self.stride_days, self.train_days)
        for key in ("start", "end"):
            v = getattr(self, key)
            if v is not None:
                try:
                    dt.date.fromisoformat(v)
                except ValueError:
                    raise ConfigError(f"{key} must be YYYY-MM-DD, got {v!r}") from None
        if self.start and self.end and self.start > self.end:
            raise ConfigError("start is after end")
        if self.rolling_window < 2:
            raise ConfigError("rolling_window must be >= 2")
        self.classifier_spec()
        self.strategy()

    def to_text(self) -> str:
        lines = []
        for f in fields(self):
            v = getattr(self, f.name)
            if v is not None:
                lines.append(f"{f.name} = {str(v).lower() if isinstance(v, bool) else v}")
        return "\n".join(lines) + "\n"


FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}


def coerce(key: str, raw: str):
    if key not in FIELD_TYPES:
        raise ConfigError(f"unknown config key {key!r}")
    kind = FIELD_TYPES[key]
    raw = raw.strip()
    if raw.lower() in ("", "none", "null") and kind.startswith("Optional"):
        return None
    base = kind.replace("Optional[", "").rstrip("]")
    try:
        if base == "int":
            return int(raw)
        if base == "float":
            return float(raw)
        if base == "bool":
            if raw.lower() in ("1", "true", "yes", "on"):
                return True
            if raw.lower() in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
    except ValueError:
        raise ConfigError(f"bad value for {key}: {raw!r}") from None
    return raw


def parse_config_text(text: str) -> dict:
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"config line {lineno}: expected key = value")
        key, raw = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key in values:
            raise ConfigError(f"config line {lineno}: duplicate key {key!r}")
        values[key] = coerce(key, raw)
    return values


def load_config(path=None, overrides: Optional[dict] = None) -> RunConfig:
    values = {}
    if path is not None:
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        values.update(parse_config_text(text))
    for k, v in (overrides or {}).items():
        if v is not None:
            values[k] = v
    return dataclasses.replace(RunConfig(), **values)
