"""Uniform fit / predict_proba interface over the forest and the LSTM."""

from __future__ import annotations

import json
import math
import time
from dataclasses import asdict, dataclass, field, fields
from typing import Any, Dict, Optional

import numpy as np

from ..errors import ConfigError, EmptyTrainingSet, ShapeMismatch
from ..seeding import substream
from .forest import DecisionTree, RandomForest
from .lstm import LstmNetwork, TrainingHistory, train_lstm

MODEL_FORMAT_VERSION = 1


@dataclass(frozen=True)
class ClassifierSpec:
    kind: str = "forest"
    # forest
    n_trees: int = 1000
    max_depth: int = 10
    features_per_split: Optional[int] = None  # None -> floor(sqrt(p))
    # lstm
    hidden_units: int = 25
    dropout_rate: float = 0.1
    output_classes: int = 2
    learning_rate: float = 0.001
    batch_size: int = 512
    early_stop_patience: int = 10
    validation_fraction: float = 0.2
    max_epochs: int = 1000
    rho: float = 0.9
    epsilon: float = 1e-7
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("forest", "lstm"):
            raise ConfigError(f"model kind must be forest or lstm, got {self.kind!r}")
        for name in ("n_trees", "max_depth", "hidden_units", "batch_size", "early_stop_patience", "max_epochs"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be positive")
        if self.features_per_split is not None and self.features_per_split < 1:
            raise ConfigError("features_per_split must be positive")
        if self.output_classes != 2:
            raise ConfigError("only binary classification is supported")
        if not 0 <= self.dropout_rate < 1:
            raise ConfigError("dropout_rate must be in [0, 1)")
        if not 0 < self.validation_fraction < 1:
            raise ConfigError("validation_fraction must be in (0, 1)")
        if self.learning_rate <= 0 or self.epsilon <= 0 or not 0 <= self.rho < 1:
            raise ConfigError("invalid optimiser constants")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must fit in 64 bits")

    def replace(self, **changes) -> "ClassifierSpec":
        return ClassifierSpec(**{**asdict(self), **changes})


@dataclass(eq=False)
class FittedModel:
    kind: str
    spec: ClassifierSpec
    estimator: Any
    metadata: Dict[str, Any] = field(default_factory=dict)

    def predict_proba(self, samples) -> np.ndarray:
        return predict_proba(self, samples)


def fit(spec: ClassifierSpec, train, period_tag=0) -> FittedModel:
    """Fit the model ``spec`` describes on a training SampleSet.

    ``period_tag`` separates the random streams of different study periods.
    """
    if len(train) == 0:
        raise EmptyTrainingSet("no training samples")
    feats = train.features
    t0 = time.perf_counter()
    if spec.kind == "forest":
        if not isinstance(feats, np.ndarray) or feats.ndim != 2:
            raise ShapeMismatch("forest needs a 2-D feature matrix")
        est = RandomForest(
            n_trees=spec.n_trees,
            max_depth=spec.max_depth,
            features_per_split=spec.features_per_split,
            seed=substream(spec.seed, "forest", period_tag).integers(0, 2**63),
        ).fit(feats, train.target)
        meta = {}
    else:
        if len(feats.shape) != 3:
            raise ShapeMismatch("lstm needs (n, steps, features) sequences")
        rng = substream(spec.seed, "lstm", period_tag)
        params, history = train_lstm(
            feats,
            train.target,
            rng,
            hidden_units=spec.hidden_units,
            dropout_rate=spec.dropout_rate,
            learning_rate=spec.learning_rate,
            batch_size=spec.batch_size,
            patience=spec.early_stop_patience,
            validation_fraction=spec.validation_fraction,
            max_epochs=spec.max_epochs,
            rho=spec.rho,
            epsilon=spec.epsilon,
        )
        est = LstmNetwork(params, history)
        meta = {
            "epochs_run": history.epochs_run,
            "best_epoch": history.best_epoch,
            "final_val_loss": history.val_loss[history.best_epoch] if history.val_loss else math.nan,
            "epoch_seconds": list(history.epoch_seconds),
        }
    meta["fit_seconds"] = time.perf_counter() - t0
    return FittedModel(spec.kind, spec, est, meta)


def predict_proba(model: FittedModel, samples) -> np.ndarray:
    """Class-1 probability per sample; ``samples`` is a feature array or a SampleSet."""
    feats = getattr(samples, "features", samples)
    if model.kind == "forest":
        if isinstance(feats, np.ndarray) and feats.ndim == 1:
            feats = feats[None]
        if not isinstance(feats, np.ndarray):
            raise ShapeMismatch("forest expects a feature matrix")
        if len(feats) == 0:
            return np.empty(0)
        return model.estimator.predict_proba(feats)
    if isinstance(feats, np.ndarray) and feats.ndim == 2:
        feats = feats[None]
    if len(feats.shape) != 3:
        raise ShapeMismatch("lstm expects (n, steps, features) input")
    return model.estimator.predict_proba(feats)


# Serialisation: a single JSON document
#   {"format": "intraday_alpha.model", "version": 1, "kind": ..., "spec": {...},
#    "metadata": {...}, "trees": [...]} (forest, node arrays per tree)
#   or "params": {"W": [[...]], ...} (lstm, nested lists)


def _jsonable(x):
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating,)):
        return float(x)
    return x


def model_to_dict(model: FittedModel) -> dict:
    doc = {
        "format": "intraday_alpha.model",
        "version": MODEL_FORMAT_VERSION,
        "kind": model.kind,
        "spec": asdict(model.spec),
        "metadata": _jsonable(model.metadata),
    }
    if model.kind == "forest":
        f = model.estimator
        doc["forest_seed"] = int(f.seed)
        doc["n_features"] = f.n_features
        doc["trees"] = [
            {k: getattr(t, k).tolist() for k in ("feature", "threshold", "left", "right", "value", "node_depth")}
            for t in f.trees
        ]
    else:
        doc["params"] = {k: v.tolist() for k, v in model.estimator.params.items()}
    return doc


def model_from_dict(doc: dict) -> FittedModel:
    if doc.get("format") != "intraday_alpha.model":
        raise ValueError("not a serialised intraday_alpha model")
    if doc.get("version") != MODEL_FORMAT_VERSION:
        raise ValueError(f"unsupported model format version {doc.get('version')}")
    known = {f.name for f in fields(ClassifierSpec)}
    spec = ClassifierSpec(**{k: v for k, v in doc["spec"].items() if k in known})
    if doc["kind"] == "forest":
        trees = [
            DecisionTree(
                np.array(t["feature"], dtype=np.int64),
                np.array(t["threshold"], dtype=np.float64),
                np.array(t["left"], dtype=np.int64),
                np.array(t["right"], dtype=np.int64),
                np.array(t["value"], dtype=np.float64),
                np.array(t["node_depth"], dtype=np.int64),
            )
            for t in doc["trees"]
        ]
        est = RandomForest(
            n_trees=len(trees), max_depth=spec.max_depth, features_per_split=spec.features_per_split,
            seed=doc["forest_seed"], trees=trees, n_features=doc["n_features"],
        )
        est._pack()
    else:
        est = LstmNetwork({k: np.array(v, dtype=np.float64) for k, v in doc["params"].items()})
    return FittedModel(doc["kind"], spec, est, doc.get("metadata", {}))


def save_model(model: FittedModel, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model_to_dict(model), fh)


def load_model(path) -> FittedModel:
    with open(path, encoding="utf-8") as fh:
        return model_from_dict(json.load(fh))
