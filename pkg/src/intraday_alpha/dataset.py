"""Per-period training and trading sample sets.

Rows are concatenated stock by stock (ticker order), days ascending within
each stock.  Inside a period all day indices are local: day 0 is the first
day of the period's window.
"""

from __future__ import annotations

import hashlib
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, NamedTuple, Optional, Union

import numpy as np

from . import features as ft
from .errors import EmptyUniverse
from .labels import label_matrix
from .market_data import PricePanel
from .study_periods import StudyPeriod

logger = logging.getLogger(__name__)

MODEL_KINDS = ("forest", "lstm")
CACHE_VERSION = 1


class Sample(NamedTuple):
    stock_index: int
    day_index: int
    features: np.ndarray
    target: int


class SequenceView:
    """Lazy ``(n, 240, 3)`` array of overlapping windows over scaled features.

    ``scaled`` is ``(n_stocks, T, 3)``; sample ``i`` is the window of rows
    ``day[i] - 239 .. day[i]`` of stock row ``pos[i]``.  Windows are only
    materialised for the indices requested.
    """

    def __init__(self, scaled: np.ndarray, pos: np.ndarray, day: np.ndarray, length: int = ft.SEQUENCE_LENGTH):
        self.scaled = scaled
        self.pos = np.asarray(pos, dtype=np.int64)
        self.day = np.asarray(day, dtype=np.int64)
        self.length = length
        self._windows = np.lib.stride_tricks.sliding_window_view(scaled, length, axis=1)

    def __len__(self) -> int:
        return len(self.pos)

    @property
    def shape(self):
        return (len(self), self.length, self.scaled.shape[-1])

    def __getitem__(self, idx) -> np.ndarray:
        if isinstance(idx, (int, np.integer)):
            return self[np.array([idx])][0]
        idx = np.arange(len(self))[idx] if isinstance(idx, slice) else np.asarray(idx)
        w = self._windows[self.pos[idx], self.day[idx] - self.length + 1]
        return np.ascontiguousarray(w.transpose(0, 2, 1))

    def __array__(self, dtype=None, copy=None):
        out = self[np.arange(len(self))]
        return out if dtype is None else out.astype(dtype)

    def subset(self, idx) -> "SequenceView":
        idx = np.asarray(idx)
        return SequenceView(self.scaled, self.pos[idx], self.day[idx], self.length)


Features = Union[np.ndarray, SequenceView]


@dataclass
class SampleSet:
    """Parallel arrays: ``stock_index`` (panel column), ``day_index`` (local day)."""

    stock_index: np.ndarray
    day_index: np.ndarray
    features: Features
    target: np.ndarray

    def __len__(self) -> int:
        return len(self.stock_index)

    def __iter__(self) -> Iterator[Sample]:
        for i in range(len(self)):
            yield Sample(int(self.stock_index[i]), int(self.day_index[i]), self.features[i], int(self.target[i]))

    def subset(self, idx) -> "SampleSet":
        idx = np.asarray(idx)
        feats = self.features.subset(idx) if isinstance(self.features, SequenceView) else self.features[idx]
        return SampleSet(self.stock_index[idx], self.day_index[idx], feats, self.target[idx])


@dataclass
class SplitDataset:
    kind: str
    period_index: int
    offset: int  # absolute panel index of local day 0
    train: SampleSet
    trade: SampleSet
    scalers: Optional[dict] = None  # stock_index -> ScalerParams, lstm only


def _concat(parts, n_features):
    if not parts:
        return np.empty((0, n_features))
    return np.concatenate(parts)


def build_dataset(
    panel: PricePanel,
    period: StudyPeriod,
    model_kind: str,
    cache_dir: Optional[Path] = None,
) -> SplitDataset:
    if model_kind not in MODEL_KINDS:
        raise ValueError(f"model_kind must be one of {MODEL_KINDS}")
    universe = list(period.universe)
    if not universe:
        raise EmptyUniverse(f"period {period.index} has an empty universe")
    if cache_dir is not None:
        cached = _load_cached(panel, period, model_kind, Path(cache_dir))
        if cached is not None:
            return cached

    start, stop = period.full_range.start, period.full_range.stop
    op = np.asarray(panel.open[start:stop][:, universe])
    cp = np.asarray(panel.close_adj[start:stop][:, universe])
    n_days = stop - start
    train_days = len(period.train_range)
    targets = label_matrix(op, cp)

    first = ft.FIRST_FEATURE_DAY
    train_t = np.arange(first, train_days)
    trade_t = np.arange(train_days, n_days)

    tr_stock, tr_day, te_stock, te_day = [], [], [], []
    tr_x, te_x = [], []
    scalers = {}
    scaled_rows = []
    for j, s in enumerate(universe):
        if model_kind == "forest":
            f = ft.forest_feature_matrix(op[:, j], cp[:, j])
            ok = ~np.isnan(f).any(axis=1)
        else:
            params = ft.fit_scaler_arrays(op[:, j], cp[:, j], range(0, train_days))
            scalers[s] = params
            raw = ft.unit_lag_features(op[:, j], cp[:, j])
            scaled = ft.scale_unit_lag(params, raw)
            scaled_rows.append(scaled)
            # a window ending at t covers t-239..t
            bad = np.isnan(raw).any(axis=1).astype(np.int64)
            csum = np.concatenate([[0], np.cumsum(bad)])
            ok = np.zeros(n_days, dtype=bool)
            ends = np.arange(ft.SEQUENCE_LENGTH - 1, n_days)
            ok[ends] = (csum[ends + 1] - csum[ends + 1 - ft.SEQUENCE_LENGTH]) == 0
        t_tr = train_t[ok[train_t]]
        t_te = trade_t[ok[trade_t]]
        if len(t_tr) < len(train_t):
            logger.warning("dropping %d training rows for %s", len(train_t) - len(t_tr), panel.tickers[s])
        tr_stock.append(np.full(len(t_tr), s))
        tr_day.append(t_tr)
        te_stock.append(np.full(len(t_te), s))
        te_day.append(t_te)
        if model_kind == "forest":
            tr_x.append(f[t_tr])
            te_x.append(f[t_te])

    tr_stock, tr_day = np.concatenate(tr_stock), np.concatenate(tr_day)
    te_stock, te_day = np.concatenate(te_stock), np.concatenate(te_day)
    col = {s: j for j, s in enumerate(universe)}
    tr_y = targets[tr_day, [col[s] for s in tr_stock]] if len(tr_day) else np.empty(0, np.int8)
    te_y = targets[te_day, [col[s] for s in te_stock]] if len(te_day) else np.empty(0, np.int8)

    if model_kind == "forest":
        tr_f = _concat(tr_x, ft.N_FOREST_FEATURES)
        te_f = _concat(te_x, ft.N_FOREST_FEATURES)
    else:
        stack = np.stack(scaled_rows)
        tr_f = SequenceView(stack, [col[s] for s in tr_stock], tr_day)
        te_f = SequenceView(stack, [col[s] for s in te_stock], te_day)

    ds = SplitDataset(
        kind=model_kind,
        period_index=period.index,
        offset=start,
        train=SampleSet(tr_stock, tr_day, tr_f, np.asarray(tr_y, dtype=np.int8)),
        trade=SampleSet(te_stock, te_day, te_f, np.asarray(te_y, dtype=np.int8)),
        scalers=scalers or None,
    )
    if cache_dir is not None:
        _store_cached(ds, panel, period, Path(cache_dir))
    return ds


# Cache format: one ``.npz`` per (panel hash, period, kind) holding the raw
# arrays of both sample sets; lstm entries store the scaled feature stack
# and the stock/day index arrays instead of materialised windows.


def cache_key(panel: PricePanel, period: StudyPeriod, model_kind: str) -> str:
    h = hashlib.sha256()
    h.update(f"v{CACHE_VERSION}|{period.index}|{model_kind}|".encode())
    h.update(f"{period.full_range}|{period.train_range}|{period.universe}|".encode())
    h.update(panel.fingerprint().encode())
    return h.hexdigest()[:32]


def _store_cached(ds: SplitDataset, panel, period, cache_dir: Path) -> None:
    cache_dir.mkdir(parents=True, exist_ok=True)
    arrays = {}
    for name, part in (("train", ds.train), ("trade", ds.trade)):
        arrays[f"{name}_stock"] = part.stock_index
        arrays[f"{name}_day"] = part.day_index
        arrays[f"{name}_target"] = part.target
        if isinstance(part.features, SequenceView):
            arrays["scaled"] = part.features.scaled
            arrays[f"{name}_pos"] = part.features.pos
        else:
            arrays[f"{name}_x"] = part.features
    if ds.scalers:
        keys = sorted(ds.scalers)
        arrays["scaler_stocks"] = np.array(keys)
        arrays["scaler_q"] = np.stack([ds.scalers[k].q for k in keys])
    arrays["meta"] = np.array([ds.period_index, ds.offset])
    np.savez(cache_dir / f"{cache_key(panel, period, ds.kind)}.npz", **arrays)


def _load_cached(panel, period, model_kind: str, cache_dir: Path) -> Optional[SplitDataset]:
    path = cache_dir / f"{cache_key(panel, period, model_kind)}.npz"
    if not path.exists():
        return None
    z = np.load(path)
    parts = {}
    for name in ("train", "trade"):
        if model_kind == "forest":
            feats = z[f"{name}_x"]
        else:
            feats = SequenceView(z["scaled"], z[f"{name}_pos"], z[f"{name}_day"])
        parts[name] = SampleSet(z[f"{name}_stock"], z[f"{name}_day"], feats, z[f"{name}_target"])
    scalers = None
    if "scaler_q" in z:
        scalers = {int(s): ft.ScalerParams(q) for s, q in zip(z["scaler_stocks"], z["scaler_q"])}
    period_index, offset = (int(v) for v in z["meta"])
    return SplitDataset(model_kind, period_index, offset, parts["train"], parts["trade"], scalers)
