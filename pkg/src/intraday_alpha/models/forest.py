"""Random forest of gini-split classification trees, built from scratch.

Each tree is grown on a bootstrap resample represented as integer row
weights (how often each row was drawn).  Growth is breadth-first; at every
node ``features_per_split`` candidate features are drawn without
replacement and the best midpoint threshold among them is taken.  A node
becomes a leaf when it is pure, at maximum depth, or when every candidate
feature is constant on it.
"""

from __future__ import annotations

import math
import os
from fractions import Fraction
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import List, NamedTuple, Optional, Sequence

import numpy as np

from ..errors import EmptyTrainingSet, NoValidSplit, ShapeMismatch
from ..seeding import substream
from . import _tree_kernels as kern


class Split(NamedTuple):
    feature: int
    threshold: float
    impurity_decrease: float


def gini(pos: float, total: float) -> float:
    if total <= 0:
        return 0.0
    p = pos / total
    return 1.0 - p * p - (1.0 - p) * (1.0 - p)


def split_score(wl, pl, wr, pr) -> float:
    """Larger is better; equals ``W - W * weighted_child_gini``."""
    ql = wl - pl
    qr = wr - pr
    return (pl * pl + ql * ql) / wl + (pr * pr + qr * qr) / wr


def _exact_impurity(wl: int, pl: int, wr: int, pr: int) -> Fraction:
    """``(W - split_score) / 2`` as an exact fraction; smaller is better."""
    return Fraction(pl * (wl - pl) * wr + pr * (wr - pr) * wl, wl * wr)


def gini_best_split(X, y, candidate_features: Sequence[int], weights=None) -> Split:
    """Best gini split of one node over the candidate features.

    Thresholds are midpoints between consecutive distinct sorted values;
    rows with ``x <= threshold`` go left.  Ties go to the lowest feature
    index, then the lowest threshold.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    y = np.asarray(y, dtype=np.float64)
    w = np.ones(len(y)) if weights is None else np.asarray(weights, dtype=np.float64)
    keep = w > 0
    X, y, w = X[keep], y[keep], w[keep]
    total = float(w.sum())
    total_pos = float((w * y).sum())
    if len(y) < 2 or total_pos == 0 or total_pos == total:
        raise ValueError("gini_best_split needs at least 2 samples and both classes")

    integral = bool(np.all(w == np.round(w)))
    best = None
    for f in sorted(int(c) for c in candidate_features):
        order = np.argsort(X[:, f], kind="stable")
        xs, ws, wys = X[order, f], w[order], (w * y)[order]
        cw = np.cumsum(ws)
        cp = np.cumsum(wys)
        for j in range(len(xs) - 1):
            if not xs[j + 1] > xs[j]:
                continue
            wl, pl = float(cw[j]), float(cp[j])
            if integral:
                # exact rational ordering, so exact ties always fall to the first candidate
                key = _exact_impurity(int(wl), int(pl), int(total) - int(wl), int(total_pos) - int(pl))
            else:
                key = -split_score(wl, pl, total - wl, total_pos - pl)
            if best is None or key < best[0]:
                thr = 0.5 * (xs[j] + xs[j + 1])
                if thr >= xs[j + 1]:
                    thr = xs[j]
                best = (key, f, float(thr), wl, pl)
    if best is None:
        raise NoValidSplit("all candidate features are constant on this node")
    _, f, thr, wl, pl = best
    score = split_score(wl, pl, total - wl, total_pos - pl)
    decrease = score / total - (total_pos**2 + (total - total_pos) ** 2) / total**2
    return Split(f, thr, float(decrease))


@dataclass(frozen=True, eq=False)
class DecisionTree:
    """Flat node arrays; ``feature[i] == -1`` marks a leaf."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray  # class-1 fraction of the (weighted) node sample
    node_depth: np.ndarray

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    @property
    def depth(self) -> int:
        return int(self.node_depth.max())

    def apply(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        nodes = np.zeros(len(X), dtype=np.int64)
        for _ in range(self.depth + 1):
            f = self.feature[nodes]
            inner = f >= 0
            if not inner.any():
                break
            go_left = X[np.arange(len(X)), np.where(inner, f, 0)] <= self.threshold[nodes]
            nodes = np.where(inner, np.where(go_left, self.left[nodes], self.right[nodes]), nodes)
        return nodes

    def predict_proba(self, X) -> np.ndarray:
        return self.value[self.apply(X)]

    def same_as(self, other: "DecisionTree") -> bool:
        return all(
            np.array_equal(getattr(self, k), getattr(other, k))
            for k in ("feature", "threshold", "left", "right", "value", "node_depth")
        )


def _draw_candidates(rng: np.random.Generator, n_nodes: int, p: int, m: int) -> np.ndarray:
    """Boolean ``(n_nodes, p)`` mask, ``m`` features per row, without replacement."""
    mask = np.zeros((n_nodes, p), dtype=np.bool_)
    if m >= p:
        mask[:] = True
        return mask
    keys = rng.random((n_nodes, p))
    picks = np.argpartition(keys, m - 1, axis=1)[:, :m]
    np.put_along_axis(mask, picks, True, axis=1)
    return mask


class Presorted(NamedTuple):
    XT: np.ndarray  # (p, n) feature-major copy of X
    order: np.ndarray  # (p, n) row ids sorted by feature value


def presort(X: np.ndarray) -> Presorted:
    XT = np.ascontiguousarray(np.asarray(X, dtype=np.float64).T)
    return Presorted(XT, np.argsort(XT, axis=1))


def grow_tree(
    data: Presorted,
    y: np.ndarray,
    weights: np.ndarray,
    max_depth: int,
    features_per_split: int,
    rng: np.random.Generator,
) -> DecisionTree:
    """Grow one tree breadth-first; candidate features drawn per level from ``rng``.

    Within a level, nodes draw their candidates in creation order (left
    child before right child), one ``(n_nodes, p)`` uniform block per level.
    """
    p, n = data.XT.shape
    w = np.asarray(weights, dtype=np.float64)
    wy = w * np.asarray(y, dtype=np.float64)
    packed = (2 * np.asarray(weights, dtype=np.int64) + np.asarray(y, dtype=np.int64)).astype(np.int32)
    m = min(features_per_split, p)

    feature, threshold, left, right, value, depth = [], [], [], [], [], []

    def new_node(d):
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(0.0)
        depth.append(d)
        return len(feature) - 1

    active = [new_node(0)]
    idx = kern.initial_index(data.order, w)
    seg_start = np.array([0], dtype=np.int64)
    seg_end = np.array([idx.shape[1]], dtype=np.int64)
    level = 0
    while active:
        tot_w, tot_pos = kern.segment_totals(idx, seg_start, seg_end, w, wy)
        splittable = []
        for a, node in enumerate(active):
            value[node] = tot_pos[a] / tot_w[a] if tot_w[a] > 0 else 0.0
            if level < max_depth and 0 < tot_pos[a] < tot_w[a]:
                splittable.append(a)
        if not splittable:
            break
        chosen = _draw_candidates(rng, len(splittable), p, m)
        sel = np.array(splittable, dtype=np.int64)
        best_f, best_thr = kern.best_splits(idx, data.XT, seg_start, seg_end, sel, packed, chosen, tot_w, tot_pos)
        ok = best_f >= 0
        next_active = []
        for k in np.flatnonzero(ok):
            node = active[sel[k]]
            feature[node] = int(best_f[k])
            threshold[node] = float(best_thr[k])
            lc, rc = new_node(level + 1), new_node(level + 1)
            left[node], right[node] = lc, rc
            next_active += [lc, rc]
        if not next_active:
            break
        if level + 1 == max_depth:
            # children are leaves: their class fractions are all that is left to compute
            cw, cpos = kern.child_totals(idx, data.XT, seg_start, seg_end, sel[ok], best_f[ok], best_thr[ok], w, wy)
            for node, tw, tp in zip(next_active, cw, cpos):
                value[node] = tp / tw
            break
        idx, seg_start, seg_end = kern.partition(idx, data.XT, seg_start, seg_end, sel[ok], best_f[ok], best_thr[ok], n)
        active = next_active
        level += 1

    return DecisionTree(
        np.array(feature, dtype=np.int64),
        np.array(threshold, dtype=np.float64),
        np.array(left, dtype=np.int64),
        np.array(right, dtype=np.int64),
        np.array(value, dtype=np.float64),
        np.array(depth, dtype=np.int64),
    )


def default_threads() -> int:
    raw = os.environ.get("INTRADAY_ALPHA_THREADS", "")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


@dataclass(eq=False)
class RandomForest:
    n_trees: int = 1000
    max_depth: int = 10
    features_per_split: Optional[int] = None  # None -> floor(sqrt(p))
    bootstrap: bool = True
    seed: int = 0
    trees: Optional[List[DecisionTree]] = None
    n_features: Optional[int] = None

    def _tree_rng(self, i: int) -> np.random.Generator:
        return substream(self.seed, "forest", "tree", i)

    def fit(self, X, y, n_threads: Optional[int] = None) -> "RandomForest":
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y)
        if len(X) == 0:
            raise EmptyTrainingSet("cannot fit a forest on zero rows")
        if X.ndim != 2 or len(X) != len(y):
            raise ShapeMismatch(f"X {X.shape} and y {y.shape} do not align")
        n, p = X.shape
        m = self.features_per_split or max(1, math.isqrt(p))
        y = y.astype(np.float64)
        data = presort(X)

        def one(i):
            rng = self._tree_rng(i)
            if self.bootstrap:
                w = np.bincount(rng.integers(0, n, n), minlength=n).astype(np.float64)
            else:
                w = np.ones(n)
            return grow_tree(data, y, w, self.max_depth, m, rng)

        threads = n_threads or default_threads()
        if threads > 1:
            with ThreadPoolExecutor(threads) as pool:
                self.trees = list(pool.map(one, range(self.n_trees)))
        else:
            self.trees = [one(i) for i in range(self.n_trees)]
        self.n_features = p
        self._pack()
        return self

    def _pack(self):
        offsets = np.cumsum([0] + [t.n_nodes for t in self.trees])[:-1]
        self._roots = offsets.astype(np.int64)
        self._feature = np.concatenate([t.feature for t in self.trees])
        self._threshold = np.concatenate([t.threshold for t in self.trees])
        self._left = np.concatenate([np.where(t.left >= 0, t.left + o, -1) for t, o in zip(self.trees, offsets)])
        self._right = np.concatenate([np.where(t.right >= 0, t.right + o, -1) for t, o in zip(self.trees, offsets)])
        self._value = np.concatenate([t.value for t in self.trees])

    def predict_proba(self, X) -> np.ndarray:
        """Class-1 probability: the unweighted mean of leaf fractions over trees."""
        if not self.trees:
            raise RuntimeError("forest is not fitted")
        X = np.ascontiguousarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise ShapeMismatch(f"expected (n, {self.n_features}) features, got {X.shape}")
        return kern.predict_forest(
            X, self._feature, self._threshold, self._left, self._right, self._value, self._roots
        )

    def same_as(self, other: "RandomForest") -> bool:
        return len(self.trees) == len(other.trees) and all(a.same_as(b) for a, b in zip(self.trees, other.trees))
