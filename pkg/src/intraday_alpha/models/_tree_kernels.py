"""Compiled inner loops for breadth-first tree growth.

``idx`` is a ``(p, n_live)`` array: row ``f`` lists the live sample rows
grouped into contiguous per-node segments (same boundaries for every
feature) and sorted by feature ``f`` inside each segment.  After a level
is split, a stable scatter by child id rebuilds the segments, so sorted
order never has to be recomputed below the root.

The split score ``(pl^2 + ql^2) / wl + (pr^2 + qr^2) / wr`` is computed
from weighted class counts left and right; maximising it minimises the
weighted child gini impurity.  Counts are integers, so two candidates whose
float scores are within rounding of each other are re-compared exactly:
the score equals ``W - 2 * (pl*ql*wr + pr*qr*wl) / (wl*wr)`` and the
cross-multiplied comparison is done in 128-bit integer arithmetic.
"""

import numpy as np
from numba import njit


@njit(nogil=True, cache=True)
def initial_index(order, w):
    p, n = order.shape
    live_mask = np.zeros(n, dtype=np.bool_)
    live = 0
    for r in range(n):
        if w[r] > 0:
            live_mask[r] = True
            live += 1
    # one spare column absorbs the branchless write after the last live row
    idx = np.empty((p, live + 1), dtype=np.int32)
    for f in range(p):
        j = 0
        for i in range(n):
            r = order[f, i]
            idx[f, j] = r
            j += live_mask[r]
    return idx[:, :live]


@njit(nogil=True, cache=True)
def segment_totals(idx, seg_start, seg_end, w, wy):
    n_nodes = seg_start.shape[0]
    tot_w = np.zeros(n_nodes)
    tot_pos = np.zeros(n_nodes)
    for a in range(n_nodes):
        for j in range(seg_start[a], seg_end[a]):
            r = idx[0, j]
            tot_w[a] += w[r]
            tot_pos[a] += wy[r]
    return tot_w, tot_pos


NEAR_TIE = 1e-12
_LO32 = np.uint64(0xFFFFFFFF)
_S32 = np.uint64(32)


@njit(nogil=True, cache=True)
def mul_u128(a, b):
    """Full product of two non-negative int64 values as (hi, lo) uint64 words."""
    a = np.uint64(a)
    b = np.uint64(b)
    a_lo = a & _LO32
    a_hi = a >> _S32
    b_lo = b & _LO32
    b_hi = b >> _S32
    lo_lo = a_lo * b_lo
    hi_lo = a_hi * b_lo
    lo_hi = a_lo * b_hi
    hi_hi = a_hi * b_hi
    cross = (lo_lo >> _S32) + (hi_lo & _LO32) + lo_hi
    hi = hi_hi + (hi_lo >> _S32) + (cross >> _S32)
    lo = (cross << _S32) | (lo_lo & _LO32)
    return hi, lo


@njit(nogil=True, cache=True)
def exact_less(n1, d1, n2, d2):
    """``n1 / d1 < n2 / d2`` for non-negative integers, without overflow."""
    h1, l1 = mul_u128(n1, d2)
    h2, l2 = mul_u128(n2, d1)
    return h1 < h2 or (h1 == h2 and l1 < l2)


@njit(nogil=True, cache=True)
def best_splits(idx, XT, seg_start, seg_end, nodes, packed, chosen, tot_w, tot_pos):
    """``packed[r] = 2 * weight + label``; counts are accumulated as integers."""
    n_slots, p = chosen.shape
    best_f = np.full(n_slots, -1, dtype=np.int64)
    best_thr = np.zeros(n_slots)
    for k in range(n_slots):
        a = nodes[k]
        W = tot_w[a]
        P = tot_pos[a]
        iW = np.int64(W)
        iP = np.int64(P)
        best = -np.inf
        # exact impurity term of the best split so far: best_num / best_den
        best_num = np.int64(0)
        best_den = np.int64(1)
        for f in range(p):
            if not chosen[k, f]:
                continue
            icw = 0
            icp = 0
            r0 = idx[f, seg_start[a]]
            last = XT[f, r0]
            for j in range(seg_start[a], seg_end[a]):
                r = idx[f, j]
                v = XT[f, r]
                if v > last:
                    cw = float(icw)
                    cp = float(icp)
                    ql = cw - cp
                    wr = W - cw
                    pr = P - cp
                    qr = wr - pr
                    score = (cp * cp + ql * ql) / cw + (pr * pr + qr * qr) / wr
                    take = score > best * (1.0 + NEAR_TIE)
                    if not take and score >= best * (1.0 - NEAR_TIE):
                        iwr = iW - icw
                        ipr = iP - icp
                        num = icp * (icw - icp) * iwr + ipr * (iwr - ipr) * icw
                        take = exact_less(num, icw * iwr, best_num, best_den)
                    if take:
                        iwr = iW - icw
                        ipr = iP - icp
                        best_num = icp * (icw - icp) * iwr + ipr * (iwr - ipr) * icw
                        best_den = icw * iwr
                        best = score
                        best_f[k] = f
                        thr = 0.5 * (last + v)
                        if thr >= v:
                            thr = last
                        best_thr[k] = thr
                q = packed[r]
                wt = q >> 1
                icw += wt
                icp += wt * (q & 1)
                last = v
    return best_f, best_thr


@njit(nogil=True, cache=True)
def child_totals(idx, XT, seg_start, seg_end, split_nodes, split_f, split_thr, w, wy):
    """Weighted totals of each split node's (left, right) children, without partitioning."""
    n_split = split_nodes.shape[0]
    tot_w = np.zeros(2 * n_split)
    tot_pos = np.zeros(2 * n_split)
    for k in range(n_split):
        a = split_nodes[k]
        f = split_f[k]
        thr = split_thr[k]
        for j in range(seg_start[a], seg_end[a]):
            r = idx[0, j]
            c = 2 * k if XT[f, r] <= thr else 2 * k + 1
            tot_w[c] += w[r]
            tot_pos[c] += wy[r]
    return tot_w, tot_pos


@njit(nogil=True, cache=True)
def partition(idx, XT, seg_start, seg_end, split_nodes, split_f, split_thr, n_rows):
    """Stable scatter of split nodes' rows into child segments (left, right per node)."""
    n_split = split_nodes.shape[0]
    goes_left = np.zeros(n_rows, dtype=np.int64)
    new_start = np.zeros(2 * n_split, dtype=np.int64)
    new_end = np.zeros(2 * n_split, dtype=np.int64)
    total = 0
    for k in range(n_split):
        a = split_nodes[k]
        f = split_f[k]
        thr = split_thr[k]
        n_left = 0
        for j in range(seg_start[a], seg_end[a]):
            r = idx[0, j]
            if XT[f, r] <= thr:
                goes_left[r] = 1
                n_left += 1
        new_start[2 * k] = total
        new_end[2 * k] = total + n_left
        new_start[2 * k + 1] = total + n_left
        total += seg_end[a] - seg_start[a]
        new_end[2 * k + 1] = total
    p = idx.shape[0]
    out = np.empty((p, total), dtype=np.int32)
    for f in range(p):
        for k in range(n_split):
            a = split_nodes[k]
            pl = new_start[2 * k]
            pr = new_start[2 * k + 1]
            for j in range(seg_start[a], seg_end[a]):
                r = idx[f, j]
                g = goes_left[r]
                dest = pr + g * (pl - pr)
                out[f, dest] = r
                pl += g
                pr += 1 - g
    return out, new_start, new_end


@njit(nogil=True, cache=True)
def predict_forest(X, feature, threshold, left, right, value, roots):
    n = X.shape[0]
    n_trees = roots.shape[0]
    out = np.zeros(n)
    for i in range(n):
        acc = 0.0
        for t in range(n_trees):
            node = roots[t]
            while feature[node] >= 0:
                if X[i, feature[node]] <= threshold[node]:
                    node = left[node]
                else:
                    node = right[node]
            acc += value[node]
        out[i] = acc / n_trees
    return out
