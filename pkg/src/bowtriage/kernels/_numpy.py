"""Pure-numpy kernel implementations (reference semantics).

The numba backend mirrors these functions operation-for-operation; tie
breaking is identical by construction (ascending feature order, first
position wins, strict improvement only). Integer-count arithmetic is exact,
so split decisions agree bit-for-bit across backends; float reductions may
differ in the last ulp where summation order differs (documented).
"""

from __future__ import annotations

import numpy as np


def best_split_gini(x: np.ndarray, y01: np.ndarray, min_leaf: int):
    """Best (feature, threshold) by Gini impurity over all value boundaries.

    x is (n, f) dense float64, y01 holds 0/1 class indicators. Returns
    (feat, threshold, gain); feat is -1 when no split improves on the node.
    """
    n, f = x.shape
    total_pos = float(y01.sum())
    total_neg = n - total_pos
    base = (total_pos * total_pos + total_neg * total_neg) / n
    best_feat = -1
    best_thr = 0.0
    best_score = base
    pos_idx = np.arange(1, n)
    for j in range(f):
        col = x[:, j]
        order = np.argsort(col, kind="quicksort")
        sv = col[order]
        cum_pos = np.cumsum(y01[order])
        ok = (sv[:-1] < sv[1:]) & (pos_idx >= min_leaf) & ((n - pos_idx) >= min_leaf)
        if not ok.any():
            continue
        nl = pos_idx[ok].astype(np.float64)
        nr = n - nl
        pl = cum_pos[:-1][ok]
        ql = nl - pl
        pr = total_pos - pl
        qr = nr - pr
        score = (pl * pl + ql * ql) / nl + (pr * pr + qr * qr) / nr
        k = int(np.argmax(score))
        if score[k] > best_score:
            best_score = float(score[k])
            best_feat = j
            at = int(pos_idx[ok][k])
            best_thr = (sv[at - 1] + sv[at]) * 0.5
    return best_feat, best_thr, best_score - base


def best_split_mse(x: np.ndarray, target: np.ndarray, min_leaf: int):
    """Best (feature, threshold) by squared-error reduction; regression trees."""
    n, f = x.shape
    total = float(target.sum())
    base = (total * total) / n
    best_feat = -1
    best_thr = 0.0
    best_score = base
    pos_idx = np.arange(1, n)
    for j in range(f):
        col = x[:, j]
        order = np.argsort(col, kind="quicksort")
        sv = col[order]
        cum = np.cumsum(target[order])
        ok = (sv[:-1] < sv[1:]) & (pos_idx >= min_leaf) & ((n - pos_idx) >= min_leaf)
        if not ok.any():
            continue
        nl = pos_idx[ok].astype(np.float64)
        nr = n - nl
        sl = cum[:-1][ok]
        sr = total - sl
        score = (sl * sl) / nl + (sr * sr) / nr
        k = int(np.argmax(score))
        if score[k] > best_score:
            best_score = float(score[k])
            best_feat = j
            at = int(pos_idx[ok][k])
            best_thr = (sv[at - 1] + sv[at]) * 0.5
    return best_feat, best_thr, best_score - base


def eval_fixed_splits_gini(x: np.ndarray, y01: np.ndarray, thresholds: np.ndarray, min_leaf: int):
    """Best feature for pre-drawn per-feature thresholds (randomized trees).

    thresholds[j] = NaN marks a feature with no usable split (constant
    column). Returns (feat, threshold, gain) like best_split_gini.
    """
    n, f = x.shape
    total_pos = float(y01.sum())
    total_neg = n - total_pos
    base = (total_pos * total_pos + total_neg * total_neg) / n
    best_feat = -1
    best_thr = 0.0
    best_score = base
    for j in range(f):
        thr = thresholds[j]
        if not np.isfinite(thr):
            continue
        mask = x[:, j] <= thr
        nl = int(mask.sum())
        nr = n - nl
        if nl < min_leaf or nr < min_leaf:
            continue
        pl = float(y01[mask].sum())
        ql = nl - pl
        pr = total_pos - pl
        qr = nr - pr
        score = (pl * pl + ql * ql) / nl + (pr * pr + qr * qr) / nr
        if score > best_score:
            best_score = score
            best_feat = j
            best_thr = float(thr)
    return best_feat, best_thr, best_score - base


def tree_apply(
    feature: np.ndarray,
    threshold: np.ndarray,
    left: np.ndarray,
    right: np.ndarray,
    value: np.ndarray,
    x: np.ndarray,
) -> np.ndarray:
    """Route each row of x (n, f) to its leaf value. feature[node] < 0 = leaf."""
    n = x.shape[0]
    node = np.zeros(n, dtype=np.int64)
    active = feature[node] >= 0
    while active.any():
        idx = np.nonzero(active)[0]
        cur = node[idx]
        go_left = x[idx, feature[cur]] <= threshold[cur]
        node[idx] = np.where(go_left, left[cur], right[cur])
        active = feature[node] >= 0
    return value[node]


def csr_dots(
    indptr: np.ndarray,
    indices: np.ndarray,
    data: np.ndarray,
    q_idx: np.ndarray,
    q_val: np.ndarray,
    dim: int,
) -> np.ndarray:
    """Dot product of every CSR row against one sparse query vector."""
    nrows = indptr.size - 1
    out = np.zeros(nrows, dtype=np.float64)
    if indices.size == 0 or q_idx.size == 0:
        return out
    qdense = np.zeros(dim, dtype=np.float64)
    qdense[q_idx] = q_val
    products = data * qdense[indices]
    rows = np.repeat(np.arange(nrows), np.diff(indptr))
    return np.bincount(rows, weights=products, minlength=nrows)


def svm_epochs(
    indptr: np.ndarray,
    indices: np.ndarray,
    data: np.ndarray,
    y: np.ndarray,
    reg: float,
    epochs: int,
    dim: int,
):
    """Epoch-ordered subgradient descent on the hinge loss, L2 regularized.

    Deterministic: rows are visited in storage order every epoch; the step
    size is 1/(reg*(t+1)). Weight shrinkage uses the scaled-vector trick so
    each step is O(nnz(row)). Returns (w, bias); bias is unregularized.
    """
    n = indptr.size - 1
    wt = np.zeros(dim, dtype=np.float64)
    b = 0.0
    scale = 1.0
    t = 0
    for _ in range(epochs):
        for r in range(n):
            t += 1
            eta = 1.0 / (reg * (t + 1))
            a, c = indptr[r], indptr[r + 1]
            margin = scale * float(np.dot(data[a:c], wt[indices[a:c]])) + b
            scale *= 1.0 - eta * reg
            if y[r] * margin < 1.0:
                wt[indices[a:c]] += (eta * y[r] / scale) * data[a:c]
                b += eta * y[r]
    return scale * wt, b
