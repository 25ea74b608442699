"""Numba @njit kernels; loop-level mirror of the _numpy reference backend.

No fastmath (determinism), nogil so grid cells can overlap under the thread
pool, cache=True so compilation cost is paid once per machine.
"""

from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True, nogil=True)
def best_split_gini(x, y01, min_leaf):
    n, f = x.shape
    total_pos = 0.0
    for i in range(n):
        total_pos += y01[i]
    total_neg = n - total_pos
    base = (total_pos * total_pos + total_neg * total_neg) / n
    best_feat = -1
    best_thr = 0.0
    best_score = base
    for j in range(f):
        col = x[:, j].copy()
        order = np.argsort(col, kind="quicksort")
        cum_pos = 0.0
        for i in range(1, n):
            cum_pos += y01[order[i - 1]]
            if col[order[i - 1]] >= col[order[i]]:
                continue
            if i < min_leaf or (n - i) < min_leaf:
                continue
            nl = float(i)
            nr = float(n - i)
            pl = cum_pos
            ql = nl - pl
            pr = total_pos - pl
            qr = nr - pr
            score = (pl * pl + ql * ql) / nl + (pr * pr + qr * qr) / nr
            if score > best_score:
                best_score = score
                best_feat = j
                best_thr = (col[order[i - 1]] + col[order[i]]) * 0.5
    return best_feat, best_thr, best_score - base


@njit(cache=True, nogil=True)
def best_split_mse(x, target, min_leaf):
    n, f = x.shape
    total = 0.0
    for i in range(n):
        total += target[i]
    base = (total * total) / n
    best_feat = -1
    best_thr = 0.0
    best_score = base
    for j in range(f):
        col = x[:, j].copy()
        order = np.argsort(col, kind="quicksort")
        cum = 0.0
        for i in range(1, n):
            cum += target[order[i - 1]]
            if col[order[i - 1]] >= col[order[i]]:
                continue
            if i < min_leaf or (n - i) < min_leaf:
                continue
            nl = float(i)
            nr = float(n - i)
            sl = cum
            sr = total - sl
            score = (sl * sl) / nl + (sr * sr) / nr
            if score > best_score:
                best_score = score
                best_feat = j
                best_thr = (col[order[i - 1]] + col[order[i]]) * 0.5
    return best_feat, best_thr, best_score - base


@njit(cache=True, nogil=True)
def eval_fixed_splits_gini(x, y01, thresholds, min_leaf):
    n, f = x.shape
    total_pos = 0.0
    for i in range(n):
        total_pos += y01[i]
    total_neg = n - total_pos
    base = (total_pos * total_pos + total_neg * total_neg) / n
    best_feat = -1
    best_thr = 0.0
    best_score = base
    for j in range(f):
        thr = thresholds[j]
        if not np.isfinite(thr):
            continue
        nl = 0
        pl = 0.0
        for i in range(n):
            if x[i, j] <= thr:
                nl += 1
                pl += y01[i]
        nr = n - nl
        if nl < min_leaf or nr < min_leaf:
            continue
        ql = nl - pl
        pr = total_pos - pl
        qr = nr - pr
        score = (pl * pl + ql * ql) / nl + (pr * pr + qr * qr) / nr
        if score > best_score:
            best_score = score
            best_feat = j
            best_thr = thr
    return best_feat, best_thr, best_score - base


@njit(cache=True, nogil=True)
def tree_apply(feature, threshold, left, right, value, x):
    n = x.shape[0]
    out = np.empty(n, dtype=np.float64)
    for i in range(n):
        node = 0
        while feature[node] >= 0:
            if x[i, feature[node]] <= threshold[node]:
                node = left[node]
            else:
                node = right[node]
        out[i] = value[node]
    return out


@njit(cache=True, nogil=True)
def csr_dots(indptr, indices, data, q_idx, q_val, dim):
    nrows = indptr.size - 1
    out = np.zeros(nrows, dtype=np.float64)
    nq = q_idx.size
    for r in range(nrows):
        i = indptr[r]
        stop = indptr[r + 1]
        k = 0
        s = 0.0
        while i < stop and k < nq:
            ci = indices[i]
            cq = q_idx[k]
            if ci == cq:
                s += data[i] * q_val[k]
                i += 1
                k += 1
            elif ci < cq:
                i += 1
            else:
                k += 1
        out[r] = s
    return out


@njit(cache=True, nogil=True)
def svm_epochs(indptr, indices, data, y, reg, epochs, dim):
    n = indptr.size - 1
    wt = np.zeros(dim, dtype=np.float64)
    b = 0.0
    scale = 1.0
    t = 0
    for _ in range(epochs):
        for r in range(n):
            t += 1
            eta = 1.0 / (reg * (t + 1))
            a = indptr[r]
            c = indptr[r + 1]
            s = 0.0
            for i in range(a, c):
                s += data[i] * wt[indices[i]]
            margin = scale * s + b
            scale *= 1.0 - eta * reg
            if y[r] * margin < 1.0:
                step = eta * y[r] / scale
                for i in range(a, c):
                    wt[indices[i]] += step * data[i]
                b += eta * y[r]
    return scale * wt, b
