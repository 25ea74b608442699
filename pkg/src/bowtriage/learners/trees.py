"""Decision-tree learners: CART, random forest, extremely randomized trees.

One grower serves all three. CART is a single tree with the full feature set
and a best-scan split (Gini impurity, exhaustive threshold scan over the
value boundaries present at the node). Forests add bootstrap resampling and
sqrt feature subsampling per node; extremely randomized trees keep the
feature subsampling but draw one uniform threshold per candidate feature
instead of scanning. Training data is densified onto its active (nonzero
anywhere) columns; split scans run in the kernels backend.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .. import kernels
from ..features import SparseVector
from .base import Csr, LearnerError, TrainedClassifier, gather_columns, stack_csr

_NO_DEPTH_LIMIT = 2**31


@dataclass
class SplitRecorder:
    """Captures every accepted split; lets tests pin down search behavior."""

    events: list[dict] = field(default_factory=list)

    def record(self, depth: int, size: int, mode: str, feature: int, threshold: float) -> None:
        self.events.append(
            {"depth": depth, "size": size, "mode": mode, "feature": feature, "threshold": threshold}
        )


@dataclass
class TreeArrays:
    """Flat node storage; feature < 0 marks a leaf holding value."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    @property
    def n_nodes(self) -> int:
        return self.feature.size


def _n_candidates(feature_frac, n_features: int) -> int:
    if feature_frac == "sqrt":
        return max(1, int(round(math.sqrt(n_features))))
    frac = float(feature_frac)
    if not 0.0 < frac <= 1.0:
        raise LearnerError(f"feature_frac must be 'sqrt' or in (0, 1], got {feature_frac}")
    return max(1, int(round(frac * n_features)))


def grow_tree(
    xd: np.ndarray,
    target: np.ndarray,
    *,
    criterion: str,
    max_depth: int | None,
    min_leaf: int,
    feature_frac,
    split_mode: str,
    rng: np.random.Generator,
    leaf_value: Callable[[np.ndarray], float],
    root_samples: np.ndarray | None = None,
    recorder: SplitRecorder | None = None,
) -> TreeArrays:
    """Grow one tree on the dense matrix xd against target.

    criterion: 'gini' (target holds 0/1 indicators) or 'mse' (real targets).
    split_mode: 'best' scans value boundaries; 'random' draws one uniform
    threshold per candidate feature and keeps the best-scoring one.
    """
    n_total, n_feat = xd.shape
    depth_cap = _NO_DEPTH_LIMIT if max_depth is None else int(max_depth)
    n_cand = _n_candidates(feature_frac, n_feat)

    feats: list[int] = []
    thrs: list[float] = []
    lefts: list[int] = []
    rights: list[int] = []
    vals: list[float] = []

    def new_node() -> int:
        feats.append(-1)
        thrs.append(0.0)
        lefts.append(-1)
        rights.append(-1)
        vals.append(0.0)
        return len(feats) - 1

    root_idx = np.arange(n_total, dtype=np.int64) if root_samples is None else root_samples
    stack = [(root_idx, 0, new_node())]
    while stack:
        idx, depth, slot = stack.pop()
        tvals = np.ascontiguousarray(target[idx])
        vals[slot] = float(leaf_value(tvals))
        if depth >= depth_cap or idx.size < 2 * min_leaf or idx.size < 2:
            continue
        if criterion == "gini" and (tvals == tvals[0]).all():
            continue

        if n_cand >= n_feat:
            cand = np.arange(n_feat, dtype=np.int64)
        else:
            cand = np.sort(rng.choice(n_feat, size=n_cand, replace=False))
        xs = np.ascontiguousarray(xd[idx][:, cand])

        if split_mode == "best":
            if criterion == "gini":
                f_loc, thr, gain = kernels.best_split_gini(xs, tvals, min_leaf)
            else:
                f_loc, thr, gain = kernels.best_split_mse(xs, tvals, min_leaf)
        elif split_mode == "random":
            lo = xs.min(axis=0)
            hi = xs.max(axis=0)
            draws = rng.uniform(lo, hi)
            tcand = np.where(lo < hi, draws, np.nan)
            f_loc, thr, gain = kernels.eval_fixed_splits_gini(xs, tvals, tcand, min_leaf)
        else:
            raise LearnerError(f"unknown split_mode {split_mode!r}")

        if f_loc < 0 or gain <= 0.0:
            continue
        f_glob = int(cand[f_loc])
        go_left = xd[idx, f_glob] <= thr
        left_idx = idx[go_left]
        right_idx = idx[~go_left]
        if left_idx.size == 0 or right_idx.size == 0:
            continue
        if recorder is not None:
            mode = "best_scan" if split_mode == "best" else "random_threshold"
            recorder.record(depth, int(idx.size), mode, f_glob, float(thr))
        feats[slot] = f_glob
        thrs[slot] = float(thr)
        lnode = new_node()
        rnode = new_node()
        lefts[slot] = lnode
        rights[slot] = rnode
        stack.append((left_idx, depth + 1, lnode))
        stack.append((right_idx, depth + 1, rnode))

    return TreeArrays(
        feature=np.array(feats, dtype=np.int64),
        threshold=np.array(thrs, dtype=np.float64),
        left=np.array(lefts, dtype=np.int64),
        right=np.array(rights, dtype=np.int64),
        value=np.array(vals, dtype=np.float64),
    )


def active_columns(csr: Csr) -> np.ndarray:
    """Sorted original column ids carrying at least one nonzero."""
    return np.unique(csr.indices)


def densify_active(csr: Csr, col_map: np.ndarray) -> np.ndarray:
    xd = np.zeros((csr.n_rows, col_map.size), dtype=np.float64)
    if csr.indices.size:
        rows = np.repeat(np.arange(csr.n_rows), np.diff(csr.indptr))
        local = np.searchsorted(col_map, csr.indices)
        xd[rows, local] = csr.data
    return xd


class TreeEnsembleClassifier(TrainedClassifier):
    """CART / random forest / extra trees; score is the mean leaf positive
    fraction across trees (a single tree degenerates to its leaf fraction)."""

    def __init__(self, kind, params, seed, dim, config_hash, col_map, trees: list[TreeArrays]):
        super().__init__(kind, params, seed, dim, config_hash)
        self.col_map = col_map
        self.trees = trees

    @classmethod
    def fit(
        cls,
        kind: str,
        params: dict,
        vectors: Sequence[SparseVector],
        labels: np.ndarray,
        seed: int,
        config_hash: str | None = None,
        recorder: SplitRecorder | None = None,
    ) -> "TreeEnsembleClassifier":
        csr = stack_csr(vectors)
        col_map = active_columns(csr)
        xd = densify_active(csr, col_map)
        y01 = (np.asarray(labels, dtype=np.float64) + 1.0) / 2.0
        rng = np.random.default_rng(np.random.SeedSequence([seed]))
        n = xd.shape[0]

        if kind == "cart":
            n_trees, split_mode, bootstrap, frac = 1, "best", False, 1.0
        elif kind == "random_forest":
            n_trees = params["n_trees"]
            split_mode = "best"
            bootstrap = params["bootstrap"]
            frac = params["feature_frac"]
        elif kind == "extra_trees":
            n_trees = params["n_trees"]
            split_mode = "random"
            bootstrap = params["bootstrap"]
            frac = params["feature_frac"]
        else:
            raise LearnerError(f"not a tree-ensemble kind: {kind!r}")

        trees = []
        for _ in range(n_trees):
            root = rng.integers(0, n, size=n).astype(np.int64) if bootstrap else None
            trees.append(
                grow_tree(
                    xd,
                    y01,
                    criterion="gini",
                    max_depth=params["max_depth"],
                    min_leaf=params["min_leaf"],
                    feature_frac=frac,
                    split_mode=split_mode,
                    rng=rng,
                    leaf_value=lambda t: float(t.mean()),
                    root_samples=root,
                    recorder=recorder,
                )
            )
        return cls(kind, params, seed, csr.dim, config_hash, col_map, trees)

    def score_many(self, vectors: Sequence[SparseVector]) -> np.ndarray:
        self._check_dims(vectors)
        xq = gather_columns(vectors, self.col_map, self.dim)
        acc = np.zeros(len(vectors), dtype=np.float64)
        for t in self.trees:
            acc += kernels.tree_apply(t.feature, t.threshold, t.left, t.right, t.value, xq)
        return acc / len(self.trees)

    def _arrays(self) -> dict[str, np.ndarray]:
        offsets = np.cumsum([0] + [t.n_nodes for t in self.trees]).astype(np.int64)
        return {
            "col_map": self.col_map,
            "tree_offsets": offsets,
            "feature": np.concatenate([t.feature for t in self.trees]),
            "threshold": np.concatenate([t.threshold for t in self.trees]),
            "left": np.concatenate([t.left for t in self.trees]),
            "right": np.concatenate([t.right for t in self.trees]),
            "value": np.concatenate([t.value for t in self.trees]),
        }

    @classmethod
    def _restore(cls, header: dict, arrays: dict) -> "TreeEnsembleClassifier":
        off = arrays["tree_offsets"]
        trees = [
            TreeArrays(
                feature=arrays["feature"][a:b],
                threshold=arrays["threshold"][a:b],
                left=arrays["left"][a:b],
                right=arrays["right"][a:b],
                value=arrays["value"][a:b],
            )
            for a, b in zip(off[:-1], off[1:])
        ]
        return cls(
            header["kind"],
            header["params"],
            header["seed"],
            header["dim"],
            header.get("config_hash"),
            arrays["col_map"],
            trees,
        )
