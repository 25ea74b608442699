"""Gradient-boosted trees on the logistic loss.

Depth-limited regression trees are fitted to the negative gradient of the
logistic loss; leaf values take a clipped Newton step. The per-round mean
training loss is recorded so a non-increasing trace can be asserted.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .. import kernels
from ..features import SparseVector
from .base import LearnerError, TrainedClassifier, gather_columns, sigmoid, stack_csr
from .trees import TreeArrays, active_columns, densify_active, grow_tree

_MAX_LEAF_STEP = 4.0


def _newton_leaf(residuals: np.ndarray) -> float:
    # residual r = y * sigmoid(-y * F); |r| * (1 - |r|) is the hessian term
    num = float(residuals.sum())
    absr = np.abs(residuals)
    den = float((absr * (1.0 - absr)).sum())
    if den <= 1e-12:
        return float(np.clip(np.sign(num) * _MAX_LEAF_STEP, -_MAX_LEAF_STEP, _MAX_LEAF_STEP))
    return float(np.clip(num / den, -_MAX_LEAF_STEP, _MAX_LEAF_STEP))


class GradientBoostedTrees(TrainedClassifier):
    """Boosted log-odds model; score(x) = sigmoid(f0 + lr * sum of leaf steps)."""

    def __init__(self, params, seed, dim, config_hash, col_map, f0, trees, loss_trace):
        super().__init__("gbt", params, seed, dim, config_hash)
        self.col_map = col_map
        self.f0 = float(f0)
        self.trees = trees
        self.loss_trace = np.asarray(loss_trace, dtype=np.float64)

    @classmethod
    def fit(
        cls,
        params: dict,
        vectors: Sequence[SparseVector],
        labels: np.ndarray,
        seed: int,
        config_hash: str | None = None,
    ) -> "GradientBoostedTrees":
        csr = stack_csr(vectors)
        col_map = active_columns(csr)
        xd = densify_active(csr, col_map)
        y = np.asarray(labels, dtype=np.float64)
        rng = np.random.default_rng(np.random.SeedSequence([seed]))

        p = float((y > 0).mean())
        if p <= 0.0 or p >= 1.0:
            raise LearnerError("gbt requires both classes in the training data")
        f0 = float(np.log(p / (1.0 - p)))
        scores = np.full(y.size, f0, dtype=np.float64)

        lr = params["learning_rate"]
        trees: list[TreeArrays] = []
        trace = [float(np.logaddexp(0.0, -y * scores).mean())]
        for _ in range(params["rounds"]):
            residuals = y * sigmoid(-y * scores)
            tree = grow_tree(
                xd,
                residuals,
                criterion="mse",
                max_depth=params["max_depth"],
                min_leaf=params["min_leaf"],
                feature_frac=params["feature_frac"],
                split_mode="best",
                rng=rng,
                leaf_value=_newton_leaf,
            )
            trees.append(tree)
            scores += lr * kernels.tree_apply(
                tree.feature, tree.threshold, tree.left, tree.right, tree.value, xd
            )
            trace.append(float(np.logaddexp(0.0, -y * scores).mean()))
        return cls(params, seed, csr.dim, config_hash, col_map, f0, trees, trace)

    def decision_function(self, vectors: Sequence[SparseVector]) -> np.ndarray:
        self._check_dims(vectors)
        xq = gather_columns(vectors, self.col_map, self.dim)
        acc = np.full(len(vectors), self.f0, dtype=np.float64)
        lr = self.params["learning_rate"]
        for t in self.trees:
            acc += lr * kernels.tree_apply(t.feature, t.threshold, t.left, t.right, t.value, xq)
        return acc

    def score_many(self, vectors: Sequence[SparseVector]) -> np.ndarray:
        return sigmoid(self.decision_function(vectors))

    def _arrays(self) -> dict[str, np.ndarray]:
        offsets = np.cumsum([0] + [t.n_nodes for t in self.trees]).astype(np.int64)
        return {
            "col_map": self.col_map,
            "scalars": np.array([self.f0]),
            "loss_trace": self.loss_trace,
            "tree_offsets": offsets,
            "feature": np.concatenate([t.feature for t in self.trees]),
            "threshold": np.concatenate([t.threshold for t in self.trees]),
            "left": np.concatenate([t.left for t in self.trees]),
            "right": np.concatenate([t.right for t in self.trees]),
            "value": np.concatenate([t.value for t in self.trees]),
        }

    @classmethod
    def _restore(cls, header: dict, arrays: dict) -> "GradientBoostedTrees":
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
            header["params"],
            header["seed"],
            header["dim"],
            header.get("config_hash"),
            arrays["col_map"],
            arrays["scalars"][0],
            trees,
            arrays["loss_trace"],
        )
