"""From-scratch binary classifiers with real-valued scores in [0, 1].

Six kinds: cart, random_forest, extra_trees, knn, linear_svm, gbt. Each has
a documented default hyper-parameter grid in stable order; grid cell 0 is
the "base" configuration used for base-vs-tuned comparisons. Training is
deterministic given (params, data, seed); fitted models serialize to a
single .npz file and reload bit-exactly.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from ..features import SparseVector
from .base import (
    LearnerError,
    TrainedClassifier,
    load_model,
    predict_threshold,
    sigmoid,
    stack_csr,
)
from .boosting import GradientBoostedTrees
from .neighbors import NearestNeighbors
from .svm import LinearSvm
from .trees import SplitRecorder, TreeEnsembleClassifier

KINDS = ("cart", "random_forest", "extra_trees", "knn", "linear_svm", "gbt")

_DEFAULTS: dict[str, dict] = {
    "cart": {"max_depth": None, "min_leaf": 1},
    "random_forest": {
        "n_trees": 32,
        "max_depth": None,
        "feature_frac": "sqrt",
        "bootstrap": True,
        "min_leaf": 1,
    },
    "extra_trees": {
        "n_trees": 32,
        "max_depth": None,
        "feature_frac": "sqrt",
        "bootstrap": False,
        "min_leaf": 1,
    },
    "knn": {"k": 3},
    "linear_svm": {"reg": 1e-4, "epochs": 10},
    "gbt": {
        "rounds": 50,
        "learning_rate": 0.1,
        "max_depth": 3,
        "feature_frac": "sqrt",
        "min_leaf": 1,
    },
}

_MODEL_CLASSES = {
    "cart": TreeEnsembleClassifier,
    "random_forest": TreeEnsembleClassifier,
    "extra_trees": TreeEnsembleClassifier,
    "knn": NearestNeighbors,
    "linear_svm": LinearSvm,
    "gbt": GradientBoostedTrees,
}


def default_grid(kind: str) -> list[dict]:
    """The documented per-kind grid, weakest configuration first."""
    if kind == "cart":
        return [{"max_depth": d} for d in (4, 8, 16, None)]
    if kind == "random_forest" or kind == "extra_trees":
        return [{"n_trees": t, "max_depth": d} for d in (8, None) for t in (16, 32, 64)]
    if kind == "knn":
        return [{"k": k} for k in (1, 3, 5, 9)]
    if kind == "linear_svm":
        return [{"reg": r, "epochs": e} for e in (5, 15) for r in (1e-2, 1e-3, 1e-4, 1e-5)]
    if kind == "gbt":
        return [
            {"rounds": r, "learning_rate": lr, "max_depth": d}
            for r in (25, 75)
            for lr in (0.1, 0.3)
            for d in (2, 3)
        ]
    raise LearnerError(f"unknown classifier kind {kind!r}")


def _positive_int(params: dict, key: str) -> None:
    v = params[key]
    if not isinstance(v, int) or isinstance(v, bool) or v < 1:
        raise LearnerError(f"{key} must be a positive integer, got {v!r}")


def resolve_params(kind: str, params: dict | None) -> dict:
    """Merge with per-kind defaults and validate ranges; unknown keys raise."""
    if kind not in _DEFAULTS:
        raise LearnerError(f"unknown classifier kind {kind!r}")
    merged = dict(_DEFAULTS[kind])
    for key, v in (params or {}).items():
        if key not in merged:
            raise LearnerError(f"unknown hyper-parameter {key!r} for kind {kind!r}")
        merged[key] = v

    if "max_depth" in merged and merged["max_depth"] is not None:
        _positive_int(merged, "max_depth")
    if "min_leaf" in merged:
        _positive_int(merged, "min_leaf")
    for key in ("n_trees", "k", "epochs", "rounds"):
        if key in merged:
            _positive_int(merged, key)
    if "reg" in merged and not merged["reg"] > 0:
        raise LearnerError(f"reg must be > 0, got {merged['reg']!r}")
    if "learning_rate" in merged and not 0 < merged["learning_rate"] <= 1:
        raise LearnerError(f"learning_rate must lie in (0, 1], got {merged['learning_rate']!r}")
    if "feature_frac" in merged and merged["feature_frac"] != "sqrt":
        frac = merged["feature_frac"]
        if not isinstance(frac, (int, float)) or not 0 < float(frac) <= 1:
            raise LearnerError(f"feature_frac must be 'sqrt' or in (0, 1], got {frac!r}")
    if "bootstrap" in merged and not isinstance(merged["bootstrap"], bool):
        raise LearnerError(f"bootstrap must be a bool, got {merged['bootstrap']!r}")
    return merged


def train(
    kind: str,
    params: dict | None,
    data: Sequence[tuple[SparseVector, int]],
    seed: int = 0,
    config_hash: str | None = None,
    recorder: SplitRecorder | None = None,
) -> TrainedClassifier:
    """Fit one classifier on (vector, sign) pairs. Deterministic given seed.

    Every kind except knn requires both classes present. All vectors must
    share one dimension.
    """
    if not data:
        raise LearnerError("training data is empty")
    vectors = [x for x, _ in data]
    labels = np.array([y for _, y in data], dtype=np.int64)
    if not set(np.unique(labels)) <= {-1, 1}:
        raise LearnerError("labels must be +1 or -1")
    params = resolve_params(kind, params)
    if kind != "knn" and len(set(labels.tolist())) < 2:
        raise LearnerError(f"{kind} requires both classes in the training data")

    if kind in ("cart", "random_forest", "extra_trees"):
        return TreeEnsembleClassifier.fit(
            kind, params, vectors, labels, seed, config_hash, recorder
        )
    if recorder is not None:
        raise LearnerError(f"split recording only applies to tree kinds, not {kind!r}")
    if kind == "knn":
        return NearestNeighbors.fit(params, vectors, labels, seed, config_hash)
    if kind == "linear_svm":
        return LinearSvm.fit(params, vectors, labels, seed, config_hash)
    return GradientBoostedTrees.fit(params, vectors, labels, seed, config_hash)
