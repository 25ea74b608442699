"""Linear SVM trained by deterministic epoch-ordered subgradient descent.

Hinge loss with L2 regularization; rows are visited in storage order every
epoch with step size 1/(reg*(t+1)), so the fit is reproducible without any
randomness. The margin is squashed through a logistic to yield a monotone
score in [0, 1]; a zero weight vector scores exactly 0.5.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .. import kernels
from ..features import SparseVector
from .base import TrainedClassifier, sigmoid, stack_csr


class LinearSvm(TrainedClassifier):
    """score(x) = sigmoid(w . x + b)."""

    def __init__(self, params, seed, dim, config_hash, w: np.ndarray, b: float):
        super().__init__("linear_svm", params, seed, dim, config_hash)
        self.w = np.asarray(w, dtype=np.float64)
        self.b = float(b)

    @classmethod
    def fit(
        cls,
        params: dict,
        vectors: Sequence[SparseVector],
        labels: np.ndarray,
        seed: int,
        config_hash: str | None = None,
    ) -> "LinearSvm":
        csr = stack_csr(vectors)
        y = np.asarray(labels, dtype=np.float64)
        w, b = kernels.svm_epochs(
            csr.indptr, csr.indices, csr.data, y, float(params["reg"]), int(params["epochs"]), csr.dim
        )
        return cls(params, seed, csr.dim, config_hash, w, b)

    def margins(self, vectors: Sequence[SparseVector]) -> np.ndarray:
        self._check_dims(vectors)
        out = np.empty(len(vectors), dtype=np.float64)
        for i, v in enumerate(vectors):
            out[i] = float(np.dot(v.values, self.w[v.indices])) + self.b
        return out

    def score_many(self, vectors: Sequence[SparseVector]) -> np.ndarray:
        return sigmoid(self.margins(vectors))

    def _arrays(self) -> dict[str, np.ndarray]:
        return {"w": self.w, "scalars": np.array([self.b])}

    @classmethod
    def _restore(cls, header: dict, arrays: dict) -> "LinearSvm":
        return cls(
            header["params"],
            header["seed"],
            header["dim"],
            header.get("config_hash"),
            arrays["w"],
            arrays["scalars"][0],
        )
