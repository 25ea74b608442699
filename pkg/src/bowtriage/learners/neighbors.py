"""K-nearest-neighbor scorer over L2-normalized vectors.

Similarity is the dot product (cosine, since vectors are unit length).
Training rows are stored in a canonical content order (sorted by index /
value / label bytes), so predictions are invariant to the order the
training data arrived in; neighbor ties at the k boundary resolve to the
lowest canonical rank. Tolerates single-class training data. Swapping the
model file is the supported "retraining": there is no fitted state beyond
the stored rows.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .. import kernels
from ..features import SparseVector
from .base import Csr, TrainedClassifier, stack_csr


def _canonical_order(vectors: Sequence[SparseVector], labels: np.ndarray) -> list[int]:
    def key(i: int):
        v = vectors[i]
        return (v.indices.tobytes(), v.values.tobytes(), int(labels[i]))

    return sorted(range(len(vectors)), key=key)


class NearestNeighbors(TrainedClassifier):
    """score(x) = fraction of positive labels among the k nearest rows."""

    def __init__(self, params, seed, dim, config_hash, csr: Csr, labels: np.ndarray):
        super().__init__("knn", params, seed, dim, config_hash)
        self.csr = csr
        self.labels = labels

    @classmethod
    def fit(
        cls,
        params: dict,
        vectors: Sequence[SparseVector],
        labels: np.ndarray,
        seed: int,
        config_hash: str | None = None,
    ) -> "NearestNeighbors":
        labels = np.asarray(labels, dtype=np.int64)
        order = _canonical_order(vectors, labels)
        csr = stack_csr([vectors[i] for i in order])
        return cls(params, seed, csr.dim, config_hash, csr, labels[order])

    def score_many(self, vectors: Sequence[SparseVector]) -> np.ndarray:
        self._check_dims(vectors)
        k = min(self.params["k"], self.csr.n_rows)
        out = np.empty(len(vectors), dtype=np.float64)
        for i, v in enumerate(vectors):
            sims = kernels.csr_dots(
                self.csr.indptr, self.csr.indices, self.csr.data, v.indices, v.values, self.dim
            )
            order = np.argsort(-sims, kind="stable")  # ties -> lowest canonical rank
            top = order[:k]
            out[i] = float((self.labels[top] > 0).mean())
        return out

    def _arrays(self) -> dict[str, np.ndarray]:
        return {
            "indptr": self.csr.indptr,
            "indices": self.csr.indices,
            "data": self.csr.data,
            "labels": self.labels,
        }

    @classmethod
    def _restore(cls, header: dict, arrays: dict) -> "NearestNeighbors":
        csr = Csr(arrays["indptr"], arrays["indices"], arrays["data"], header["dim"])
        return cls(
            header["params"],
            header["seed"],
            header["dim"],
            header.get("config_hash"),
            csr,
            arrays["labels"],
        )
