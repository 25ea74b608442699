"""Shared classifier interface, sparse-matrix helpers, model file format."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from ..features import SparseVector


class LearnerError(Exception):
    """Raised on bad hyper-parameters, degenerate data, or misuse."""


@dataclass
class Csr:
    """Row-major sparse matrix stacked from SparseVectors."""

    indptr: np.ndarray
    indices: np.ndarray
    data: np.ndarray
    dim: int

    @property
    def n_rows(self) -> int:
        return self.indptr.size - 1


def stack_csr(vectors: Sequence[SparseVector]) -> Csr:
    if not vectors:
        raise LearnerError("cannot stack an empty vector list")
    dim = vectors[0].dim
    for v in vectors:
        if v.dim != dim:
            raise LearnerError(f"dimension mismatch: {v.dim} vs {dim}")
    indptr = np.zeros(len(vectors) + 1, dtype=np.int64)
    for i, v in enumerate(vectors):
        indptr[i + 1] = indptr[i] + v.nnz()
    indices = np.concatenate([v.indices for v in vectors]) if indptr[-1] else np.empty(0, np.int64)
    data = np.concatenate([v.values for v in vectors]) if indptr[-1] else np.empty(0, np.float64)
    return Csr(indptr, indices.astype(np.int64), data.astype(np.float64), dim)


def gather_columns(vectors: Sequence[SparseVector], col_map: np.ndarray, dim: int) -> np.ndarray:
    """Densify vectors onto the given sorted original-column ids."""
    out = np.zeros((len(vectors), col_map.size), dtype=np.float64)
    for i, v in enumerate(vectors):
        if v.dim != dim:
            raise LearnerError(f"dimension mismatch: vector dim {v.dim}, model dim {dim}")
        if v.nnz() == 0 or col_map.size == 0:
            continue
        pos = np.searchsorted(col_map, v.indices)
        pos_c = np.minimum(pos, col_map.size - 1)
        hit = col_map[pos_c] == v.indices
        out[i, pos_c[hit]] = v.values[hit]
    return out


def sigmoid(z: np.ndarray) -> np.ndarray:
    """Numerically stable logistic squashing."""
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    pos = z >= 0
    neg = ~pos
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[neg])
    out[neg] = ez / (1.0 + ez)
    return out


class TrainedClassifier:
    """A fitted binary scorer. Immutable after fit; scoring is thread-safe.

    score() returns a calibrated-monotone value in [0, 1]; higher means more
    positive. Subclasses define the per-kind mapping (leaf fractions, vote
    fractions, neighbor fractions, squashed margins).
    """

    FORMAT_VERSION = 1

    def __init__(self, kind: str, params: dict, seed: int, dim: int, config_hash: str | None):
        self.kind = kind
        self.params = dict(params)
        self.seed = int(seed)
        self.dim = int(dim)
        self.config_hash = config_hash

    def score_many(self, vectors: Sequence[SparseVector]) -> np.ndarray:
        raise NotImplementedError

    def score(self, x: SparseVector) -> float:
        return float(self.score_many([x])[0])

    def _check_dims(self, vectors: Sequence[SparseVector]) -> None:
        for v in vectors:
            if v.dim != self.dim:
                raise LearnerError(
                    f"dimension mismatch: vector dim {v.dim}, model dim {self.dim}"
                )

    # -- persistence: one .npz per model, json header embedded ---------------

    def _arrays(self) -> dict[str, np.ndarray]:
        raise NotImplementedError

    @classmethod
    def _restore(cls, header: dict, arrays: dict) -> "TrainedClassifier":
        raise NotImplementedError

    def save(self, path: str | Path) -> None:
        header = {
            "format": "bowtriage-model",
            "version": self.FORMAT_VERSION,
            "kind": self.kind,
            "params": self.params,
            "seed": self.seed,
            "dim": self.dim,
            "config_hash": self.config_hash,
        }
        np.savez(Path(path), __header__=np.array(json.dumps(header, sort_keys=True)), **self._arrays())


def load_model(path: str | Path) -> TrainedClassifier:
    """Reload any saved classifier; scores reproduce bit-exactly."""
    from . import _MODEL_CLASSES  # deferred: registry lives in the package root

    with np.load(Path(path), allow_pickle=False) as npz:
        header = json.loads(str(npz["__header__"]))
        if header.get("format") != "bowtriage-model":
            raise LearnerError(f"{path}: not a model file")
        if header.get("version") != TrainedClassifier.FORMAT_VERSION:
            raise LearnerError(f"{path}: unsupported model version {header.get('version')}")
        kind = header["kind"]
        if kind not in _MODEL_CLASSES:
            raise LearnerError(f"{path}: unknown classifier kind {kind!r}")
        arrays = {k: npz[k] for k in npz.files if k != "__header__"}
    return _MODEL_CLASSES[kind]._restore(header, arrays)


def predict_threshold(c: TrainedClassifier, x: SparseVector, th: float) -> int:
    """+1 iff score(x) >= th, else -1."""
    if not 0.0 <= th <= 1.0:
        raise LearnerError(f"threshold must lie in [0, 1], got {th}")
    return 1 if c.score(x) >= th else -1
