"""Shared fixtures and small builders for the test suite."""

from __future__ import annotations

import numpy as np
import pytest

from bowtriage.corpus import Corpus, LabeledReport, RawReport
from bowtriage.features import SparseVector


def make_report(rid: str, text: str) -> RawReport:
    return RawReport(id=rid, text=text, source_tag="test")


def make_corpus(spec: list[tuple[str, int, str | None]], text: str = "alpha beta") -> Corpus:
    """Corpus from (id, label, family) triples; same placeholder text."""
    return Corpus(
        [
            LabeledReport(make_report(rid, text), label, family)
            for rid, label, family in spec
        ]
    )


def sv(dim: int, entries: dict[int, float]) -> SparseVector:
    return SparseVector.from_entries(dim, entries)


def key_vector(i: int, dim: int = 1_000_000) -> SparseVector:
    """Vector whose identity is its single index; used with stub scorers."""
    return SparseVector(dim, np.array([i], dtype=np.int64), np.array([1.0]))


class StubScorer:
    """Classifier stand-in: fixed score per key_vector, counts invocations."""

    kind = "stub"

    def __init__(self, table: dict[int, float], dim: int = 1_000_000):
        self.table = table
        self.dim = dim
        self.calls = 0

    def score_many(self, vectors) -> np.ndarray:
        self.calls += len(vectors)
        return np.array([self.table[int(v.indices[0])] for v in vectors], dtype=np.float64)

    def score(self, x) -> float:
        return float(self.score_many([x])[0])


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240817)


def random_sparse(rng: np.random.Generator, dim: int, nnz: int) -> SparseVector:
    idx = np.sort(rng.choice(dim, size=min(nnz, dim), replace=False)).astype(np.int64)
    val = rng.uniform(0.1, 2.0, size=idx.size)
    return SparseVector(dim, idx, val)


def separable_xy(
    rng: np.random.Generator, n_per_class: int = 30, dim: int = 64
) -> list[tuple[SparseVector, int]]:
    """Linearly separable sparse data: positives load on low columns."""
    data = []
    for _ in range(n_per_class):
        idx = np.sort(rng.choice(dim // 2, size=4, replace=False)).astype(np.int64)
        data.append((SparseVector(dim, idx, np.full(4, 0.5)), 1))
    for _ in range(n_per_class):
        idx = np.sort(dim // 2 + rng.choice(dim // 2, size=4, replace=False)).astype(np.int64)
        data.append((SparseVector(dim, idx, np.full(4, 0.5)), -1))
    return data
