"""Token sequences to fixed-length, L2-normalized sparse feature vectors.

Two interchangeable vectorizers over word n-grams:

* feature hashing — each n-gram occurrence increments bucket
  ``fnv1a_64(key) mod dim``; streaming, no vocabulary is materialized;
* TFIDF — weight(w, d) = tf(w, d) * ln(num_docs / (1 + doc_freq(w))).
  The +1 sits in the denominator, so weights can be zero (when
  num_docs == 1 + doc_freq) or negative (w in every document); they are
  kept as the formula produces them, no clipping.

Both outputs are L2-normalized; the all-zero vector is left unchanged.
The hash is pinned to FNV-1a 64-bit so vectors and trained models are
portable across machines and runs.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np

# Joins the tokens of one n-gram key. The default tokenizer can never emit
# this byte (it is a delimiter), so ("ab","c") and ("a","bc") cannot collide.
NGRAM_SEP = "\x1f"

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_MASK64 = 0xFFFFFFFFFFFFFFFF


class FeatureError(Exception):
    """Raised on vectorizer misuse (missing model, config mismatch...)."""


def fnv1a_64(data: bytes | str) -> int:
    """FNV-1a 64-bit hash. Fixed, platform-independent; strings as UTF-8."""
    if isinstance(data, str):
        data = data.encode("utf-8")
    h = _FNV_OFFSET
    for b in data:
        h ^= b
        h = (h * _FNV_PRIME) & _MASK64
    return h


class SparseVector:
    """Fixed-dimension sparse vector: sorted unique indices + float64 values."""

    __slots__ = ("dim", "indices", "values")

    def __init__(self, dim: int, indices: np.ndarray, values: np.ndarray):
        if dim < 1:
            raise FeatureError(f"dim must be >= 1, got {dim}")
        self.dim = int(dim)
        self.indices = np.asarray(indices, dtype=np.int64)
        self.values = np.asarray(values, dtype=np.float64)
        if self.indices.shape != self.values.shape:
            raise FeatureError("indices and values must have equal length")
        if self.indices.size:
            if self.indices[-1] >= dim or self.indices[0] < 0:
                raise FeatureError("index out of range for dim")

    @classmethod
    def from_entries(cls, dim: int, entries: dict[int, float]) -> "SparseVector":
        idx = np.array(sorted(entries), dtype=np.int64)
        val = np.array([entries[i] for i in idx], dtype=np.float64)
        return cls(dim, idx, val)

    @classmethod
    def zero(cls, dim: int) -> "SparseVector":
        return cls(dim, np.empty(0, dtype=np.int64), np.empty(0, dtype=np.float64))

    def to_entries(self) -> dict[int, float]:
        return {int(i): float(v) for i, v in zip(self.indices, self.values)}

    def to_dense(self) -> np.ndarray:
        out = np.zeros(self.dim, dtype=np.float64)
        out[self.indices] = self.values
        return out

    def norm(self) -> float:
        return math.sqrt(float(np.dot(self.values, self.values)))

    def nnz(self) -> int:
        return int(self.indices.size)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, SparseVector)
            and self.dim == other.dim
            and np.array_equal(self.indices, other.indices)
            and np.array_equal(self.values, other.values)
        )

    def __repr__(self) -> str:
        return f"SparseVector(dim={self.dim}, nnz={self.nnz()})"


def l2_normalize(v: SparseVector) -> SparseVector:
    """Divide by the Euclidean norm; the all-zero vector is returned as is."""
    n = v.norm()
    if n == 0.0:
        return v
    return SparseVector(v.dim, v.indices, v.values / n)


def iter_ngrams(tokens: list[str], n: int) -> Iterator[str]:
    """Yield every window of n consecutive tokens as a joined key, in order."""
    if n < 1:
        raise FeatureError(f"n-gram size must be >= 1, got {n}")
    if n == 1:
        for tok in tokens:
            if NGRAM_SEP in tok:
                raise FeatureError("token contains the reserved n-gram separator byte")
        yield from tokens
        return
    for tok in tokens:
        if NGRAM_SEP in tok:
            raise FeatureError("token contains the reserved n-gram separator byte")
    for i in range(len(tokens) - n + 1):
        yield NGRAM_SEP.join(tokens[i : i + n])


def ngrams(tokens: list[str], n: int) -> dict[str, int]:
    """Count n-grams over a sliding window advancing one token at a time.

    Sequences shorter than n yield the empty mapping. Keys are the window's
    tokens joined by the reserved separator byte.
    """
    counts: dict[str, int] = {}
    for key in iter_ngrams(tokens, n):
        counts[key] = counts.get(key, 0) + 1
    return counts


def hash_vectorize(tokens: list[str], n: int, dim: int) -> SparseVector:
    """Hash each n-gram occurrence into ``fnv1a_64(key) mod dim``, L2-normalized.

    Streaming: n-grams are hashed as the window advances, the full n-gram
    set is never materialized. Empty input yields the zero vector.
    """
    if dim < 1:
        raise FeatureError(f"hash dim must be >= 1, got {dim}")
    buckets: dict[int, float] = {}
    for key in iter_ngrams(tokens, n):
        b = fnv1a_64(key) % dim
        buckets[b] = buckets.get(b, 0.0) + 1.0
    return l2_normalize(SparseVector.from_entries(dim, buckets))


class TfidfModel:
    """Fitted TFIDF vocabulary: n-gram -> column, document frequencies.

    Immutable after fit. idf uses the natural log of
    num_docs / (1 + doc_freq); zero and negative weights are possible and
    kept. Vocabulary columns are assigned in first-seen corpus order.
    """

    FORMAT_VERSION = 1

    def __init__(self, vocab: dict[str, int], doc_freq: dict[str, int], num_docs: int, n: int):
        self.vocab = vocab
        self.doc_freq = doc_freq
        self.num_docs = int(num_docs)
        self.n = int(n)
        self.log_base = "e"

    @property
    def dim(self) -> int:
        return len(self.vocab)

    def idf(self, gram: str) -> float:
        return math.log(self.num_docs / (1 + self.doc_freq[gram]))

    def fingerprint(self) -> str:
        """Stable digest of the fitted state, for config-compatibility guards."""
        h = hashlib.sha256()
        h.update(f"tfidf/v{self.FORMAT_VERSION}/n={self.n}/docs={self.num_docs}\n".encode())
        for gram in sorted(self.vocab):
            h.update(f"{self.vocab[gram]}\t{self.doc_freq[gram]}\t".encode())
            h.update(gram.encode("utf-8"))
            h.update(b"\n")
        return h.hexdigest()

    def save(self, path: str | Path) -> None:
        """Versioned flat file: header line, then one vocab row per line."""
        path = Path(path)
        with path.open("w", encoding="utf-8") as fh:
            fh.write(
                f"tfidf\tversion={self.FORMAT_VERSION}\tn={self.n}"
                f"\tnum_docs={self.num_docs}\tlog_base={self.log_base}\n"
            )
            for gram, col in sorted(self.vocab.items(), key=lambda kv: kv[1]):
                enc = gram.replace("\\", "\\\\").replace("\t", "\\t").replace("\n", "\\n")
                enc = enc.replace(NGRAM_SEP, "\\x1f")
                fh.write(f"{col}\t{self.doc_freq[gram]}\t{enc}\n")

    @classmethod
    def load(cls, path: str | Path) -> "TfidfModel":
        path = Path(path)
        lines = path.read_text(encoding="utf-8").splitlines()
        if not lines or not lines[0].startswith("tfidf\t"):
            raise FeatureError(f"{path}: not a TFIDF model file")
        header = dict(kv.split("=", 1) for kv in lines[0].split("\t")[1:])
        if int(header["version"]) != cls.FORMAT_VERSION:
            raise FeatureError(f"{path}: unsupported model version {header['version']}")
        vocab: dict[str, int] = {}
        doc_freq: dict[str, int] = {}
        for line in lines[1:]:
            if not line:
                continue
            col, df, enc = line.split("\t", 2)
            gram = (
                enc.replace("\\x1f", NGRAM_SEP)
                .replace("\\n", "\n")
                .replace("\\t", "\t")
                .replace("\\\\", "\\")
            )
            vocab[gram] = int(col)
            doc_freq[gram] = int(df)
        return cls(vocab, doc_freq, int(header["num_docs"]), int(header["n"]))


def tfidf_fit(corpus_tokens: Iterable[list[str]], n: int, min_df: int = 1) -> TfidfModel:
    """Fit vocabulary and document frequencies over a token-sequence corpus.

    doc_freq counts documents containing an n-gram, not occurrences.
    min_df drops n-grams seen in fewer than min_df documents (memory cap
    for unbounded vocabularies); the default keeps everything.
    """
    vocab: dict[str, int] = {}
    doc_freq: dict[str, int] = {}
    num_docs = 0
    for tokens in corpus_tokens:
        num_docs += 1
        # dict.fromkeys dedupes while keeping first-seen order (set would
        # leak the process hash seed into column assignment)
        for gram in dict.fromkeys(iter_ngrams(tokens, n)):
            if gram not in vocab:
                vocab[gram] = len(vocab)
            doc_freq[gram] = doc_freq.get(gram, 0) + 1
    if num_docs == 0:
        raise FeatureError("tfidf_fit requires at least one document")
    if min_df > 1:
        kept = [g for g, c in vocab.items() if doc_freq[g] >= min_df]
        kept.sort(key=vocab.get)
        vocab = {g: i for i, g in enumerate(kept)}
        doc_freq = {g: doc_freq[g] for g in kept}
    return TfidfModel(vocab, doc_freq, num_docs, n)


def tfidf_transform(model: TfidfModel, tokens: list[str], n: int) -> SparseVector:
    """Weight document n-grams by tf * idf and L2-normalize.

    N-grams outside the fitted vocabulary are dropped. Requires the same n
    the model was fitted with.
    """
    if n != model.n:
        raise FeatureError(f"model fitted with n={model.n}, transform requested n={n}")
    entries: dict[int, float] = {}
    for gram, tf in ngrams(tokens, n).items():
        col = model.vocab.get(gram)
        if col is None:
            continue
        entries[col] = tf * model.idf(gram)
    if model.dim == 0:
        return SparseVector.zero(1)
    return l2_normalize(SparseVector.from_entries(model.dim, entries))


@dataclass(frozen=True)
class VectorizerConfig:
    """Which vectorizer to run and with what shape.

    method is 'hashing' or 'tfidf'; n is the n-gram window; dim is the
    hashed vector length (ignored for tfidf, whose dimension is the fitted
    vocabulary size).
    """

    method: str = "hashing"
    n: int = 2
    dim: int = 2**18
    hash_name: str = "fnv1a64"

    def __post_init__(self):
        if self.method not in ("hashing", "tfidf"):
            raise FeatureError(f"unknown vectorizer method {self.method!r}")
        if self.n < 1:
            raise FeatureError(f"n must be >= 1, got {self.n}")
        if self.method == "hashing" and self.dim < 1:
            raise FeatureError(f"dim must be >= 1, got {self.dim}")
        if self.hash_name != "fnv1a64":
            raise FeatureError(f"unsupported hash {self.hash_name!r}")

    def config_hash(self, tfidf_model: TfidfModel | None = None) -> str:
        """Digest identifying the full vectorization behavior.

        Models trained under one config refuse to score vectors from
        another; for tfidf the fitted vocabulary is part of the identity.
        """
        payload: dict = {"method": self.method, "n": self.n}
        if self.method == "hashing":
            payload["dim"] = self.dim
            payload["hash"] = self.hash_name
        elif tfidf_model is not None:
            payload["tfidf"] = tfidf_model.fingerprint()
        return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()[:16]

    @property
    def label(self) -> str:
        return self.method


def vectorize(
    tokens: list[str], cfg: VectorizerConfig, tfidf_model: TfidfModel | None = None
) -> SparseVector:
    """Dispatch to the configured vectorizer. Pure in (input, config, model)."""
    if cfg.method == "hashing":
        return hash_vectorize(tokens, cfg.n, cfg.dim)
    if tfidf_model is None:
        raise FeatureError("tfidf vectorization requires a fitted TfidfModel")
    return tfidf_transform(tfidf_model, tokens, cfg.n)
