"""Bag-of-words triage of textual behavioral reports.

Pipeline: tokenize reports into word sequences, vectorize by hashed n-grams
or TFIDF, grid-tune a menu of from-scratch classifiers per threat, compose
majority-vote ensembles, and emit detection + family-attribution verdicts.
"""

__version__ = "0.1.0"

from .corpus import (
    BENIGN,
    MALWARE,
    Corpus,
    CorpusError,
    LabeledReport,
    RawReport,
    SplitSpec,
    load_manifest,
    make_family_task,
    stratified_split,
    tokenize,
)
from .features import (
    FeatureError,
    SparseVector,
    TfidfModel,
    VectorizerConfig,
    fnv1a_64,
    hash_vectorize,
    l2_normalize,
    ngrams,
    tfidf_fit,
    tfidf_transform,
    vectorize,
)

__all__ = [
    "BENIGN",
    "MALWARE",
    "Corpus",
    "CorpusError",
    "FeatureError",
    "LabeledReport",
    "RawReport",
    "SparseVector",
    "SplitSpec",
    "TfidfModel",
    "VectorizerConfig",
    "fnv1a_64",
    "hash_vectorize",
    "l2_normalize",
    "load_manifest",
    "make_family_task",
    "ngrams",
    "stratified_split",
    "tfidf_fit",
    "tfidf_transform",
    "tokenize",
    "vectorize",
]
