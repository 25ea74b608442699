import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bowtriage.features import (
    NGRAM_SEP,
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

from conftest import sv
from oracles import dict_cosine, tfidf_bruteforce, tuple_ngrams

# Published FNV-1a 64-bit reference vectors.
FNV_VECTORS = {
    "": 0xCBF29CE484222325,
    "a": 0xAF63DC4C8601EC8C,
    "b": 0xAF63DF4C8601F1A5,
    "c": 0xAF63DE4C8601EFF2,
    "foobar": 0x85944171F73967E8,
}


def test_fnv1a_64_reference_vectors():
    for text, expected in FNV_VECTORS.items():
        assert fnv1a_64(text) == expected
        assert fnv1a_64(text.encode()) == expected


# -- n-grams ------------------------------------------------------------------


def test_ngrams_bigrams():
    got = ngrams(["a", "b", "a", "c"], 2)
    assert got == {f"a{NGRAM_SEP}b": 1, f"b{NGRAM_SEP}a": 1, f"a{NGRAM_SEP}c": 1}


def test_ngrams_unigram_counts():
    assert ngrams(["x", "x", "x"], 1) == {"x": 3}


def test_ngrams_window_exceeds_length():
    assert ngrams(["a"], 2) == {}
    assert ngrams([], 1) == {}


def test_ngrams_separator_prevents_collisions():
    assert set(ngrams(["ab", "c"], 2)) != set(ngrams(["a", "bc"], 2))


def test_ngrams_rejects_separator_in_token():
    with pytest.raises(FeatureError):
        ngrams([f"a{NGRAM_SEP}b"], 1)
    with pytest.raises(FeatureError):
        ngrams(["ok", f"a{NGRAM_SEP}b"], 2)


@settings(max_examples=100, deadline=None)
@given(
    st.lists(st.text(alphabet="abcXYZ._/", min_size=1, max_size=6), max_size=30),
    st.integers(min_value=1, max_value=4),
)
def test_ngrams_total_occurrences(tokens, n):
    total = sum(ngrams(tokens, n).values())
    assert total == max(0, len(tokens) - n + 1)


# -- hashing ------------------------------------------------------------------


def test_hash_vectorize_single_bucket():
    v = hash_vectorize(["anything", "at", "all"], 1, 1)
    assert v.dim == 1 and v.to_entries() == {0: 1.0}


def test_hash_vectorize_empty_tokens():
    v = hash_vectorize([], 1, 16)
    assert v.dim == 16 and v.nnz() == 0


def test_hash_vectorize_bucket_positions():
    # fnv1a_64('a') % 8 == 4 and fnv1a_64('b') % 8 == 5; counts (2, 1) pre-norm
    v = hash_vectorize(["a", "b", "a"], 1, 8)
    expected = {4: 2 / math.sqrt(5), 5: 1 / math.sqrt(5)}
    assert set(v.to_entries()) == {4, 5}
    for idx, val in expected.items():
        assert v.to_entries()[idx] == pytest.approx(val, abs=1e-12)


@settings(max_examples=100, deadline=None)
@given(
    st.lists(st.text(alphabet="abcde", min_size=1, max_size=4), max_size=25),
    st.integers(min_value=1, max_value=3),
    st.sampled_from([4, 16, 64]),
)
def test_hash_vectorize_matches_bucket_oracle(tokens, n, dim):
    v = hash_vectorize(tokens, n, dim)
    buckets: dict[int, float] = {}
    for gram, count in tuple_ngrams(tokens, n).items():
        b = fnv1a_64(NGRAM_SEP.join(gram)) % dim
        buckets[b] = buckets.get(b, 0.0) + count
    assert sum(buckets.values()) == max(0, len(tokens) - n + 1)
    norm = math.sqrt(sum(c * c for c in buckets.values()))
    expected = {b: c / norm for b, c in buckets.items()} if norm else {}
    got = v.to_entries()
    assert set(got) == set(expected)
    for b in expected:
        assert got[b] == pytest.approx(expected[b], abs=1e-12)


def test_hashing_distance_preservation_small():
    # cosine distortion shrinks as the hashed dimension grows
    rng = np.random.default_rng(5)
    vocab = [f"w{i}" for i in range(300)]
    docs = [[vocab[int(rng.integers(0, 300))] for _ in range(80)] for _ in range(40)]
    exact = [tuple_ngrams(d, 2) for d in docs]

    def mean_err(dim: int) -> float:
        hashed = [hash_vectorize(d, 2, dim).to_entries() for d in docs]
        errs = []
        for i in range(len(docs)):
            for j in range(i + 1, len(docs)):
                errs.append(
                    abs(dict_cosine(exact[i], exact[j]) - dict_cosine(hashed[i], hashed[j]))
                )
        return float(np.mean(errs))

    assert mean_err(2**14) < mean_err(2**7)


# -- L2 normalization ---------------------------------------------------------


def test_l2_normalize_three_four():
    v = l2_normalize(sv(2, {0: 3.0, 1: 4.0}))
    assert v.to_entries() == {0: pytest.approx(0.6), 1: pytest.approx(0.8)}


def test_l2_normalize_zero_vector():
    v = l2_normalize(SparseVector.zero(4))
    assert v.nnz() == 0 and v.dim == 4


def test_l2_normalize_unit_vector_fixed_point():
    v = l2_normalize(sv(3, {1: 0.6, 2: 0.8}))
    again = l2_normalize(v)
    for idx, val in v.to_entries().items():
        assert abs(again.to_entries()[idx] - val) < 1e-12


@settings(max_examples=100, deadline=None)
@given(
    st.lists(st.floats(-5, 5).map(lambda x: 0.0 if abs(x) < 1e-3 else x), min_size=1, max_size=8)
)
def test_l2_normalize_norm_is_one_or_zero(values):
    entries = {i: v for i, v in enumerate(values)}
    v = l2_normalize(sv(len(values), entries))
    assert v.norm() == pytest.approx(1.0, abs=1e-9) or v.norm() == 0.0


# -- tfidf --------------------------------------------------------------------


def test_tfidf_fit_basic():
    model = tfidf_fit([["a", "b"], ["a"]], 1)
    assert model.vocab == {"a": 0, "b": 1}
    assert model.doc_freq == {"a": 2, "b": 1}
    assert model.num_docs == 2


def test_tfidf_fit_empty_document():
    model = tfidf_fit([[]], 1)
    assert model.vocab == {} and model.num_docs == 1


def test_tfidf_fit_deterministic():
    docs = [["b", "a"], ["c", "a"], ["b"]]
    m1, m2 = tfidf_fit(docs, 1), tfidf_fit(docs, 1)
    assert m1.vocab == m2.vocab and m1.doc_freq == m2.doc_freq


def test_tfidf_fit_requires_documents():
    with pytest.raises(FeatureError):
        tfidf_fit([], 1)


def test_tfidf_fit_min_df_floor():
    model = tfidf_fit([["a", "b"], ["a", "c"], ["a", "b"]], 1, min_df=2)
    assert set(model.vocab) == {"a", "b"}
    assert model.doc_freq == {"a": 3, "b": 2}


def test_tfidf_zero_weight_when_df_plus_one_equals_docs():
    # idf = ln(2 / (1 + 1)) = 0 for a term in exactly one of two docs
    model = tfidf_fit([["a", "b"], ["b"]], 1)
    assert model.idf("a") == 0.0
    v = tfidf_transform(model, ["a"], 1)
    assert all(val == 0.0 for val in v.to_entries().values()) or v.nnz() == 0


def test_tfidf_negative_weight_propagates():
    # idf = ln(2/3) < 0 for a term in both of two docs
    model = tfidf_fit([["b", "a"], ["b"]], 1)
    assert model.idf("b") == pytest.approx(math.log(2 / 3))
    v = tfidf_transform(model, ["b", "b", "a"], 1)
    # 'a' has idf 0, so only the negative 'b' weight survives: normalized to -1
    assert v.to_entries()[model.vocab["b"]] == pytest.approx(-1.0)


def test_tfidf_unseen_grams_dropped():
    model = tfidf_fit([["a", "b"], ["b"]], 1)
    v = tfidf_transform(model, ["zzz", "qqq"], 1)
    assert v.nnz() == 0


def test_tfidf_n_mismatch():
    model = tfidf_fit([["a", "b"]], 2)
    with pytest.raises(FeatureError, match="n="):
        tfidf_transform(model, ["a", "b"], 1)


def test_tfidf_matches_bruteforce_oracle(rng):
    for trial in range(10):
        n = int(rng.integers(1, 3))
        vocab = [f"t{i}" for i in range(12)]
        docs = [
            [vocab[int(rng.integers(0, len(vocab)))] for _ in range(int(rng.integers(0, 20)))]
            for _ in range(int(rng.integers(1, 15)))
        ]
        model = tfidf_fit(docs, n)
        columns, expected = tfidf_bruteforce(docs, n)
        for doc, exp in zip(docs, expected):
            got = tfidf_transform(model, doc, n).to_entries()
            exp_by_col = {columns[g]: w for g, w in exp.items() if w != 0.0}
            got_nonzero = {c: w for c, w in got.items() if w != 0.0}
            assert set(got_nonzero) == set(exp_by_col)
            for col, w in exp_by_col.items():
                assert got_nonzero[col] == pytest.approx(w, abs=1e-9)


def test_tfidf_model_roundtrip(tmp_path):
    docs = [["a b", "with\ttab"], ["line\nbreak", "back\\slash", "a b"]]
    model = tfidf_fit(docs, 2)
    path = tmp_path / "m.tfidf"
    model.save(path)
    loaded = TfidfModel.load(path)
    assert loaded.vocab == model.vocab
    assert loaded.doc_freq == model.doc_freq
    assert loaded.num_docs == model.num_docs and loaded.n == model.n
    assert loaded.fingerprint() == model.fingerprint()


# -- dispatch and configs -----------------------------------------------------


def test_vectorize_dispatches_to_hashing():
    cfg = VectorizerConfig(method="hashing", n=1, dim=32)
    tokens = ["x", "y", "x"]
    assert vectorize(tokens, cfg) == hash_vectorize(tokens, 1, 32)


def test_vectorize_tfidf_requires_model():
    cfg = VectorizerConfig(method="tfidf", n=1)
    with pytest.raises(FeatureError):
        vectorize(["a"], cfg)


def test_vectorize_pure():
    cfg = VectorizerConfig(method="hashing", n=2, dim=64)
    tokens = ["a", "b", "c", "a", "b"]
    assert vectorize(tokens, cfg) == vectorize(tokens, cfg)


def test_config_hash_sensitivity():
    base = VectorizerConfig(method="hashing", n=2, dim=64)
    assert base.config_hash() == VectorizerConfig(method="hashing", n=2, dim=64).config_hash()
    assert base.config_hash() != VectorizerConfig(method="hashing", n=3, dim=64).config_hash()
    assert base.config_hash() != VectorizerConfig(method="hashing", n=2, dim=128).config_hash()
    m1 = tfidf_fit([["a"]], 1)
    m2 = tfidf_fit([["a"], ["b"]], 1)
    tcfg = VectorizerConfig(method="tfidf", n=1)
    assert tcfg.config_hash(m1) != tcfg.config_hash(m2)
    assert tcfg.config_hash(m1) != base.config_hash()


def test_config_validation():
    with pytest.raises(FeatureError):
        VectorizerConfig(method="word2vec")
    with pytest.raises(FeatureError):
        VectorizerConfig(method="hashing", n=0)
    with pytest.raises(FeatureError):
        VectorizerConfig(method="hashing", dim=0)


def test_sparse_vector_validation():
    with pytest.raises(FeatureError):
        SparseVector(4, np.array([5], dtype=np.int64), np.array([1.0]))
    with pytest.raises(FeatureError):
        SparseVector(0, np.empty(0, np.int64), np.empty(0))
