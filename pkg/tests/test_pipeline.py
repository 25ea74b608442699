import pytest

from bowtriage.corpus import BENIGN, MALWARE, SplitSpec
from bowtriage.ensemble import EnsembleError, load_model_set, predict, save_model_set
from bowtriage.evaluation import SyntheticSpec, generate_synthetic
from bowtriage.features import VectorizerConfig
from bowtriage.learners import default_grid
from bowtriage.pipeline import (
    compose_model_set,
    run_builds,
    vectorize_corpus,
)

from conftest import make_report
from bowtriage.corpus import Corpus, LabeledReport


@pytest.fixture(scope="module")
def built_small():
    spec = SyntheticSpec(
        n_families=2,
        reports_per_class=30,
        shared_vocab_size=100,
        markers_per_class=3,
        marker_rate=0.25,
        report_len=100,
        seed=8,
    )
    corpus = generate_synthetic(spec)
    vcfg = VectorizerConfig(method="hashing", n=1, dim=2**10)
    built, test_vc = run_builds(corpus, SplitSpec(seed=8), vcfg, ["cart", "knn"])
    return corpus, vcfg, built, test_vc


def test_vectorize_corpus_counts_empty_reports():
    records = [
        LabeledReport(make_report("a", "words here"), MALWARE, "famA"),
        LabeledReport(make_report("b", ""), MALWARE, "famA"),
        LabeledReport(make_report("c", "   \t "), BENIGN),
    ]
    vc = vectorize_corpus(Corpus(records), VectorizerConfig(method="hashing", n=1, dim=64))
    assert vc.n_empty == 2
    assert vc.vectors[1].nnz() == 0 and vc.vectors[2].nnz() == 0
    assert vc.ids == ["a", "b", "c"]


def test_family_xy_labels(built_small):
    _, _, built, _ = built_small
    xy = built.train_vc.family_xy("famA")
    labels = [y for _, y in xy]
    fams = built.train_vc.families
    assert labels == [1 if f == "famA" else -1 for f in fams]


def test_cross_kind_set_has_one_member_per_kind(built_small):
    corpus, vcfg, built, _ = built_small
    ms = compose_model_set(built, vcfg, 8)
    assert len(ms.detection.members) == 2
    assert sorted(m.model.kind for m in ms.detection.members) == ["cart", "knn"]
    for ens in ms.families.values():
        assert len(ens.members) == 2


def test_per_kind_set_takes_top_cells(built_small):
    corpus, vcfg, built, _ = built_small
    ms = compose_model_set(built, vcfg, 8, kind="cart", top_m=3)
    assert len(ms.detection.members) == 3
    assert all(m.model.kind == "cart" for m in ms.detection.members)
    big = compose_model_set(built, vcfg, 8, kind="cart", top_m=99)
    assert len(big.detection.members) == len(default_grid("cart"))


def test_model_set_roundtrip_and_config_guard(built_small, tmp_path):
    corpus, vcfg, built, _ = built_small
    ms = compose_model_set(built, vcfg, 8)
    out = tmp_path / "dir"
    save_model_set(ms, out)
    loaded = load_model_set(out)
    for rec in corpus.records[:5]:
        assert predict(loaded, rec.report) == predict(ms, rec.report)

    # corrupting the declared hash must make loading refuse
    config_path = out / "config.json"
    config_path.write_text(config_path.read_text().replace(ms.config_hash, "0" * 16))
    with pytest.raises(EnsembleError, match="vectorizer config"):
        load_model_set(out)


def test_tfidf_pipeline_end_to_end(built_small, tmp_path):
    corpus, _, _, _ = built_small
    vcfg = VectorizerConfig(method="tfidf", n=1)
    built, test_vc = run_builds(corpus, SplitSpec(seed=8), vcfg, ["cart"])
    ms = compose_model_set(built, vcfg, 8, kind="cart", top_m=2)
    assert ms.tfidf_model is not None
    out = tmp_path / "tfidf-dir"
    save_model_set(ms, out)
    assert (out / "tfidf.model").is_file()
    loaded = load_model_set(out)
    for rec in corpus.records[:5]:
        assert predict(loaded, rec.report) == predict(ms, rec.report)
