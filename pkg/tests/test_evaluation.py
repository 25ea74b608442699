import numpy as np
import pytest

from bowtriage.corpus import SplitSpec
from bowtriage.evaluation import (
    EvaluationError,
    ExperimentConfig,
    SyntheticSpec,
    curve_to_tsv,
    generate_synthetic,
    metrics,
    run_experiment,
    time_model_set,
    timing_benchmark,
    timing_to_tsv,
    train_size_sweep,
)
from bowtriage.features import VectorizerConfig
from bowtriage.learners import train
from bowtriage.pipeline import compose_model_set, run_builds


# -- metrics ------------------------------------------------------------------


def test_metrics_all_correct():
    m = metrics([1, -1, 1, -1], [1, -1, 1, -1])
    assert m.f1 == 1.0 and m.fpr == 0.0 and m.precision == 1.0 and m.recall == 1.0


def test_metrics_all_positive_predictions():
    m = metrics([1, 1, 1, 1], [1, 1, -1, -1])
    assert m.precision == 0.5 and m.recall == 1.0
    assert m.f1 == pytest.approx(2 / 3)
    assert m.fpr == 1.0


def test_metrics_no_positives_anywhere():
    m = metrics([-1, -1], [-1, -1])
    assert m.f1 == 0.0 and m.fpr == 0.0


def test_metrics_errors():
    with pytest.raises(EvaluationError):
        metrics([1], [1, -1])
    with pytest.raises(EvaluationError):
        metrics([], [])


@pytest.mark.parametrize("seed", range(5))
def test_fpr_plus_specificity_is_one(seed):
    rng = np.random.default_rng(seed)
    preds = np.where(rng.random(50) < 0.5, 1, -1)
    truth = np.where(rng.random(50) < 0.5, 1, -1)
    m = metrics(preds, truth)
    if m.fp + m.tn:
        assert m.fpr + m.tn / (m.fp + m.tn) == pytest.approx(1.0)


# -- synthetic corpus ---------------------------------------------------------


def test_synthetic_counts_and_labels():
    spec = SyntheticSpec(n_families=2, reports_per_class=30, seed=1)
    corpus = generate_synthetic(spec)
    assert len(corpus) == 90
    assert sorted(corpus.family_index) == ["famA", "famB"]
    malware = [r for r in corpus.records if r.detect_label == 1]
    assert len(malware) == 60
    assert all(r.family is None for r in corpus.records if r.detect_label == -1)


def test_synthetic_deterministic():
    a = generate_synthetic(SyntheticSpec(seed=9, reports_per_class=10))
    b = generate_synthetic(SyntheticSpec(seed=9, reports_per_class=10))
    assert [r.report.text for r in a.records] == [r.report.text for r in b.records]
    c = generate_synthetic(SyntheticSpec(seed=10, reports_per_class=10))
    assert [r.report.text for r in a.records] != [r.report.text for r in c.records]


def test_synthetic_marker_collision_detected():
    spec = SyntheticSpec(
        n_families=1,
        reports_per_class=4,
        explicit_markers={
            "benign": (("dup", "x"),),
            "famA": (("dup", "x"),),
        },
    )
    with pytest.raises(EvaluationError, match="collision"):
        generate_synthetic(spec)


def test_synthetic_validation():
    with pytest.raises(EvaluationError):
        generate_synthetic(SyntheticSpec(marker_rate=0.9, noise_rate=0.2))
    with pytest.raises(EvaluationError):
        generate_synthetic(SyntheticSpec(reports_per_class=0))


def test_synthetic_classes_separable():
    spec = SyntheticSpec(
        n_families=1, reports_per_class=40, marker_rate=0.05, report_len=150, seed=5
    )
    corpus = generate_synthetic(spec)
    from bowtriage.pipeline import vectorize_corpus

    vcfg = VectorizerConfig(method="hashing", n=1, dim=2**10)
    vc = vectorize_corpus(corpus, vcfg)
    data = list(zip(vc.vectors, (int(v) for v in vc.detect_labels)))
    rng = np.random.default_rng(0)
    order = rng.permutation(len(data))
    train_xy = [data[i] for i in order[:60]]
    test_xy = [data[i] for i in order[60:]]
    model = train("cart", None, train_xy, seed=0)
    preds = np.where(model.score_many([x for x, _ in test_xy]) >= 0.5, 1, -1)
    truth = np.array([y for _, y in test_xy])
    from bowtriage.tuning import f1_score

    assert f1_score(preds, truth) >= 0.95


# -- experiment harness -------------------------------------------------------


@pytest.fixture(scope="module")
def small_cfg():
    # easy regime: strong markers so even single trees and knn separate
    spec = SyntheticSpec(
        n_families=2,
        reports_per_class=40,
        shared_vocab_size=100,
        markers_per_class=3,
        marker_rate=0.25,
        noise_rate=0.02,
        report_len=120,
        seed=21,
    )
    return ExperimentConfig(
        corpus=generate_synthetic(spec),
        dataset_name="synth-small",
        vectorizers=(
            VectorizerConfig(method="hashing", n=1, dim=2**10),
            VectorizerConfig(method="tfidf", n=1),
        ),
        kinds=("cart", "knn"),
        split=SplitSpec(seed=21),
        top_m=3,
    )


def test_experiment_row_count_and_order(small_cfg):
    result = run_experiment(small_cfg)
    assert len(result.rows) == len(small_cfg.kinds) * len(small_cfg.vectorizers)
    assert [(r.kind, r.vectorizer) for r in result.rows] == [
        ("cart", "hashing"),
        ("cart", "tfidf"),
        ("knn", "hashing"),
        ("knn", "tfidf"),
    ]


def test_experiment_deterministic(small_cfg):
    a = run_experiment(small_cfg)
    b = run_experiment(small_cfg)
    assert a.to_tsv() == b.to_tsv()


def test_experiment_quality_and_dominance(small_cfg):
    result = run_experiment(small_cfg)
    for row in result.rows:
        assert row.tuned_valid_f1 >= row.base_valid_f1  # argmax dominance, exact
        assert row.attr_macro_f1 is not None
    cart_rows = [r for r in result.rows if r.kind == "cart"]
    assert all(r.ensemble_f1 >= 0.95 for r in cart_rows)


def test_experiment_table_formats(small_cfg):
    result = run_experiment(small_cfg)
    tsv = result.to_tsv()
    header_lines = [l for l in tsv.splitlines() if l.startswith("#")]
    assert any("base_definition" in l for l in header_lines)
    body = [l for l in tsv.splitlines() if not l.startswith("#")]
    assert body[0].split("\t")[0] == "model"
    assert len(body) == 1 + len(result.rows)
    text = result.to_text()
    assert "model" in text.splitlines()[len(header_lines)]


def test_experiment_needs_corpus_or_manifest():
    with pytest.raises(EvaluationError):
        ExperimentConfig().load_corpus()


def test_ensemble_at_least_median_member_on_valid(small_cfg):
    # benchmark expectation on the easy synthetic corpus, not a theorem
    vcfg = small_cfg.vectorizers[0]
    built, _ = run_builds(small_cfg.corpus, small_cfg.split, vcfg, ["cart", "knn"])
    from bowtriage.ensemble import ensemble_decide_many
    from bowtriage.tuning import f1_score

    for kind in ("cart", "knn"):
        ms = compose_model_set(built, vcfg, small_cfg.split.seed, kind=kind, top_m=3)
        valid_truth = built.valid_vc.detect_labels
        preds = ensemble_decide_many(ms.detection, built.valid_vc.vectors)
        ens_f1 = f1_score(preds, valid_truth)
        member_f1 = sorted(m.valid_f1 for m in ms.detection.members)
        median = member_f1[len(member_f1) // 2]
        assert ens_f1 >= median


# -- train-size sweep ---------------------------------------------------------


def test_train_size_sweep_points(small_cfg):
    points = train_size_sweep(small_cfg, [10, 30, 50])
    assert len(points) == 3 * len(small_cfg.kinds)
    for kind in small_cfg.kinds:
        kind_points = [p for p in points if p.kind == kind]
        assert [p.size for p in kind_points] == [10, 30, 50]
        full = kind_points[-1].f1
        small = kind_points[0].f1
        assert full >= small - 0.05  # learning-curve sanity
    tsv = curve_to_tsv(points)
    assert tsv.splitlines()[0] == "size\tkind\tf1"


def test_train_size_sweep_rejects_oversize(small_cfg):
    with pytest.raises(EvaluationError, match="exceeds"):
        train_size_sweep(small_cfg, [10_000])


# -- timing -------------------------------------------------------------------


@pytest.fixture(scope="module")
def tiny_model_set(small_cfg):
    vcfg = small_cfg.vectorizers[0]
    built, _ = run_builds(
        small_cfg.corpus, small_cfg.split, vcfg, ["cart"], threads=1
    )
    return compose_model_set(built, vcfg, 21, kind="cart", top_m=3)


def test_timing_requires_enough_reports(tiny_model_set, small_cfg):
    reports = [r.report for r in small_cfg.corpus.records[:5]]
    with pytest.raises(EvaluationError, match=">= 30"):
        time_model_set(tiny_model_set, reports)


def test_timing_rows(tiny_model_set, small_cfg):
    reports = [r.report for r in small_cfg.corpus.records[:40]]
    rows = timing_benchmark({"cart": tiny_model_set}, reports)
    assert len(rows) == 1
    row = rows[0]
    assert row.label == "cart" and row.n_reports == 40
    assert row.median_ms > 0 and row.p95_ms >= row.median_ms
    out = timing_to_tsv(rows)
    assert out.splitlines()[0] == "kind\tn_reports\tmedian_ms\tp95_ms"
