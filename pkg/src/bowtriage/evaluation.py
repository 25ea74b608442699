"""Metrics, the synthetic benchmark corpus, and the experiment harness.

The harness reproduces the comparison axes used throughout the toolkit's
output tables: base vs tuned vs per-kind ensemble F1 per (kind, vectorizer)
cell, detection FPR, macro attribution F1, a train-size sweep and a
per-report timing benchmark. The synthetic generator plants disjoint marker
n-grams per class so ground truth is separable by construction.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .corpus import BENIGN, MALWARE, Corpus, LabeledReport, RawReport, SplitSpec, stratified_split
from .ensemble import ThreatModelSet, attribute, ensemble_decide_many, predict, vote_fraction_many
from .features import VectorizerConfig
from .learners import KINDS, default_grid, train
from .pipeline import (
    VectorizedCorpus,
    compose_model_set,
    fit_tfidf_for,
    run_builds,
    threat_seed,
    vectorize_corpus,
)
from .tuning import BASE_DEFINITION, f1_score, sweep_thresholds


class EvaluationError(Exception):
    """Raised on inconsistent metric inputs or invalid experiment configs."""


# -- metrics -----------------------------------------------------------------


@dataclass(frozen=True)
class MetricsReport:
    precision: float
    recall: float
    f1: float
    fpr: float
    tp: int
    fp: int
    tn: int
    fn: int


def metrics(preds: Sequence[int], truth: Sequence[int]) -> MetricsReport:
    """Confusion-matrix metrics with +1 as the positive class.

    Degenerate conventions: precision/recall/F1 are 0 when their
    denominators vanish; FPR is 0 with no true negatives.
    """
    preds = np.asarray(preds, dtype=np.int64)
    truth = np.asarray(truth, dtype=np.int64)
    if preds.size != truth.size:
        raise EvaluationError(f"length mismatch: {preds.size} predictions, {truth.size} truths")
    if preds.size == 0:
        raise EvaluationError("metrics need at least one prediction")
    tp = int(np.sum((preds == 1) & (truth == 1)))
    fp = int(np.sum((preds == 1) & (truth == -1)))
    tn = int(np.sum((preds == -1) & (truth == -1)))
    fn = int(np.sum((preds == -1) & (truth == 1)))
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    fpr = fp / (fp + tn) if fp + tn else 0.0
    return MetricsReport(precision, recall, f1, fpr, tp, fp, tn, fn)


# -- synthetic corpus --------------------------------------------------------


@dataclass(frozen=True)
class SyntheticSpec:
    """Knobs for the marker-planted benchmark corpus.

    Each class (benign plus every family) owns markers_per_class disjoint
    marker n-grams of marker_len tokens; a marker is injected at each token
    position with probability marker_rate, a junk token with noise_rate,
    otherwise a shared-vocabulary word is drawn.
    """

    n_families: int = 3
    reports_per_class: int = 100
    shared_vocab_size: int = 200
    markers_per_class: int = 8
    marker_len: int = 2
    marker_rate: float = 0.02
    noise_rate: float = 0.05
    report_len: int = 250
    seed: int = 0
    family_names: tuple[str, ...] | None = None
    explicit_markers: dict[str, tuple[tuple[str, ...], ...]] | None = None

    def classes(self) -> list[str]:
        if self.family_names is not None:
            fams = list(self.family_names)
        else:
            fams = [f"fam{chr(ord('A') + i)}" for i in range(self.n_families)]
        return ["benign"] + fams


def _class_markers(spec: SyntheticSpec) -> dict[str, tuple[tuple[str, ...], ...]]:
    if spec.explicit_markers is not None:
        markers = spec.explicit_markers
    else:
        markers = {
            cls: tuple(
                tuple(f"mk_{cls}_{j}_{t}" for t in range(spec.marker_len))
                for j in range(spec.markers_per_class)
            )
            for cls in spec.classes()
        }
    seen: dict[tuple[str, ...], str] = {}
    for cls, mks in markers.items():
        for mk in mks:
            if mk in seen and seen[mk] != cls:
                raise EvaluationError(f"marker collision: {mk!r} in {seen[mk]!r} and {cls!r}")
            seen[mk] = cls
    return markers


def generate_synthetic(spec: SyntheticSpec) -> Corpus:
    """Deterministic labeled corpus with per-class marker n-grams planted."""
    if spec.marker_rate + spec.noise_rate > 1.0:
        raise EvaluationError("marker_rate + noise_rate must not exceed 1")
    if spec.reports_per_class < 1:
        raise EvaluationError("reports_per_class must be >= 1")
    markers = _class_markers(spec)
    vocab = [f"w{i:04d}" for i in range(spec.shared_vocab_size)]
    rng = np.random.default_rng(np.random.SeedSequence([spec.seed]))

    records: list[LabeledReport] = []
    for cls in spec.classes():
        class_markers = markers[cls]
        for r in range(spec.reports_per_class):
            tokens: list[str] = []
            while len(tokens) < spec.report_len:
                u = rng.random()
                if u < spec.marker_rate and class_markers:
                    tokens.extend(class_markers[int(rng.integers(0, len(class_markers)))])
                elif u < spec.marker_rate + spec.noise_rate:
                    tokens.append(f"z{rng.integers(0, 2**32):08x}")
                else:
                    tokens.append(vocab[int(rng.integers(0, len(vocab)))])
            report = RawReport(
                id=f"{cls}-{r:04d}", text=" ".join(tokens[: spec.report_len]), source_tag="synthetic"
            )
            if cls == "benign":
                records.append(LabeledReport(report, BENIGN))
            else:
                records.append(LabeledReport(report, MALWARE, cls))
    return Corpus(records)


# -- experiment harness ------------------------------------------------------


@dataclass(frozen=True)
class ExperimentConfig:
    corpus: Corpus | None = None
    manifest: str | Path | None = None
    dataset_name: str = "corpus"
    vectorizers: tuple[VectorizerConfig, ...] = (
        VectorizerConfig(method="hashing"),
        VectorizerConfig(method="tfidf"),
    )
    kinds: tuple[str, ...] = KINDS
    grids: dict | None = None
    split: SplitSpec = SplitSpec()
    top_m: int = 5
    threads: int = 1
    min_df: int = 1

    def load_corpus(self) -> Corpus:
        if self.corpus is not None:
            return self.corpus
        if self.manifest is None:
            raise EvaluationError("experiment config needs a corpus or a manifest path")
        from .corpus import load_manifest

        return load_manifest(self.manifest)


@dataclass(frozen=True)
class ExperimentRow:
    kind: str
    dataset: str
    vectorizer: str
    base_f1: float
    tuned_f1: float
    ensemble_f1: float
    fpr: float
    attr_macro_f1: float | None
    base_valid_f1: float
    tuned_valid_f1: float


@dataclass
class ExperimentResult:
    rows: list[ExperimentRow]
    header: dict = field(default_factory=dict)

    _COLUMNS = (
        "model",
        "dataset",
        "vectorizer",
        "base_f1",
        "tuned_f1",
        "ensemble_f1",
        "fpr",
        "attr_macro_f1",
    )

    def _cells(self, row: ExperimentRow) -> list[str]:
        attr = "-" if row.attr_macro_f1 is None else f"{row.attr_macro_f1:.4f}"
        return [
            row.kind,
            row.dataset,
            row.vectorizer,
            f"{row.base_f1:.4f}",
            f"{row.tuned_f1:.4f}",
            f"{row.ensemble_f1:.4f}",
            f"{row.fpr:.4f}",
            attr,
        ]

    def header_lines(self) -> list[str]:
        return [f"# {k} = {self.header[k]}" for k in sorted(self.header)]

    def to_tsv(self) -> str:
        lines = self.header_lines()
        lines.append("\t".join(self._COLUMNS))
        lines += ["\t".join(self._cells(r)) for r in self.rows]
        return "\n".join(lines) + "\n"

    def to_text(self) -> str:
        table = [list(self._COLUMNS)] + [self._cells(r) for r in self.rows]
        widths = [max(len(row[i]) for row in table) for i in range(len(self._COLUMNS))]
        lines = self.header_lines()
        for row in table:
            lines.append("  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip())
        return "\n".join(lines) + "\n"


def _attribution_macro_f1(
    model_set: ThreatModelSet, test_vc: VectorizedCorpus, family_names: list[str]
) -> float:
    """End-to-end attribution quality: detection gate, then flagged argmax."""
    det = ensemble_decide_many(model_set.detection, test_vc.vectors)
    fracs = {
        fam: vote_fraction_many(model_set.families[fam], test_vc.vectors)
        for fam in family_names
    }
    predicted: list[str | None] = []
    for i in range(len(test_vc.vectors)):
        if det[i] < 0:
            predicted.append(None)
        else:
            predicted.append(
                attribute({f: float(fracs[f][i]) for f in family_names}, model_set.vth)
            )
    total = 0.0
    truth = test_vc.families
    for fam in family_names:
        tp = sum(1 for p, t in zip(predicted, truth) if p == fam and t == fam)
        fp = sum(1 for p, t in zip(predicted, truth) if p == fam and t != fam)
        fn = sum(1 for p, t in zip(predicted, truth) if p != fam and t == fam)
        denom = 2 * tp + fp + fn
        total += 2 * tp / denom if denom else 0.0
    return total / len(family_names)


def run_experiment(cfg: ExperimentConfig) -> ExperimentResult:
    """Full comparison run; one row per (kind, vectorizer) cell.

    Pure function of (config, seed): rerunning an identical config yields an
    identical table.
    """
    corpus = cfg.load_corpus()
    rows: list[ExperimentRow] = []
    n_empty = 0
    for vcfg in cfg.vectorizers:
        built, test_vc = run_builds(
            corpus,
            cfg.split,
            vcfg,
            list(cfg.kinds),
            grids=cfg.grids,
            threads=cfg.threads,
            min_df=cfg.min_df,
        )
        n_empty = built.train_vc.n_empty + built.valid_vc.n_empty + test_vc.n_empty
        test_truth = test_vc.detect_labels
        det_build = built.builds.detection
        for kind in cfg.kinds:
            base_scores = det_build.cells[kind][0].model.score_many(test_vc.vectors)
            base_f1 = f1_score(np.where(base_scores >= 0.5, 1, -1), test_truth)
            opt = det_build.opt_for(kind)
            tuned_scores = det_build.best_model[kind].score_many(test_vc.vectors)
            tuned_f1 = f1_score(np.where(tuned_scores >= opt.threshold, 1, -1), test_truth)

            model_set = compose_model_set(built, vcfg, cfg.split.seed, kind=kind, top_m=cfg.top_m)
            ens_preds = ensemble_decide_many(model_set.detection, test_vc.vectors)
            ens = metrics(ens_preds, test_truth)
            attr = (
                _attribution_macro_f1(model_set, test_vc, built.family_names)
                if built.family_names
                else None
            )
            rows.append(
                ExperimentRow(
                    kind=kind,
                    dataset=cfg.dataset_name,
                    vectorizer=vcfg.label,
                    base_f1=base_f1,
                    tuned_f1=tuned_f1,
                    ensemble_f1=ens.f1,
                    fpr=ens.fpr,
                    attr_macro_f1=attr,
                    base_valid_f1=det_build.base_f1[kind],
                    tuned_valid_f1=opt.valid_f1,
                )
            )
    order = {k: i for i, k in enumerate(cfg.kinds)}
    vorder = {v.label: i for i, v in enumerate(cfg.vectorizers)}
    rows.sort(key=lambda r: (order[r.kind], vorder[r.vectorizer]))
    # reported, not asserted: how often the ensemble kept up with its best member
    ens_ge_tuned = sum(1 for r in rows if r.ensemble_f1 >= r.tuned_f1)
    header = {
        "ensemble_ge_tuned_cells": f"{ens_ge_tuned}/{len(rows)}",
        "dataset": cfg.dataset_name,
        "seed": cfg.split.seed,
        "split": f"build={cfg.split.build_fraction} train_of_build={cfg.split.train_fraction_of_build}",
        "kinds": ",".join(cfg.kinds),
        "vectorizers": ",".join(v.label for v in cfg.vectorizers),
        "base_definition": BASE_DEFINITION,
        "empty_reports": n_empty,
        "top_m": cfg.top_m,
    }
    return ExperimentResult(rows=rows, header=header)


# -- train-size sweep --------------------------------------------------------


@dataclass(frozen=True)
class CurvePoint:
    size: int
    kind: str
    f1: float


def _stratified_prefix(vc: VectorizedCorpus, size: int, seed: int) -> list[int]:
    """Deterministic stratified subset of the given size, by detection stratum."""
    by_stratum: dict[str, list[int]] = {}
    for i, (label, fam) in enumerate(zip(vc.detect_labels, vc.families)):
        key = fam if fam is not None else ("malware" if label == 1 else "benign")
        by_stratum.setdefault(key, []).append(i)
    counts = {s: len(p) for s, p in by_stratum.items()}
    total = sum(counts.values())
    quotas = {s: size * n / total for s, n in counts.items()}
    take = {s: int(np.floor(q)) for s, q in quotas.items()}
    leftover = size - sum(take.values())
    for s in sorted(counts, key=lambda s: (-(quotas[s] - take[s]), s))[:leftover]:
        take[s] += 1
    rng = np.random.default_rng(np.random.SeedSequence([seed, 13]))
    picked: list[int] = []
    for s in sorted(by_stratum):
        pos = np.asarray(by_stratum[s])
        order = rng.permutation(len(pos))
        picked.extend(pos[order[: take[s]]].tolist())
    return sorted(picked)


def train_size_sweep(cfg: ExperimentConfig, sizes: Sequence[int]) -> list[CurvePoint]:
    """Test F1 per kind after retraining on stratified train prefixes.

    Each point trains the kind's base configuration on a subset of the train
    split, tunes only the decision threshold on valid, and scores test.
    Uses the first configured vectorizer.
    """
    corpus = cfg.load_corpus()
    vcfg = cfg.vectorizers[0]
    build_c, test_c, train_c, valid_c = stratified_split(corpus, cfg.split)
    tfidf_model = fit_tfidf_for(build_c, vcfg, min_df=cfg.min_df)
    train_vc = vectorize_corpus(train_c, vcfg, tfidf_model)
    valid_vc = vectorize_corpus(valid_c, vcfg, tfidf_model)
    test_vc = vectorize_corpus(test_c, vcfg, tfidf_model)
    n_train = len(train_vc.vectors)
    for size in sizes:
        if size > n_train:
            raise EvaluationError(f"sweep size {size} exceeds train set ({n_train})")
        if size < 2:
            raise EvaluationError(f"sweep size {size} is too small to hold both classes")

    valid_truth = valid_vc.detect_labels
    test_truth = test_vc.detect_labels
    points: list[CurvePoint] = []
    for size in sizes:
        picked = _stratified_prefix(train_vc, size, cfg.split.seed)
        sub = [(train_vc.vectors[i], int(train_vc.detect_labels[i])) for i in picked]
        for kind_idx, kind in enumerate(cfg.kinds):
            grid = (cfg.grids or {}).get(kind)
            params = (grid or default_grid(kind))[0]
            model = train(kind, params, sub, seed=threat_seed(cfg.split.seed, kind_idx))
            _, th = sweep_thresholds(model.score_many(valid_vc.vectors), valid_truth)
            preds = np.where(model.score_many(test_vc.vectors) >= th, 1, -1)
            points.append(CurvePoint(size=size, kind=kind, f1=f1_score(preds, test_truth)))
    return points


def curve_to_tsv(points: Sequence[CurvePoint]) -> str:
    lines = ["size\tkind\tf1"]
    lines += [f"{p.size}\t{p.kind}\t{p.f1:.4f}" for p in points]
    return "\n".join(lines) + "\n"


# -- per-report timing -------------------------------------------------------


@dataclass(frozen=True)
class TimingRow:
    label: str
    n_reports: int
    median_ms: float
    p95_ms: float


def time_model_set(
    model_set: ThreatModelSet, reports: Sequence[RawReport], min_reports: int = 30
) -> tuple[float, float]:
    """Median and p95 wall-clock ms for tokenize+vectorize+predict, one unit."""
    if len(reports) < min_reports:
        raise EvaluationError(f"timing needs >= {min_reports} reports, got {len(reports)}")
    samples = np.empty(len(reports))
    for i, report in enumerate(reports):
        t0 = time.perf_counter()
        predict(model_set, report)
        samples[i] = (time.perf_counter() - t0) * 1e3
    return float(np.median(samples)), float(np.percentile(samples, 95))


def timing_benchmark(
    model_sets: dict[str, ThreatModelSet], reports: Sequence[RawReport], min_reports: int = 30
) -> list[TimingRow]:
    """Per-kind prediction timing. Runs on the calling thread only; model
    load and manifest parsing are outside the measured region."""
    rows = []
    for label in sorted(model_sets):
        med, p95 = time_model_set(model_sets[label], reports, min_reports)
        rows.append(TimingRow(label=label, n_reports=len(reports), median_ms=med, p95_ms=p95))
    return rows


def timing_to_tsv(rows: Sequence[TimingRow]) -> str:
    lines = ["kind\tn_reports\tmedian_ms\tp95_ms"]
    lines += [f"{r.label}\t{r.n_reports}\t{r.median_ms:.3f}\t{r.p95_ms:.3f}" for r in rows]
    return "\n".join(lines) + "\n"
