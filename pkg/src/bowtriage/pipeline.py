"""End-to-end build pipeline: split, vectorize, tune per threat, compose.

The deployable model set carries one ensemble per threat whose members are
the tuned winners of each explored classifier kind (equal weights). The
experiment harness instead builds per-kind model sets whose ensembles take
the top grid cells of a single kind; both composition styles share the
machinery here.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .corpus import Corpus, SplitSpec, stratified_split, tokenize
from .ensemble import (
    Ensemble,
    EnsembleMember,
    ThreatModelSet,
    calibrate_vth,
)
from .features import SparseVector, TfidfModel, VectorizerConfig, tfidf_fit, vectorize
from .tuning import BuildResult, build_models


@dataclass
class VectorizedCorpus:
    """One split, vectorized: parallel ids / vectors / labels / families."""

    ids: list[str]
    vectors: list[SparseVector]
    detect_labels: np.ndarray
    families: list[str | None]
    n_empty: int

    def detection_xy(self) -> list[tuple[SparseVector, int]]:
        return list(zip(self.vectors, (int(s) for s in self.detect_labels)))

    def family_xy(self, family: str) -> list[tuple[SparseVector, int]]:
        return [
            (x, 1 if fam == family else -1) for x, fam in zip(self.vectors, self.families)
        ]

    def family_pairs(self) -> list[tuple[SparseVector, str | None]]:
        return list(zip(self.vectors, self.families))


def vectorize_corpus(
    corpus: Corpus, cfg: VectorizerConfig, tfidf_model: TfidfModel | None = None
) -> VectorizedCorpus:
    ids, vectors, labels, families = [], [], [], []
    n_empty = 0
    for rec in corpus.records:
        tokens = tokenize(rec.report)
        if not tokens:
            n_empty += 1  # empty reports vectorize to the zero vector; surfaced in outputs
        ids.append(rec.report.id)
        vectors.append(vectorize(tokens, cfg, tfidf_model))
        labels.append(rec.detect_label)
        families.append(rec.family)
    return VectorizedCorpus(ids, vectors, np.array(labels, dtype=np.int64), families, n_empty)


def fit_tfidf_for(corpus: Corpus, cfg: VectorizerConfig, min_df: int = 1) -> TfidfModel | None:
    """Fit the TFIDF vocabulary on the given (build) corpus when needed."""
    if cfg.method != "tfidf":
        return None
    return tfidf_fit((tokenize(rec.report) for rec in corpus.records), cfg.n, min_df=min_df)


def threat_seed(seed: int, threat_idx: int) -> int:
    ss = np.random.SeedSequence([seed, 7, threat_idx])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


@dataclass
class ThreatBuilds:
    """BuildResult per threat: detection plus one per family, same kinds."""

    detection: BuildResult
    families: dict[str, BuildResult]


def build_all_threats(
    train_vc: VectorizedCorpus,
    valid_vc: VectorizedCorpus,
    family_names: list[str],
    kinds: list[str],
    grids: dict[str, list[dict]] | None,
    seed: int,
    threads: int,
    config_hash: str | None,
) -> ThreatBuilds:
    detection = build_models(
        train_vc.detection_xy(),
        valid_vc.detection_xy(),
        kinds,
        grids=grids,
        seed=threat_seed(seed, 0),
        threads=threads,
        config_hash=config_hash,
    )
    families: dict[str, BuildResult] = {}
    for t_idx, fam in enumerate(sorted(family_names), start=1):
        families[fam] = build_models(
            train_vc.family_xy(fam),
            valid_vc.family_xy(fam),
            kinds,
            grids=grids,
            seed=threat_seed(seed, t_idx),
            threads=threads,
            config_hash=config_hash,
        )
    return ThreatBuilds(detection=detection, families=families)


def winners_ensemble(build: BuildResult) -> Ensemble:
    """One member per explored kind: its tuned winner at its tuned threshold."""
    return Ensemble.of(
        [
            EnsembleMember(
                model=build.best_model[t.kind],
                threshold=t.threshold,
                valid_f1=t.valid_f1,
            )
            for t in build.opt
        ]
    )


def top_cells_ensemble(build: BuildResult, kind: str, top_m: int) -> Ensemble:
    """Top grid cells of one kind by validation F1, each at its own threshold."""
    return Ensemble.of(
        [
            EnsembleMember(model=c.model, threshold=c.threshold, valid_f1=c.valid_f1)
            for c in build.top_cells(kind, top_m)
        ]
    )


@dataclass
class BuiltPipeline:
    """Everything a build run produces, before choosing an ensemble style."""

    builds: ThreatBuilds
    train_vc: VectorizedCorpus
    valid_vc: VectorizedCorpus
    tfidf_model: TfidfModel | None
    config_hash: str
    family_names: list[str]


def run_builds(
    corpus: Corpus,
    split: SplitSpec,
    cfg: VectorizerConfig,
    kinds: list[str],
    grids: dict[str, list[dict]] | None = None,
    threads: int = 1,
    min_df: int = 1,
) -> tuple[BuiltPipeline, VectorizedCorpus]:
    """Split, vectorize and grid-build every threat; returns the test split too."""
    build_c, test_c, train_c, valid_c = stratified_split(corpus, split)
    tfidf_model = fit_tfidf_for(build_c, cfg, min_df=min_df)
    config_hash = cfg.config_hash(tfidf_model)
    train_vc = vectorize_corpus(train_c, cfg, tfidf_model)
    valid_vc = vectorize_corpus(valid_c, cfg, tfidf_model)
    test_vc = vectorize_corpus(test_c, cfg, tfidf_model)
    family_names = sorted(build_c.family_index)
    builds = build_all_threats(
        train_vc, valid_vc, family_names, list(kinds), grids, split.seed, threads, config_hash
    )
    return (
        BuiltPipeline(builds, train_vc, valid_vc, tfidf_model, config_hash, family_names),
        test_vc,
    )


def compose_model_set(
    built: BuiltPipeline,
    cfg: VectorizerConfig,
    seed: int,
    kind: str | None = None,
    top_m: int = 5,
) -> ThreatModelSet:
    """Compose and calibrate a threat model set from finished builds.

    kind=None composes the deployable cross-kind set (one member per kind);
    a specific kind composes that kind's top-cells ensembles.
    """
    if kind is None:
        detection = winners_ensemble(built.builds.detection)
        families = {f: winners_ensemble(b) for f, b in built.builds.families.items()}
    else:
        detection = top_cells_ensemble(built.builds.detection, kind, top_m)
        families = {
            f: top_cells_ensemble(b, kind, top_m) for f, b in built.builds.families.items()
        }
    model_set = ThreatModelSet(
        detection=detection,
        families=families,
        vth=0.5,
        vectorizer=cfg,
        tfidf_model=built.tfidf_model,
        config_hash=built.config_hash,
        seed=seed,
    )
    if families:
        model_set = model_set.with_vth(calibrate_vth(model_set, built.valid_vc.family_pairs()))
    return model_set
