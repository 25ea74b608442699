"""Per-threat majority-vote ensembles and the two-stage prediction flow.

A threat model set holds one detection ensemble plus one ensemble per known
family. Prediction first asks the detection ensemble; a benign answer
returns immediately and never evaluates the family ensembles. Otherwise
every family ensemble votes independently: families whose weighted
positive-vote fraction clears the voting threshold vth are flagged, the
verdict carries all fractions sorted descending, and a positive detection
with nothing flagged is tagged an unknown threat. Family ensembles are
independent by construction: adding or removing one never changes another's
fraction.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from . import learners
from .corpus import RawReport, tokenize
from .features import SparseVector, TfidfModel, VectorizerConfig, vectorize
from .learners import TrainedClassifier
from .tuning import THRESHOLD_LATTICE


class EnsembleError(Exception):
    """Raised on malformed ensembles or calibration preconditions."""


@dataclass(frozen=True)
class EnsembleMember:
    model: TrainedClassifier
    threshold: float
    weight: float = 1.0
    valid_f1: float | None = None

    def __post_init__(self):
        if not 0.0 <= self.threshold <= 1.0:
            raise EnsembleError(f"member threshold must lie in [0, 1], got {self.threshold}")
        if not self.weight > 0:
            raise EnsembleError(f"member weight must be > 0, got {self.weight}")


@dataclass(frozen=True)
class Ensemble:
    """Weighted set of thresholded classifiers; equal weights by default."""

    members: tuple[EnsembleMember, ...]

    def __post_init__(self):
        if not self.members:
            raise EnsembleError("ensemble needs at least one member")

    @classmethod
    def of(cls, members: Sequence[EnsembleMember]) -> "Ensemble":
        return cls(tuple(members))


def _votes_many(e: Ensemble, vectors: Sequence[SparseVector]) -> np.ndarray:
    """Member votes in {-1, +1}, shape (n_members, n_vectors)."""
    votes = np.empty((len(e.members), len(vectors)), dtype=np.float64)
    for i, m in enumerate(e.members):
        votes[i] = np.where(m.model.score_many(vectors) >= m.threshold, 1.0, -1.0)
    return votes


def ensemble_decide_many(e: Ensemble, vectors: Sequence[SparseVector]) -> np.ndarray:
    """Sign of the weighted vote sum per vector; a zero sum decides +1."""
    w = np.array([m.weight for m in e.members])
    total = w @ _votes_many(e, vectors)
    return np.where(total >= 0.0, 1, -1).astype(np.int64)


def ensemble_decide(e: Ensemble, x: SparseVector) -> int:
    return int(ensemble_decide_many(e, [x])[0])


def vote_fraction_many(e: Ensemble, vectors: Sequence[SparseVector]) -> np.ndarray:
    """Weight share of positive voters per vector, in [0, 1]."""
    w = np.array([m.weight for m in e.members])
    votes = _votes_many(e, vectors)
    positive = w @ (votes > 0)
    return positive / w.sum()


def vote_fraction(e: Ensemble, x: SparseVector) -> float:
    return float(vote_fraction_many(e, [x])[0])


@dataclass(frozen=True)
class Verdict:
    """Prediction outcome for one report.

    families lists every known family with its vote fraction, descending
    (ties by name); it is empty exactly when detection is benign. flagged is
    the subset clearing vth. unknown marks a positive detection with nothing
    flagged.
    """

    detection: int
    families: tuple[tuple[str, float], ...] = ()
    flagged: tuple[tuple[str, float], ...] = ()
    unknown: bool = False

    @property
    def top_family(self) -> str | None:
        return self.flagged[0][0] if self.flagged else None

    def to_line(self, report_id: str) -> str:
        fams = ";".join(f"{name}:{frac:.6f}" for name, frac in self.families)
        return f"{report_id}\t{self.detection:+d}\t{int(self.unknown)}\t{fams}"


@dataclass(frozen=True)
class ThreatModelSet:
    """Calibrated ensembles for detection and every known family."""

    detection: Ensemble
    families: dict[str, Ensemble]
    vth: float
    vectorizer: VectorizerConfig
    tfidf_model: TfidfModel | None = None
    config_hash: str | None = None
    seed: int | None = None

    def with_vth(self, vth: float) -> "ThreatModelSet":
        return replace(self, vth=vth)

    def vectorize_report(self, report: RawReport | str) -> SparseVector:
        return vectorize(tokenize(report), self.vectorizer, self.tfidf_model)


def predict_vector(model_set: ThreatModelSet, x: SparseVector) -> Verdict:
    """Two-stage flow on an already-vectorized report.

    Benign detection short-circuits: family ensembles are not evaluated.
    """
    if ensemble_decide(model_set.detection, x) < 0:
        return Verdict(detection=-1)
    fracs = [(fam, vote_fraction(ens, x)) for fam, ens in model_set.families.items()]
    fracs.sort(key=lambda t: (-t[1], t[0]))
    flagged = tuple((f, v) for f, v in fracs if v >= model_set.vth)
    return Verdict(detection=1, families=tuple(fracs), flagged=flagged, unknown=not flagged)


def predict(model_set: ThreatModelSet, report: RawReport | str) -> Verdict:
    """Vectorize one report and run the two-stage prediction flow."""
    return predict_vector(model_set, model_set.vectorize_report(report))


def attribute(families_to_fracs: dict[str, float], vth: float) -> str | None:
    """Family with the highest fraction among those clearing vth, else None."""
    flagged = [(f, v) for f, v in families_to_fracs.items() if v >= vth]
    if not flagged:
        return None
    flagged.sort(key=lambda t: (-t[1], t[0]))
    return flagged[0][0]


def _macro_family_f1(
    predicted: list[str | None], truth: list[str | None], families: Sequence[str]
) -> float:
    total = 0.0
    for fam in families:
        tp = sum(1 for p, t in zip(predicted, truth) if p == fam and t == fam)
        fp = sum(1 for p, t in zip(predicted, truth) if p == fam and t != fam)
        fn = sum(1 for p, t in zip(predicted, truth) if p != fam and t == fam)
        denom = 2 * tp + fp + fn
        total += 2 * tp / denom if denom else 0.0
    return total / len(families)


def calibrate_vth(
    model_set: ThreatModelSet, valid: Sequence[tuple[SparseVector, str | None]]
) -> float:
    """Voting threshold maximizing macro family F1 on the validation records.

    Records attribute to the highest-fraction flagged family or to None
    (unknown), which counts against the true family. Sweeps the same 0.01
    lattice as decision thresholds; the smallest maximizer wins.
    """
    fam_names = sorted(model_set.families)
    if not fam_names:
        raise EnsembleError("model set has no family ensembles to calibrate")
    truth = [fam for _, fam in valid]
    for fam in fam_names:
        if fam not in truth:
            raise EnsembleError(f"family {fam!r} has no validation records")

    vectors = [x for x, _ in valid]
    fracs = {fam: vote_fraction_many(model_set.families[fam], vectors) for fam in fam_names}

    best_f1 = -1.0
    best_vth = 0.0
    for vth in THRESHOLD_LATTICE:
        predicted: list[str | None] = []
        for i in range(len(valid)):
            predicted.append(attribute({f: float(fracs[f][i]) for f in fam_names}, vth))
        f1 = _macro_family_f1(predicted, truth, fam_names)
        if f1 > best_f1:
            best_f1 = f1
            best_vth = vth
    return best_vth


# -- model directory ---------------------------------------------------------

_INDEX_HEADER = "threat\tkind\tthreshold\tweight\tvalid_f1\tparams\tfile"


def save_model_set(
    model_set: ThreatModelSet, directory: str | Path, extra_config: dict | None = None
) -> None:
    """Write models/, index.tsv and config.json under directory.

    Deterministic: rerunning an identical build produces byte-identical
    index and config files (model .npz archives carry zip timestamps and are
    compared by content, not bytes).
    """
    directory = Path(directory)
    (directory / "models").mkdir(parents=True, exist_ok=True)

    threats: list[tuple[str, Ensemble]] = [("detection", model_set.detection)]
    threats += [(f"family:{fam}", model_set.families[fam]) for fam in sorted(model_set.families)]

    lines = [_INDEX_HEADER]
    for t_idx, (threat, ens) in enumerate(threats):
        for m_idx, member in enumerate(ens.members):
            fname = f"models/t{t_idx:02d}_m{m_idx:02d}.npz"
            member.model.save(directory / fname)
            lines.append(
                "\t".join(
                    [
                        threat,
                        member.model.kind,
                        repr(member.threshold),
                        repr(member.weight),
                        "-" if member.valid_f1 is None else repr(member.valid_f1),
                        json.dumps(member.model.params, sort_keys=True),
                        fname,
                    ]
                )
            )
    (directory / "index.tsv").write_text("\n".join(lines) + "\n", encoding="utf-8")

    if model_set.tfidf_model is not None:
        model_set.tfidf_model.save(directory / "tfidf.model")

    config = {
        "format": "bowtriage-modeldir",
        "version": 1,
        "vectorizer": {
            "method": model_set.vectorizer.method,
            "n": model_set.vectorizer.n,
            "dim": model_set.vectorizer.dim,
            "hash_name": model_set.vectorizer.hash_name,
        },
        "config_hash": model_set.config_hash,
        "vth": model_set.vth,
        "seed": model_set.seed,
        "families": sorted(model_set.families),
    }
    if extra_config:
        config.update(extra_config)
    (directory / "config.json").write_text(
        json.dumps(config, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


def load_model_set(directory: str | Path) -> ThreatModelSet:
    directory = Path(directory)
    config = json.loads((directory / "config.json").read_text(encoding="utf-8"))
    if config.get("format") != "bowtriage-modeldir":
        raise EnsembleError(f"{directory}: not a model directory")
    vcfg = VectorizerConfig(**config["vectorizer"])
    tfidf_model = None
    if vcfg.method == "tfidf":
        tfidf_model = TfidfModel.load(directory / "tfidf.model")

    members_by_threat: dict[str, list[EnsembleMember]] = {}
    index_lines = (directory / "index.tsv").read_text(encoding="utf-8").splitlines()
    if not index_lines or index_lines[0] != _INDEX_HEADER:
        raise EnsembleError(f"{directory}: malformed index.tsv")
    for line in index_lines[1:]:
        threat, _kind, th, weight, valid_f1, _params, fname = line.split("\t")
        model = learners.load_model(directory / fname)
        if model.config_hash is not None and model.config_hash != config.get("config_hash"):
            raise EnsembleError(
                f"{fname}: model was trained under vectorizer config {model.config_hash}, "
                f"directory declares {config.get('config_hash')}"
            )
        members_by_threat.setdefault(threat, []).append(
            EnsembleMember(
                model=model,
                threshold=float(th),
                weight=float(weight),
                valid_f1=None if valid_f1 == "-" else float(valid_f1),
            )
        )

    if "detection" not in members_by_threat:
        raise EnsembleError(f"{directory}: index.tsv lacks a detection ensemble")
    families = {
        threat.split(":", 1)[1]: Ensemble.of(members)
        for threat, members in members_by_threat.items()
        if threat.startswith("family:")
    }
    return ThreatModelSet(
        detection=Ensemble.of(members_by_threat["detection"]),
        families=families,
        vth=float(config["vth"]),
        vectorizer=vcfg,
        tfidf_model=tfidf_model,
        config_hash=config.get("config_hash"),
        seed=config.get("seed"),
    )
