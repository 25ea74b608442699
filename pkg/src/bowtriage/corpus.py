"""Report corpora: loading, tokenization, stratified splits, per-family tasks.

A corpus is a list of labeled behavioral reports. Reports are treated as flat
text regardless of their original JSON/XML structure; the only parsing step is
tokenization into a word sequence. Case is preserved (API constants are
case-significant) and registry keys / file paths / dotted names survive as
single tokens under the default delimiter class.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

MALWARE = 1
BENIGN = -1

# Tokens keep word characters (letters, digits, underscore) plus '.', '/',
# '\' and '-'; every other character is a delimiter. Chosen so identifiers
# like HKEY_LOCAL_MACHINE\Software or /proc/992/cmdline stay single tokens.
_DEFAULT_DELIMS = re.compile(r"[^\w./\\-]+")


class CorpusError(Exception):
    """Raised for malformed manifests, bad strata, or unknown families."""


@dataclass(frozen=True)
class RawReport:
    """One behavioral report: opaque id, flat text, origin label."""

    id: str
    text: str
    source_tag: str = ""

    @classmethod
    def from_bytes(cls, id: str, raw: bytes, source_tag: str = "") -> "RawReport":
        """Decode as UTF-8 with lossy replacement, never raising."""
        return cls(id=id, text=raw.decode("utf-8", errors="replace"), source_tag=source_tag)


@dataclass(frozen=True)
class LabeledReport:
    """Report plus detection sign (+1 malware / -1 benign) and optional family.

    family must be None on benign records; it may be None on malware records
    whose family is unknown (such records serve detection only).
    """

    report: RawReport
    detect_label: int
    family: str | None = None

    def __post_init__(self):
        if self.detect_label not in (MALWARE, BENIGN):
            raise CorpusError(f"detect_label must be +1 or -1, got {self.detect_label}")
        if self.detect_label == BENIGN and self.family is not None:
            raise CorpusError(f"benign record {self.report.id!r} cannot carry a family")


class Corpus:
    """Immutable collection of labeled reports with a family index.

    Safe for concurrent readers; all derived corpora (splits, family tasks)
    are new Corpus objects sharing the underlying report records.
    """

    def __init__(self, records: list[LabeledReport]):
        if not records:
            raise CorpusError("corpus must contain at least one record")
        seen: set[str] = set()
        for rec in records:
            if rec.report.id in seen:
                raise CorpusError(f"duplicate report id {rec.report.id!r}")
            seen.add(rec.report.id)
        self._records = tuple(records)
        index: dict[str, list[str]] = {}
        for rec in records:
            if rec.family is not None:
                index.setdefault(rec.family, []).append(rec.report.id)
        self._family_index = {fam: tuple(ids) for fam, ids in index.items()}

    @property
    def records(self) -> tuple[LabeledReport, ...]:
        return self._records

    @property
    def family_index(self) -> dict[str, tuple[str, ...]]:
        return dict(self._family_index)

    @property
    def families(self) -> list[str]:
        return sorted(self._family_index)

    def __len__(self) -> int:
        return len(self._records)

    def __iter__(self):
        return iter(self._records)

    def subset(self, positions: list[int]) -> "Corpus":
        return Corpus([self._records[i] for i in positions])


@dataclass(frozen=True)
class SplitSpec:
    """Fractions and seed for the build/test and train/valid partitions."""

    build_fraction: float = 0.5
    train_fraction_of_build: float = 0.9
    seed: int = 0

    def __post_init__(self):
        for name in ("build_fraction", "train_fraction_of_build"):
            v = getattr(self, name)
            if not 0.0 < v < 1.0:
                raise CorpusError(f"{name} must lie in (0, 1), got {v}")


def tokenize(report: RawReport | str, delimiters: str | None = None) -> list[str]:
    """Split report text into its word sequence.

    Splits on any maximal run of delimiter characters. The default delimiter
    class is every character that is not a letter, digit, '.', '/', '\\',
    '_' or '-'. Total and deterministic; empty text yields an empty list.

    delimiters, when given, is the explicit set of delimiter characters to
    split on instead of the default class.
    """
    text = report.text if isinstance(report, RawReport) else report
    if delimiters is None:
        pattern = _DEFAULT_DELIMS
    else:
        if not delimiters:
            raise CorpusError("delimiter set must not be empty")
        pattern = re.compile("[" + re.escape(delimiters) + "]+")
    return [tok for tok in pattern.split(text) if tok]


def load_manifest(path: str | Path, eager: bool = True) -> Corpus:
    """Load a corpus from a tab-separated manifest.

    One record per line: ``id<TAB>label<TAB>family<TAB>report-path``, where
    label is ``malware`` or ``benign`` and family is a name or ``-``. Report
    paths are resolved relative to the manifest's directory. Lines starting
    with '#' and blank lines are ignored. Report bytes are decoded as UTF-8
    with lossy replacement.
    """
    path = Path(path)
    if not path.is_file():
        raise CorpusError(f"manifest not found: {path}")
    base = path.parent
    records: list[LabeledReport] = []
    seen: set[str] = set()
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        line = line.rstrip("\n")
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 4:
            raise CorpusError(f"{path}:{lineno}: expected 4 tab-separated fields, got {len(parts)}")
        rid, label, family, relpath = (p.strip() for p in parts)
        if not rid:
            raise CorpusError(f"{path}:{lineno}: empty report id")
        if rid in seen:
            raise CorpusError(f"{path}:{lineno}: duplicate report id {rid!r}")
        seen.add(rid)
        if label == "malware":
            sign = MALWARE
        elif label == "benign":
            sign = BENIGN
        else:
            raise CorpusError(f"{path}:{lineno}: label must be 'malware' or 'benign', got {label!r}")
        fam = None if family == "-" else family
        if sign == BENIGN and fam is not None:
            raise CorpusError(f"{path}:{lineno}: benign record {rid!r} cannot carry family {fam!r}")
        report_path = base / relpath
        if eager:
            if not report_path.is_file():
                raise CorpusError(f"{path}:{lineno}: report file not found: {report_path}")
            report = RawReport.from_bytes(rid, report_path.read_bytes(), source_tag=str(report_path))
        else:
            report = RawReport(id=rid, text="", source_tag=str(report_path))
        records.append(LabeledReport(report=report, detect_label=sign, family=fam))
    if not records:
        raise CorpusError(f"{path}: manifest contains no records")
    return Corpus(records)


def _stratum_key(rec: LabeledReport) -> str:
    if rec.detect_label == BENIGN:
        return "__benign__"
    return rec.family if rec.family is not None else "__malware__"


def _apportion(counts: dict[str, int], take_total: int) -> dict[str, int]:
    # Largest-remainder apportionment: per-stratum take is floor or ceil of
    # its exact quota, so proportions hold to within one record.
    total = sum(counts.values())
    quotas = {s: take_total * n / total for s, n in counts.items()}
    take = {s: int(np.floor(q)) for s, q in quotas.items()}
    leftover = take_total - sum(take.values())
    by_remainder = sorted(counts, key=lambda s: (-(quotas[s] - take[s]), s))
    for s in by_remainder[:leftover]:
        take[s] += 1
    return take


def _split_positions(
    positions_by_stratum: dict[str, list[int]], fraction: float, rng: np.random.Generator
) -> tuple[list[int], list[int]]:
    counts = {s: len(p) for s, p in positions_by_stratum.items()}
    total = sum(counts.values())
    take = _apportion(counts, int(round(fraction * total)))
    first: list[int] = []
    second: list[int] = []
    for s in sorted(positions_by_stratum):
        pos = np.asarray(positions_by_stratum[s])
        order = rng.permutation(len(pos))
        k = take[s]
        first.extend(pos[order[:k]].tolist())
        second.extend(pos[order[k:]].tolist())
    return sorted(first), sorted(second)


def stratified_split(corpus: Corpus, spec: SplitSpec) -> tuple[Corpus, Corpus, Corpus, Corpus]:
    """Partition into (build, test, train, valid), stratified and seeded.

    Strata are family names for malware (a shared pseudo-stratum for
    family-less malware) and one stratum for benign. build/test follow
    spec.build_fraction; train/valid partition build by
    spec.train_fraction_of_build. Per-stratum proportions hold to within one
    record. Deterministic for a given seed (PCG64 via numpy default_rng);
    record order within each split follows the source corpus.
    """
    by_stratum: dict[str, list[int]] = {}
    for i, rec in enumerate(corpus.records):
        by_stratum.setdefault(_stratum_key(rec), []).append(i)
    for s, positions in sorted(by_stratum.items()):
        if len(positions) < 2:
            raise CorpusError(f"stratum {s!r} has {len(positions)} record(s); need at least 2")

    rng = np.random.default_rng(np.random.SeedSequence([spec.seed, 1]))
    build_pos, test_pos = _split_positions(by_stratum, spec.build_fraction, rng)

    build_set = set(build_pos)
    build_by_stratum: dict[str, list[int]] = {}
    for s, positions in by_stratum.items():
        kept = [p for p in positions if p in build_set]
        if kept:
            build_by_stratum[s] = kept
    train_pos, valid_pos = _split_positions(build_by_stratum, spec.train_fraction_of_build, rng)

    return (
        corpus.subset(build_pos),
        corpus.subset(test_pos),
        corpus.subset(train_pos),
        corpus.subset(valid_pos),
    )


def make_family_task(corpus: Corpus, family: str) -> Corpus:
    """Relabel the corpus for one family-vs-rest task.

    Records of the named family become +1; every other record (other
    families and benign alike) becomes -1 with its family dropped.
    """
    if family not in corpus.family_index:
        raise CorpusError(f"unknown family {family!r}")
    relabeled = []
    for rec in corpus.records:
        if rec.family == family:
            relabeled.append(LabeledReport(rec.report, MALWARE, family))
        else:
            relabeled.append(LabeledReport(rec.report, BENIGN, None))
    return Corpus(relabeled)
