"""Grid search with joint decision-threshold selection.

For each classifier kind, every grid cell is trained on the train split and
validated on the valid split; validation sweeps the decision threshold over
the lattice {0.00, 0.01, ..., 1.00} and keeps the smallest threshold
attaining the best F1. The strictly-best cell wins (first seen wins ties).
Grid cell 0 at threshold 0.5 is the "base" configuration reported for
base-vs-tuned comparisons.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from . import learners
from .features import SparseVector
from .learners import TrainedClassifier

THRESHOLD_LATTICE = [i / 100 for i in range(101)]

BASE_DEFINITION = "base = grid cell 0 at threshold 0.5"


class TuningError(Exception):
    """Raised on degenerate validation sets or empty grids."""


def f1_score(preds: np.ndarray, truth: np.ndarray) -> float:
    """F1 of the positive class; 0.0 when precision + recall is 0."""
    tp = int(np.sum((preds == 1) & (truth == 1)))
    fp = int(np.sum((preds == 1) & (truth == -1)))
    fn = int(np.sum((preds == -1) & (truth == 1)))
    denom = 2 * tp + fp + fn
    return 2 * tp / denom if denom else 0.0


def sweep_thresholds(scores: np.ndarray, truth: np.ndarray) -> tuple[float, float]:
    """Best (f1, threshold) over the lattice; smallest threshold wins ties."""
    best_f1 = -1.0
    best_th = 0.0
    for th in THRESHOLD_LATTICE:
        preds = np.where(scores >= th, 1, -1)
        f1 = f1_score(preds, truth)
        if f1 > best_f1:
            best_f1 = f1
            best_th = th
    return best_f1, best_th


def validate(
    c: TrainedClassifier, valid: Sequence[tuple[SparseVector, int]]
) -> tuple[float, float]:
    """Max validation F1 over the threshold lattice and the threshold attaining it."""
    if not valid:
        raise TuningError("validation set is empty")
    truth = np.array([y for _, y in valid], dtype=np.int64)
    if not (truth == 1).any():
        raise TuningError("validation set has no positives; F1 is undefined")
    scores = c.score_many([x for x, _ in valid])
    return sweep_thresholds(scores, truth)


@dataclass(frozen=True)
class OptTuple:
    """One tuned model descriptor: kind, decision threshold, hyper-parameters."""

    kind: str
    threshold: float
    params: dict
    valid_f1: float


@dataclass
class CellResult:
    """Validation outcome of a single grid cell."""

    params: dict
    model: TrainedClassifier
    threshold: float
    valid_f1: float


@dataclass
class BuildResult:
    """Per-kind grid outcomes plus the selected optimum tuples."""

    opt: list[OptTuple]
    best_model: dict[str, TrainedClassifier]
    cells: dict[str, list[CellResult]]
    base_f1: dict[str, float]

    def opt_for(self, kind: str) -> OptTuple:
        for t in self.opt:
            if t.kind == kind:
                return t
        raise TuningError(f"kind {kind!r} was not explored")

    def top_cells(self, kind: str, m: int) -> list[CellResult]:
        """Best m cells by validation F1; stable on ties (grid order)."""
        ranked = sorted(
            range(len(self.cells[kind])), key=lambda i: (-self.cells[kind][i].valid_f1, i)
        )
        return [self.cells[kind][i] for i in ranked[:m]]

    def save(self, directory: str | Path) -> None:
        """One model file per optimum tuple plus a deterministic index file."""
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        lines = ["kind\tthreshold\tvalid_f1\tparams\tfile"]
        for t in self.opt:
            fname = f"{t.kind}.npz"
            self.best_model[t.kind].save(directory / fname)
            lines.append(
                f"{t.kind}\t{t.threshold!r}\t{t.valid_f1!r}\t"
                f"{json.dumps(t.params, sort_keys=True)}\t{fname}"
            )
        (directory / "index.tsv").write_text("\n".join(lines) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, directory: str | Path) -> "BuildResult":
        directory = Path(directory)
        opt: list[OptTuple] = []
        best: dict[str, TrainedClassifier] = {}
        for line in (directory / "index.tsv").read_text(encoding="utf-8").splitlines()[1:]:
            kind, th, f1, params, fname = line.split("\t")
            opt.append(OptTuple(kind, float(th), json.loads(params), float(f1)))
            best[kind] = learners.load_model(directory / fname)
        return cls(opt=opt, best_model=best, cells={}, base_f1={})


def _cell_seed(seed: int, kind_idx: int, cell_idx: int) -> int:
    ss = np.random.SeedSequence([seed, kind_idx, cell_idx])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def build_models(
    train: Sequence[tuple[SparseVector, int]],
    valid: Sequence[tuple[SparseVector, int]],
    kinds: Sequence[str],
    grids: dict[str, list[dict]] | None = None,
    seed: int = 0,
    threads: int = 1,
    config_hash: str | None = None,
) -> BuildResult:
    """Train every grid cell per kind, validate, keep the strictly-best cell.

    Deterministic given seed: each cell trains under its own derived seed,
    so the outcome is independent of thread count and execution order.
    """
    if not train:
        raise TuningError("train set is empty")
    grids = grids or {}
    plans: list[tuple[int, str, int, dict]] = []
    for kind_idx, kind in enumerate(kinds):
        grid = grids.get(kind, learners.default_grid(kind))
        if not grid:
            raise TuningError(f"empty grid for kind {kind!r}")
        for cell_idx, params in enumerate(grid):
            plans.append((kind_idx, kind, cell_idx, params))

    def run_cell(plan: tuple[int, str, int, dict]) -> CellResult:
        kind_idx, kind, cell_idx, params = plan
        model = learners.train(
            kind, params, train, seed=_cell_seed(seed, kind_idx, cell_idx), config_hash=config_hash
        )
        f1, th = validate(model, valid)
        return CellResult(params=params, model=model, threshold=th, valid_f1=f1)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run_cell, plans))
    else:
        results = [run_cell(p) for p in plans]

    cells: dict[str, list[CellResult]] = {kind: [] for kind in kinds}
    for plan, res in zip(plans, results):
        cells[plan[1]].append(res)

    opt: list[OptTuple] = []
    best_model: dict[str, TrainedClassifier] = {}
    base_f1: dict[str, float] = {}
    truth = np.array([y for _, y in valid], dtype=np.int64)
    for kind in kinds:
        best = None
        best_score = -np.inf
        for cell in cells[kind]:
            if cell.valid_f1 > best_score:  # strict: first cell wins ties
                best_score = cell.valid_f1
                best = cell
        assert best is not None
        opt.append(OptTuple(kind, best.threshold, best.params, best.valid_f1))
        best_model[kind] = best.model
        base_scores = cells[kind][0].model.score_many([x for x, _ in valid])
        base_f1[kind] = f1_score(np.where(base_scores >= 0.5, 1, -1), truth)
    return BuildResult(opt=opt, best_model=best_model, cells=cells, base_f1=base_f1)
