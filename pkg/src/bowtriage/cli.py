"""Command-line entry point: build, predict, evaluate, benchmark, synth.

Every subcommand is reproducible from its flags plus seed; the full flag set
is echoed into every output header. Outputs are written only under --out;
inputs are never mutated. Errors carry a stage tag and exit nonzero.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from .corpus import Corpus, CorpusError, RawReport, SplitSpec, load_manifest
from .ensemble import load_model_set, predict, save_model_set
from .evaluation import (
    ExperimentConfig,
    SyntheticSpec,
    curve_to_tsv,
    generate_synthetic,
    run_experiment,
    time_model_set,
    timing_to_tsv,
    train_size_sweep,
    TimingRow,
)
from .features import VectorizerConfig
from .learners import KINDS
from .pipeline import compose_model_set, run_builds
from .tuning import BASE_DEFINITION


class CliError(Exception):
    """User-facing failure; message carries the pipeline stage."""

    def __init__(self, stage: str, message: str):
        super().__init__(f"[{stage}] {message}")


def _flag_echo(args: argparse.Namespace) -> str:
    # --out is omitted: it is implied by where the output lives, and keeping
    # it out lets identical runs into different directories stay byte-identical
    skip = {"func", "command", "out"}
    parts = []
    for key in sorted(vars(args)):
        if key in skip:
            continue
        parts.append(f"--{key.replace('_', '-')}={getattr(args, key)}")
    return " ".join(parts)


def _parse_kinds(raw: str) -> list[str]:
    kinds = [k.strip() for k in raw.split(",") if k.strip()]
    for k in kinds:
        if k not in KINDS:
            raise CliError("args", f"unknown classifier kind {k!r}; choose from {', '.join(KINDS)}")
    if not kinds:
        raise CliError("args", "at least one classifier kind is required")
    return kinds


def _vectorizer_config(args: argparse.Namespace, method: str) -> VectorizerConfig:
    return VectorizerConfig(method=method, n=args.ngram, dim=args.hash_dim)


def _load_corpus(manifest: str) -> Corpus:
    try:
        return load_manifest(manifest)
    except CorpusError as exc:
        raise CliError("ingest", str(exc)) from exc


def _require_families(corpus: Corpus) -> None:
    for rec in corpus.records:
        if rec.detect_label == 1 and rec.family is None:
            raise CliError(
                "ingest",
                f"malware record {rec.report.id!r} has no family; "
                "building attribution models requires a family per malware record",
            )


def cmd_build(args: argparse.Namespace) -> int:
    corpus = _load_corpus(args.manifest)
    _require_families(corpus)
    vcfg = _vectorizer_config(args, args.vectorizer)
    split = SplitSpec(seed=args.seed)
    kinds = _parse_kinds(args.kinds)
    try:
        built, _ = run_builds(
            corpus, split, vcfg, kinds, threads=args.threads, min_df=args.min_df
        )
        model_set = compose_model_set(built, vcfg, args.seed)
    except Exception as exc:
        raise CliError("build", str(exc)) from exc
    if args.vth is not None:
        model_set = model_set.with_vth(args.vth)

    out = Path(args.out)
    try:
        save_model_set(model_set, out, extra_config={"flags": _flag_echo(args)})
        _write_build_summary(out / "build_summary.txt", built, model_set, args)
    except OSError as exc:
        raise CliError("write", str(exc)) from exc
    print(f"model directory written to {out}")
    return 0


def _write_build_summary(path: Path, built, model_set, args) -> None:
    lines = [
        f"# flags = {_flag_echo(args)}",
        f"# {BASE_DEFINITION}",
        f"# config_hash = {model_set.config_hash}",
        f"# vth = {model_set.vth!r}",
        "threat\tkind\tbase_valid_f1\ttuned_valid_f1\tthreshold",
    ]
    threats = [("detection", built.builds.detection)]
    threats += [(f"family:{f}", built.builds.families[f]) for f in sorted(built.builds.families)]
    for threat, build in threats:
        for t in build.opt:
            lines.append(
                f"{threat}\t{t.kind}\t{build.base_f1[t.kind]!r}\t{t.valid_f1!r}\t{t.threshold!r}"
            )
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def cmd_predict(args: argparse.Namespace) -> int:
    try:
        model_set = load_model_set(args.model_dir)
    except Exception as exc:
        raise CliError("load", str(exc)) from exc

    if args.ngram is not None or args.hash_dim is not None or args.vectorizer is not None:
        flags_cfg = VectorizerConfig(
            method=args.vectorizer or model_set.vectorizer.method,
            n=args.ngram if args.ngram is not None else model_set.vectorizer.n,
            dim=args.hash_dim if args.hash_dim is not None else model_set.vectorizer.dim,
        )
        flags_hash = flags_cfg.config_hash(model_set.tfidf_model)
        if flags_hash != model_set.config_hash:
            raise CliError(
                "config",
                "vectorizer flags do not match the model directory: "
                f"flags hash {flags_hash}, model hash {model_set.config_hash}",
            )

    paths = [Path(p) for p in args.reports]
    if args.manifest:
        corpus = _load_corpus(args.manifest)
        reports = [rec.report for rec in corpus.records]
    else:
        reports = []
    for p in paths:
        if not p.is_file():
            raise CliError("read", f"report file not found: {p}")
        reports.append(RawReport.from_bytes(p.name, p.read_bytes(), source_tag=str(p)))
    if not reports:
        raise CliError("args", "no reports given; pass paths or --manifest")

    lines = [predict(model_set, r).to_line(r.id) for r in reports]
    body = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(body, encoding="utf-8")
    else:
        sys.stdout.write(body)
    return 0


def cmd_evaluate(args: argparse.Namespace) -> int:
    corpus = _load_corpus(args.manifest)
    methods = [m.strip() for m in args.vectorizer.split(",") if m.strip()]
    for m in methods:
        if m not in ("hashing", "tfidf"):
            raise CliError("args", f"unknown vectorizer {m!r}")
    cfg = ExperimentConfig(
        corpus=corpus,
        dataset_name=Path(args.manifest).stem,
        vectorizers=tuple(_vectorizer_config(args, m) for m in methods),
        kinds=tuple(_parse_kinds(args.kinds)),
        split=SplitSpec(seed=args.seed),
        top_m=args.top_m,
        threads=args.threads,
        min_df=args.min_df,
    )
    try:
        result = run_experiment(cfg)
    except Exception as exc:
        raise CliError("evaluate", str(exc)) from exc
    result.header["flags"] = _flag_echo(args)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "results.tsv").write_text(result.to_tsv(), encoding="utf-8")
    (out / "results.txt").write_text(result.to_text(), encoding="utf-8")
    if args.sizes:
        sizes = [int(s) for s in args.sizes.split(",")]
        try:
            points = train_size_sweep(cfg, sizes)
        except Exception as exc:
            raise CliError("sweep", str(exc)) from exc
        (out / "train_size_curve.tsv").write_text(
            f"# flags = {_flag_echo(args)}\n" + curve_to_tsv(points), encoding="utf-8"
        )
    sys.stdout.write(result.to_text())
    return 0


def cmd_benchmark(args: argparse.Namespace) -> int:
    corpus = _load_corpus(args.manifest)
    vcfg = _vectorizer_config(args, args.vectorizer)
    split = SplitSpec(seed=args.seed)
    kinds = _parse_kinds(args.kinds)
    try:
        built, test_vc = run_builds(
            corpus, split, vcfg, kinds, threads=args.threads, min_df=args.min_df
        )
    except Exception as exc:
        raise CliError("build", str(exc)) from exc

    id_to_report = {rec.report.id: rec.report for rec in corpus.records}
    reports = [id_to_report[rid] for rid in test_vc.ids[: args.reports]]
    rows = []
    for kind in kinds:
        model_set = compose_model_set(built, vcfg, args.seed, kind=kind, top_m=args.top_m)
        try:
            med, p95 = time_model_set(model_set, reports)
        except Exception as exc:
            raise CliError("benchmark", str(exc)) from exc
        rows.append(TimingRow(label=kind, n_reports=len(reports), median_ms=med, p95_ms=p95))

    body = f"# flags = {_flag_echo(args)}\n" + timing_to_tsv(rows)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "timing.tsv").write_text(body, encoding="utf-8")
    sys.stdout.write(body)
    return 0


def cmd_synth(args: argparse.Namespace) -> int:
    spec = SyntheticSpec(
        n_families=args.families,
        reports_per_class=args.reports_per_class,
        shared_vocab_size=args.vocab,
        markers_per_class=args.markers_per_class,
        marker_len=args.marker_len,
        marker_rate=args.marker_rate,
        noise_rate=args.noise_rate,
        report_len=args.report_len,
        seed=args.seed,
    )
    try:
        corpus = generate_synthetic(spec)
    except Exception as exc:
        raise CliError("synth", str(exc)) from exc
    out = Path(args.out)
    (out / "reports").mkdir(parents=True, exist_ok=True)
    lines = [f"# flags = {_flag_echo(args)}"]
    for rec in corpus.records:
        rel = f"reports/{rec.report.id}.txt"
        (out / rel).write_text(rec.report.text, encoding="utf-8")
        label = "malware" if rec.detect_label == 1 else "benign"
        family = rec.family if rec.family is not None else "-"
        lines.append(f"{rec.report.id}\t{label}\t{family}\t{rel}")
    (out / "manifest.tsv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    print(f"synthetic corpus written to {out} ({len(corpus)} reports)")
    return 0


def _add_vectorizer_flags(p: argparse.ArgumentParser, default_method: str | None = "hashing"):
    p.add_argument("--vectorizer", default=default_method, help="hashing or tfidf")
    p.add_argument("--ngram", type=int, default=2, help="n-gram window size")
    p.add_argument("--hash-dim", type=int, default=2**18, help="hashed vector length")
    p.add_argument("--min-df", type=int, default=1, help="tfidf document-frequency floor")


def _add_common_flags(p: argparse.ArgumentParser, default_threads: int | None = None):
    p.add_argument("--kinds", default=",".join(KINDS), help="comma-separated classifier kinds")
    p.add_argument("--seed", type=int, default=0, help="master seed")
    p.add_argument(
        "--threads",
        type=int,
        default=default_threads if default_threads is not None else os.cpu_count() or 1,
        help="parallel grid-cell training threads",
    )
    p.add_argument("--top-m", type=int, default=5, help="ensemble members per kind")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bowtriage",
        description="Bag-of-words triage of behavioral reports: detection and family attribution.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build", help="train, tune and persist a threat model set")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True, help="model directory to create")
    _add_vectorizer_flags(p)
    _add_common_flags(p)
    p.add_argument("--vth", type=float, default=None, help="override the calibrated voting threshold")
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("predict", help="emit one verdict line per report")
    p.add_argument("reports", nargs="*", help="report files")
    p.add_argument("--model-dir", required=True)
    p.add_argument("--manifest", default=None, help="score every report in a manifest")
    p.add_argument("--out", default=None, help="write verdict lines here instead of stdout")
    p.add_argument("--vectorizer", default=None, help="guard: must match the model directory")
    p.add_argument("--ngram", type=int, default=None, help="guard: must match the model directory")
    p.add_argument("--hash-dim", type=int, default=None, help="guard: must match the model directory")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("evaluate", help="base/tuned/ensemble comparison table")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    _add_vectorizer_flags(p, default_method="hashing,tfidf")
    _add_common_flags(p)
    p.add_argument("--sizes", default=None, help="comma-separated train-size sweep points")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("benchmark", help="per-report prediction timing per kind")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    _add_vectorizer_flags(p)
    _add_common_flags(p, default_threads=1)
    p.add_argument("--reports", type=int, default=100, help="test reports to time")
    p.set_defaults(func=cmd_benchmark)

    p = sub.add_parser("synth", help="generate a synthetic labeled corpus")
    p.add_argument("--out", required=True)
    p.add_argument("--families", type=int, default=3)
    p.add_argument("--reports-per-class", type=int, default=100)
    p.add_argument("--vocab", type=int, default=200)
    p.add_argument("--markers-per-class", type=int, default=8)
    p.add_argument("--marker-len", type=int, default=2)
    p.add_argument("--marker-rate", type=float, default=0.02)
    p.add_argument("--noise-rate", type=float, default=0.05)
    p.add_argument("--report-len", type=int, default=250)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_synth)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
