"""Command-line front end.

Subcommands mirror the pipeline stages and the ``run`` subcommand is exactly
their composition: ingest -> tag -> (weights) -> ensemble -> decode -> eval.
``EVOTING_LOG`` selects log verbosity (debug, info, warning, error). Exit
codes: 0 success, 1 data error, 2 configuration error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from . import __version__
from .calibration import CalibrationReport, WeightVector, compute_ece, ece_weights
from .decoding import PredictedSpan, decode_bio, spans_to_standoff
from .ensemble import STRATEGIES, hard_vote, soft_vote, weighted_vote
from .errors import AlignmentError, ConfigError, DataError, EvotingError
from .metrics import TASKS, MetricsReport, evaluate
from .predictions import (
    LabelSequence,
    PredictionSet,
    argmax_labels,
    load_labels,
    load_predictions,
    save_labels,
    save_predictions,
    validate_alignment,
)
from .records import read_jsonl, write_jsonl
from .standoff import corpus_from_records, corpus_to_records, load_corpus_dir, validate_corpus
from .tokenizer import TokenSpan, TokenizedCorpus, tag_corpus, tokens_from_records, tokens_to_records

log = logging.getLogger("evoting")


@dataclass
class RunConfig:
    text_dir: str
    ann_dir: str
    predictions: list[str]
    strategy: str = "soft"
    weights: list[str] = field(default_factory=list)
    stoplist: str | None = None
    num_bins: int = 10
    out_dir: str = "evoting_run"
    workers: int | None = None

    def __post_init__(self) -> None:
        if self.strategy not in STRATEGIES:
            raise ConfigError(f"unknown strategy {self.strategy!r}, expected one of {STRATEGIES}")
        if not self.predictions:
            raise ConfigError("at least one member prediction file is required")
        if self.strategy == "weighted" and not self.weights:
            raise ConfigError("strategy 'weighted' requires --weights calibration report paths")
        if self.num_bins < 1:
            raise ConfigError(f"num_bins must be >= 1, got {self.num_bins}")


def _sha256(path: Path) -> str:
    digest = hashlib.sha256()
    with path.open("rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()


def write_manifest(config: RunConfig, out_dir: Path) -> None:
    """Digest every input and snapshot the config before any result exists."""
    inputs: dict[str, str] = {}
    for directory in (config.text_dir, config.ann_dir):
        base = Path(directory)
        if not base.is_dir():
            raise ConfigError(f"not a directory: {base}")
        for path in sorted(list(base.glob("*.txt")) + list(base.glob("*.ann"))):
            inputs[str(path)] = _sha256(path)
    for group in (config.predictions, config.weights):
        for name in group:
            path = Path(name)
            if not path.is_file():
                raise ConfigError(f"input file not found: {path}")
            inputs[str(path)] = _sha256(path)
    if config.stoplist is not None:
        path = Path(config.stoplist)
        if not path.is_file():
            raise ConfigError(f"stoplist file not found: {path}")
        inputs[str(path)] = _sha256(path)
    manifest = {
        "tool": "evoting",
        "version": __version__,
        "created_at": datetime.now(timezone.utc).isoformat(),
        "config": asdict(config),
        "inputs": inputs,
    }
    out_dir.mkdir(parents=True, exist_ok=True)
    with (out_dir / "manifest.json").open("w", encoding="utf-8", newline="\n") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True, ensure_ascii=False)
        fh.write("\n")


def read_stoplist(path: str | Path) -> list[str]:
    words = []
    with Path(path).open("r", encoding="utf-8") as fh:
        for line in fh:
            word = line.strip()
            if word:
                words.append(word)
    return words


def load_any_predictions(path: str | Path) -> PredictionSet | LabelSequence:
    """Open a prediction or label file, dispatching on the header kind."""
    first = next(read_jsonl(path), None)
    if first is None:
        raise DataError(f"{path}: empty file")
    kind = first.get("kind", "token_probs")
    if kind == "token_labels":
        return load_labels(path)
    return load_predictions(path)


def load_weight_reports(paths: list[str]) -> list[CalibrationReport]:
    reports = []
    for path in paths:
        for rec in read_jsonl(path):
            reports.append(CalibrationReport.from_record(rec))
    return reports


def weights_for_members(reports: list[CalibrationReport], member_ids: list[str]) -> WeightVector:
    by_id = {}
    for report in reports:
        by_id[report.model_id] = report
    missing = [m for m in member_ids if m not in by_id]
    if missing:
        raise ConfigError(f"no calibration report for member(s): {missing}")
    return ece_weights([by_id[m] for m in member_ids])


def combined_to_labels(combined: PredictionSet | LabelSequence) -> LabelSequence:
    if isinstance(combined, LabelSequence):
        return combined
    return argmax_labels(combined)


def decode_all(labels: LabelSequence, corpus) -> list[PredictedSpan]:
    """Decode every document's tag sequence into spans, in corpus order."""
    texts = {doc.doc_id: doc.document.text for doc in corpus}
    by_doc: dict[str, list] = {}
    for key in sorted(labels.rows):
        row = labels.rows[key]
        by_doc.setdefault(row.doc_id, []).append(row)
    spans: list[PredictedSpan] = []
    for doc_id in sorted(by_doc):
        rows = by_doc[doc_id]
        text = texts.get(doc_id)
        tokens = [
            TokenSpan(
                doc_id=row.doc_id,
                index=row.index,
                start=row.start,
                end=row.end,
                surface=text[row.start : row.end] if text is not None else "",
            )
            for row in rows
        ]
        spans.extend(decode_bio(tokens, [row.tag for row in rows]))
    return spans


def write_decoded(spans: list[PredictedSpan], corpus, out_dir: Path) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    by_doc: dict[str, list[PredictedSpan]] = {}
    for span in spans:
        by_doc.setdefault(span.doc_id, []).append(span)
    for doc in corpus:
        doc_spans = sorted(by_doc.get(doc.doc_id, []), key=lambda s: (s.start, s.end))
        blob = spans_to_standoff(doc_spans, doc.document.text)
        with (out_dir / f"{doc.doc_id}.ann").open("w", encoding="utf-8", newline="") as fh:
            fh.write(blob)


def _metric_records(strict: MetricsReport, lenient: MetricsReport) -> list[dict]:
    return [strict.to_record(), lenient.to_record()]


def run_pipeline(config: RunConfig) -> int:
    out_dir = Path(config.out_dir)
    write_manifest(config, out_dir)

    stage = "ingest"
    try:
        corpus = load_corpus_dir(config.text_dir, config.ann_dir, workers=config.workers)
        violations = validate_corpus(corpus)
        for v in violations:
            log.warning("[%s] %s: %s (%s)", stage, v.doc_id, v.message, v.kind)
        write_jsonl(out_dir / "corpus.jsonl", corpus_to_records(corpus))

        stage = "tag"
        stoplist = read_stoplist(config.stoplist) if config.stoplist else None
        tokenized, projection = tag_corpus(corpus, stoplist=stoplist)
        log.info(
            "[tag] %d tokens, %d conflict tokens, %d/%d spans dropped",
            projection.tokens,
            projection.conflict_tokens,
            projection.spans_dropped,
            projection.spans_total,
        )
        write_jsonl(out_dir / "tokens.jsonl", tokens_to_records(tokenized))

        stage = "ensemble"
        members = [load_predictions(p) for p in config.predictions]
        for member in members:
            problems = validate_alignment(member, tokenized)
            if problems:
                first = problems[0]
                raise AlignmentError(
                    f"member {member.model_id!r} is misaligned with the corpus: "
                    f"{len(problems)} violation(s), first: {first.kind} in {first.doc_id}: {first.message}"
                )
        weights = None
        if config.strategy == "weighted":
            reports = load_weight_reports(config.weights)
            weights = weights_for_members(reports, [m.model_id for m in members])
            with (out_dir / "weights.json").open("w", encoding="utf-8", newline="\n") as fh:
                json.dump({"weights": weights.weights}, fh, indent=2, sort_keys=True)
                fh.write("\n")
            combined: PredictionSet | LabelSequence = weighted_vote(members, weights)
        elif config.strategy == "soft":
            combined = soft_vote(members)
        else:
            combined = hard_vote(members)
        if isinstance(combined, LabelSequence):
            save_labels(combined, out_dir / "ensemble.jsonl")
        else:
            save_predictions(combined, out_dir / "ensemble.jsonl")

        stage = "decode"
        spans = decode_all(combined_to_labels(combined), corpus)
        write_decoded(spans, corpus, out_dir / "decoded")

        stage = "eval"
        tables = []
        for task in TASKS:
            strict, lenient = evaluate(corpus, spans, task=task, tokens=tokenized)
            write_jsonl(out_dir / f"metrics_{task}.jsonl", _metric_records(strict, lenient))
            tables.extend([strict.table(), lenient.table()])
        report_text = "\n\n".join(tables) + "\n"
        with (out_dir / "report.txt").open("w", encoding="utf-8", newline="\n") as fh:
            fh.write(report_text)
        print(report_text, end="")
    except EvotingError as exc:
        raise type(exc)(f"[{stage}] {exc}") from exc
    return 0


def cmd_ingest(args: argparse.Namespace) -> int:
    corpus = load_corpus_dir(args.text_dir, args.ann_dir, workers=args.workers)
    violations = validate_corpus(corpus)
    for v in violations:
        log.warning("%s: %s (%s)", v.doc_id, v.message, v.kind)
    write_jsonl(args.out, corpus_to_records(corpus))
    print(f"ingested {len(corpus)} documents, {len(violations)} violation(s) -> {args.out}")
    return 0


def _load_corpus_records(path: str) -> list:
    return corpus_from_records(read_jsonl(path))


def cmd_tag(args: argparse.Namespace) -> int:
    corpus = _load_corpus_records(args.corpus)
    stoplist = read_stoplist(args.stoplist) if args.stoplist else None
    tokenized, projection = tag_corpus(corpus, stoplist=stoplist)
    write_jsonl(args.out, tokens_to_records(tokenized))
    print(
        f"tagged {projection.tokens} tokens "
        f"({projection.conflict_tokens} conflicts, {projection.spans_dropped}/{projection.spans_total} spans dropped) "
        f"-> {args.out}"
    )
    return 0


def cmd_ece(args: argparse.Namespace) -> int:
    tokenized = tokens_from_records(read_jsonl(args.tokens))
    reports = []
    for path in args.predictions:
        pred = load_predictions(path)
        report = compute_ece(pred, tokenized, num_bins=args.bins)
        reports.append(report)
        print(f"{report.model_id}: ece={report.ece:.4f} over {report.total} tokens")
    write_jsonl(args.out, [r.to_record() for r in reports])
    return 0


def cmd_ensemble(args: argparse.Namespace) -> int:
    members = [load_predictions(p) for p in args.predictions]
    if args.strategy == "weighted":
        if not args.weights:
            raise ConfigError("strategy 'weighted' requires --weights calibration report paths")
        weights = weights_for_members(load_weight_reports(args.weights), [m.model_id for m in members])
        combined: PredictionSet | LabelSequence = weighted_vote(members, weights)
    elif args.strategy == "soft":
        combined = soft_vote(members)
    else:
        combined = hard_vote(members)
    if isinstance(combined, LabelSequence):
        save_labels(combined, args.out)
    else:
        save_predictions(combined, args.out)
    print(f"{args.strategy} vote over {len(members)} member(s) -> {args.out}")
    return 0


def cmd_decode(args: argparse.Namespace) -> int:
    corpus = _load_corpus_records(args.corpus)
    combined = load_any_predictions(args.pred)
    spans = decode_all(combined_to_labels(combined), corpus)
    write_decoded(spans, corpus, Path(args.out_dir))
    print(f"decoded {len(spans)} spans -> {args.out_dir}")
    return 0


def _read_predicted_dir(corpus, pred_dir: Path) -> list[PredictedSpan]:
    from .standoff import parse_document

    spans: list[PredictedSpan] = []
    for doc in corpus:
        path = pred_dir / f"{doc.doc_id}.ann"
        if not path.exists():
            continue
        with path.open("r", encoding="utf-8", newline="") as fh:
            parsed = parse_document(doc.document.text, fh.read(), doc_id=doc.doc_id)
        spans.extend(
            PredictedSpan(doc_id=doc.doc_id, start=s.start, end=s.end, label=s.label.value)
            for s in parsed.gold
        )
    return spans


def cmd_eval(args: argparse.Namespace) -> int:
    corpus = _load_corpus_records(args.corpus)
    spans = _read_predicted_dir(corpus, Path(args.pred_dir))
    tokenized: TokenizedCorpus | None = None
    if args.tokens:
        tokenized = tokens_from_records(read_jsonl(args.tokens))
    strict, lenient = evaluate(corpus, spans, task=args.task, tokens=tokenized)
    write_jsonl(args.out, _metric_records(strict, lenient))
    print(strict.table())
    print()
    print(lenient.table())
    return 0


def cmd_report(args: argparse.Namespace) -> int:
    first = True
    for path in args.metrics:
        for rec in read_jsonl(path):
            if not first:
                print()
            print(MetricsReport.from_record(rec).table())
            first = False
    return 0


def cmd_run(args: argparse.Namespace) -> int:
    settings: dict = {}
    if args.config:
        with Path(args.config).open("r", encoding="utf-8") as fh:
            try:
                settings = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"{args.config}: invalid JSON: {exc}") from None
        if not isinstance(settings, dict):
            raise ConfigError(f"{args.config}: config must be a JSON object")
        unknown = set(settings) - set(RunConfig.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"{args.config}: unknown config key(s): {sorted(unknown)}")
    overrides = {
        "text_dir": args.text_dir,
        "ann_dir": args.ann_dir,
        "predictions": args.predictions or None,
        "strategy": args.strategy,
        "weights": args.weights or None,
        "stoplist": args.stoplist,
        "num_bins": args.bins,
        "out_dir": args.out_dir,
        "workers": args.workers,
    }
    for key, value in overrides.items():
        if value is not None:
            settings[key] = value
    missing = [k for k in ("text_dir", "ann_dir", "predictions") if not settings.get(k)]
    if missing:
        raise ConfigError(f"missing required setting(s): {missing}")
    try:
        config = RunConfig(**settings)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None
    return run_pipeline(config)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="evoting",
        description="Ensemble voting, span decoding, and evaluation for medication-event predictions.",
    )
    parser.add_argument("--version", action="version", version=f"evoting {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="parse and validate a standoff corpus")
    p.add_argument("--text-dir", required=True)
    p.add_argument("--ann-dir", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--workers", type=int, default=os.cpu_count())
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("tag", help="tokenize and project gold spans to IOB2 tags")
    p.add_argument("--corpus", required=True)
    p.add_argument("--stoplist")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_tag)

    p = sub.add_parser("ece", help="expected calibration error per prediction file")
    p.add_argument("--tokens", required=True)
    p.add_argument("--bins", type=int, default=10)
    p.add_argument("--out", required=True)
    p.add_argument("predictions", nargs="+")
    p.set_defaults(func=cmd_ece)

    p = sub.add_parser("ensemble", help="combine member prediction files")
    p.add_argument("--strategy", choices=STRATEGIES, default="soft")
    p.add_argument("--weights", action="append", help="calibration report file (repeatable)")
    p.add_argument("--out", required=True)
    p.add_argument("predictions", nargs="+")
    p.set_defaults(func=cmd_ensemble)

    p = sub.add_parser("decode", help="decode token tags or probabilities into spans")
    p.add_argument("--corpus", required=True)
    p.add_argument("--pred", required=True)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("eval", help="score decoded spans against the gold corpus")
    p.add_argument("--corpus", required=True)
    p.add_argument("--pred-dir", required=True)
    p.add_argument("--tokens", help="token file; enables token-aware medication merging")
    p.add_argument("--task", choices=TASKS, default="events")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("report", help="render metric records as tables")
    p.add_argument("metrics", nargs="+")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("run", help="full pipeline from a config file")
    p.add_argument("--config")
    p.add_argument("--text-dir")
    p.add_argument("--ann-dir")
    p.add_argument("--pred", dest="predictions", action="append")
    p.add_argument("--strategy", choices=STRATEGIES)
    p.add_argument("--weights", action="append")
    p.add_argument("--stoplist")
    p.add_argument("--bins", type=int, dest="bins")
    p.add_argument("--out-dir")
    p.add_argument("--workers", type=int)
    p.set_defaults(func=cmd_run)

    return parser


def _configure_logging() -> None:
    level_name = os.environ.get("EVOTING_LOG", "warning").lower()
    levels = {"debug": logging.DEBUG, "info": logging.INFO, "warning": logging.WARNING, "error": logging.ERROR}
    logging.basicConfig(
        level=levels.get(level_name, logging.WARNING),
        stream=sys.stderr,
        format="%(levelname)s %(name)s: %(message)s",
        force=True,
    )


def main(argv: list[str] | None = None) -> int:
    _configure_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except EvotingError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
