"""Command line front end. Flags mirror AdapterConfig one to one.

Exit codes: 0 success, 1 bad input data, 2 bad invocation.
"""

from __future__ import annotations

import argparse
import json
import sys

from . import __version__
from .errors import AdapterError, ConfigError
from .export import POOLING_RULES, AdapterConfig, export_predictions


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="evoting-adapter",
        description=(
            "Export per-token tag probabilities from a token-classification "
            "checkpoint into the voting toolkit's prediction file format."
        ),
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--checkpoint", required=True, help="model directory or hub identifier")
    parser.add_argument("--tokens", required=True, help="word-token export file to score")
    parser.add_argument("--out", required=True, help="prediction file to write")
    parser.add_argument(
        "--label-map",
        help="JSON file mapping checkpoint label names to canonical tag names",
    )
    parser.add_argument("--pooling", choices=POOLING_RULES, default="first")
    parser.add_argument("--model-id", help="header model_id (default: the checkpoint argument)")
    parser.add_argument("--max-length", type=int, help="window size override in subword tokens")
    parser.add_argument("--batch-size", type=int, default=16)
    parser.add_argument("--device", default="cpu")
    return parser


def _read_label_map(path: str) -> dict[str, str]:
    try:
        with open(path, encoding="utf-8") as fh:
            mapping = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror or exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc}") from None
    if not isinstance(mapping, dict) or not all(
        isinstance(k, str) and isinstance(v, str) for k, v in mapping.items()
    ):
        raise ConfigError(f"{path}: label map must be an object of name to tag strings")
    return mapping


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        import transformers

        transformers.logging.set_verbosity_error()
        transformers.logging.disable_progress_bar()
        config = AdapterConfig(
            checkpoint=args.checkpoint,
            tokens=args.tokens,
            out=args.out,
            label_map=_read_label_map(args.label_map) if args.label_map else None,
            pooling=args.pooling,
            model_id=args.model_id,
            max_length=args.max_length,
            batch_size=args.batch_size,
            device=args.device,
        )
        out = export_predictions(config)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (AdapterError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    with out.open(encoding="utf-8") as fh:
        total = sum(1 for _ in fh) - 1
    print(f"exported {total} record(s) -> {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
