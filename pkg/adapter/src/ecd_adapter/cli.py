"""Command line interface: annotate and embed subcommands.

Exit codes: 0 success, 2 unreadable input or unavailable model, 3 bad
option values.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from ecd_adapter.adapter import AdapterConfig, annotate_corpus, embed_corpus
from ecd_adapter.errors import AdapterError


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ecd-adapter",
        description="Tag entities and embed sentences into scorer-ready JSONL files.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    annotate = sub.add_parser("annotate", help="write one annotation record per document")
    annotate.add_argument("--corpus", required=True, help="corpus JSONL with id and text")
    annotate.add_argument("--out", required=True, help="annotations JSONL to write")
    annotate.add_argument(
        "--tagger",
        default="builtin",
        help="'builtin' or a pretrained token-classification model name",
    )
    annotate.add_argument("--batch-size", type=int, default=32)

    embed = sub.add_parser("embed", help="write one vector per distinct sentence")
    embed.add_argument("--corpus", required=True, help="corpus JSONL with id and text")
    embed.add_argument("--out", required=True, help="vectors JSONL to write")
    embed.add_argument(
        "--embedder",
        default="builtin",
        help="'builtin' or a pretrained sentence-embedding model name",
    )
    embed.add_argument("--dim", type=int, default=64, help="builtin embedder dimension")
    embed.add_argument("--batch-size", type=int, default=32)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "annotate":
            config = AdapterConfig(
                corpus=Path(args.corpus),
                annotations_out=Path(args.out),
                tagger=args.tagger,
                batch_size=args.batch_size,
            )
            summary = annotate_corpus(config)
            print(
                f"annotated {summary.documents} documents "
                f"with {summary.mentions} entity mentions"
            )
        else:
            config = AdapterConfig(
                corpus=Path(args.corpus),
                vectors_out=Path(args.out),
                embedder=args.embedder,
                batch_size=args.batch_size,
                dimension=args.dim,
            )
            summary = embed_corpus(config)
            print(f"embedded {summary.sentences} sentences at dimension {summary.dimension}")
    except (AdapterError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    return 0


def run() -> None:
    raise SystemExit(main())


if __name__ == "__main__":
    run()
