"""Command-line entry points: `mudoc ingest` and `mudoc serve`."""

from __future__ import annotations

import argparse
import logging
import sys

from .blocks import IngestConfig
from .config import load_config
from .errors import MudocError
from .index import DocumentIndex
from .ingest import ingest_directory
from .sessions import TimingConfig


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mudoc", description="Document-grounded tutoring service")
    parser.add_argument("--config", help="path to a JSON config file", default=None)
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    ingest = sub.add_parser("ingest", help="build a search index from layout JSON files")
    ingest.add_argument("--input", required=True, help="directory of layout *.json files")
    ingest.add_argument("--out", required=True, help="output index directory")
    ingest.add_argument("--min-chunk-chars", type=int, default=None)
    ingest.add_argument("--overlap", type=float, default=None)
    ingest.add_argument("--provider", default=None, help="mock or openai")
    ingest.add_argument("--concurrency", type=int, default=None)

    serve = sub.add_parser("serve", help="run the study HTTP service")
    serve.add_argument("--port", type=int, default=None)
    serve.add_argument("--host", default=None)
    serve.add_argument("--index-dir", default=None)
    serve.add_argument("--data-dir", default=None)
    serve.add_argument("--provider", default=None, help="mock or openai")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(asctime)s %(name)s %(levelname)s %(message)s",
    )
    try:
        config = load_config(args.config)
        if getattr(args, "provider", None):
            config.provider = args.provider
        if args.command == "ingest":
            return _run_ingest(args, config)
        return _run_serve(args, config)
    except MudocError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def _run_ingest(args: argparse.Namespace, config) -> int:
    ingest_config = IngestConfig(
        min_chunk_chars=args.min_chunk_chars if args.min_chunk_chars is not None else 8000,
        overlap_fraction=args.overlap if args.overlap is not None else 0.5,
        concurrency=args.concurrency if args.concurrency is not None else 4,
    )
    report = ingest_directory(args.input, args.out, config.build_gateway(), config=ingest_config)
    print(
        f"ingested {report.documents} document(s): {report.blocks} blocks, "
        f"{report.chunks} chunks, {report.images} images -> {report.out_dir}"
    )
    for warning in report.warnings:
        print(f"warning: {warning}")
    return 0


def _run_serve(args: argparse.Namespace, config) -> int:
    import uvicorn

    from .service import StudyService, create_app

    if args.port is not None:
        config.port = args.port
    if args.host is not None:
        config.host = args.host
    if args.index_dir is not None:
        config.index_dir = args.index_dir
    if args.data_dir is not None:
        config.data_dir = args.data_dir

    index = DocumentIndex.load(config.index_dir)
    service = StudyService(
        index,
        config.build_gateway(),
        timing=TimingConfig(min_minutes=config.min_minutes, max_minutes=config.max_minutes),
        data_dir=config.data_dir,
    )
    app = create_app(service)
    uvicorn.run(app, host=config.host, port=config.port)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
