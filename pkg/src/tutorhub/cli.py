"""Command-line entry points.

Curriculum commands operate on a store file that is itself a valid
interchange document, so `ingest` output can be re-ingested anywhere:

    tutorhub ingest syllabus.json --store corpus.json
    tutorhub search "fractions" --grade UpperPrimary --store corpus.json
    tutorhub export math-up-03 math-up-04 --store corpus.json
    tutorhub serve --config deploy.json
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .curriculum import CurriculumError, CurriculumService, GradeLevel
from .gateway.config import load_config
from .gateway.httpd import serve

DEFAULT_STORE = "curriculum_store.json"


def _load_store(service: CurriculumService, store: Path) -> None:
    if store.exists():
        service.ingest(store.read_text(encoding="utf-8"))


def cmd_ingest(args) -> int:
    service = CurriculumService()
    store = Path(args.store)
    documents = []
    if store.exists():
        documents.append(json.loads(store.read_text(encoding="utf-8")))
    documents.append(json.loads(Path(args.path).read_text(encoding="utf-8")))
    merged = json.dumps(
        [record for doc in documents for record in doc], ensure_ascii=False
    )
    summary = service.ingest(merged)
    store.write_text(service.index.export_all(), encoding="utf-8")
    print(f"ingested: {summary.item_count} records, rejected: {summary.rejected_count}")
    for reason in summary.rejection_reasons:
        print(f"  rejected {reason}", file=sys.stderr)
    return 0 if summary.item_count else 1


def cmd_search(args) -> int:
    service = CurriculumService()
    _load_store(service, Path(args.store))
    grade = GradeLevel.parse(args.grade) if args.grade else None
    hits = service.search(args.query, subject=args.subject, grade_level=grade)
    if not hits:
        print("no matches")
        return 0
    for rank, hit in enumerate(hits, 1):
        item = service.get(hit.item_id)
        print(f"{rank:2d}. [{hit.score:8.4f}] {hit.item_id}  {item.ref().path()}")
    return 0


def cmd_export(args) -> int:
    service = CurriculumService()
    _load_store(service, Path(args.store))
    sys.stdout.write(service.export(args.item_ids))
    return 0


def cmd_serve(args) -> int:
    config = load_config(args.config)
    if args.port is not None:
        config.port = args.port
    server = serve(config)
    host, port = server.server_address[:2]
    print(f"tutorhub gateway listening on http://{host}:{port}")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        server.shutdown()
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tutorhub",
        description="Curriculum-grounded tutoring orchestration service",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    ingest = sub.add_parser("ingest", help="validate and index an interchange document")
    ingest.add_argument("path")
    ingest.add_argument("--store", default=DEFAULT_STORE)
    ingest.set_defaults(func=cmd_ingest)

    search = sub.add_parser("search", help="rank indexed records for a query")
    search.add_argument("query")
    search.add_argument("--subject")
    search.add_argument("--grade")
    search.add_argument("--store", default=DEFAULT_STORE)
    search.set_defaults(func=cmd_search)

    export = sub.add_parser("export", help="emit an interchange document for ids")
    export.add_argument("item_ids", nargs="+")
    export.add_argument("--store", default=DEFAULT_STORE)
    export.set_defaults(func=cmd_export)

    server = sub.add_parser("serve", help="run the gateway")
    server.add_argument("--config")
    server.add_argument("--port", type=int)
    server.set_defaults(func=cmd_serve)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (CurriculumError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
