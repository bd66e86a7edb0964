"""Command line entry point: ``facilitykb build|link-trials|query|metrics``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path
from typing import Optional, Sequence

from . import pipeline
from .core import FacilityKBError, GeoPoint, SemanticType
from .export import CSV_COLUMNS, PREFIXES, load_kb, query_filter, query_radius

logger = logging.getLogger("facilitykb")

EXIT_OK = 0
EXIT_CODES = {"CONFIG": 1, "INPUT": 2, "OUTPUT": 3}
EXIT_BAD_ARGUMENTS = 4

EPILOG = (
    "output contracts:\n"
    "  facilities.csv  UTF-8, LF line endings, comma delimiter, RFC 4180 quoting,\n"
    "                  one row per entity sorted by kb_id, columns:\n"
    "                  " + ",".join(CSV_COLUMNS) + "\n"
    "  facilities.ttl  Turtle; prefix block, in this order:\n"
    + "".join(f"                  @prefix {p}: <{iri}> .\n" for p, iri in PREFIXES)
    + "                  then the schema (non-empty KB only), facilities sorted by kb_id,\n"
    "                  then location resources sorted by name. Points are written\n"
    "                  POINT(lon lat) as geo:wktLiteral.\n"
    "  summary.json    entity_count, csv_rows, statement_count, config_hash\n"
    "\n"
    "exit codes: 0 ok, 1 config, 2 input (including missing KB), 3 output, 4 bad arguments"
)


class ArgumentError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_BAD_ARGUMENTS)


def parse_point(text: str) -> GeoPoint:
    try:
        lat, lon = (float(part) for part in text.split(","))
        return GeoPoint(lat, lon)
    except (ValueError, TypeError):
        raise ArgumentError(f"expected LAT,LON within range, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="facilitykb",
        description="Build and query a knowledge base of clinical trial facilities.",
        epilog=EPILOG,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    for name, text in (
        ("build", "ingest, align and export the knowledge base"),
        ("link-trials", "link registry sites to a built knowledge base"),
        ("metrics", "recompute the metrics report for a built knowledge base"),
    ):
        p = sub.add_parser(name, help=text, description=text, epilog=EPILOG,
                           formatter_class=argparse.RawDescriptionHelpFormatter)
        p.add_argument("manifest", help="run manifest (JSON)")

    q = sub.add_parser("query", help="radius or attribute query over a built knowledge base")
    q.add_argument("kb", help="kb.json written by build, or the run manifest")
    q.add_argument("--near", metavar="LAT,LON", help="sort located facilities by distance")
    q.add_argument("--max-km", type=float, help="radius limit for --near")
    q.add_argument("--country")
    q.add_argument("--state")
    q.add_argument("--city")
    q.add_argument("--type", choices=[t.name for t in SemanticType])
    q.add_argument("--limit", type=int, help="print at most this many rows")
    q.add_argument("--json", action="store_true", help="machine-readable output")
    return parser


def _kb_path(arg: str) -> Path:
    path = Path(arg)
    if path.suffix == ".json" and path.is_file():
        try:
            head = json.loads(path.read_text(encoding="utf-8"))
        except ValueError:
            return path
        if isinstance(head, dict) and "dumps" in head:
            return pipeline.RunManifest.load(path).output_dir / pipeline.KB_NAME
    return path


def cmd_build(args) -> int:
    manifest = pipeline.RunManifest.load(args.manifest)
    start = time.perf_counter()
    summary = pipeline.build(manifest)
    logger.info("built %d entities, %d statements in %.2fs -> %s",
                summary["entity_count"], summary["statement_count"],
                time.perf_counter() - start, manifest.output_dir)
    return EXIT_OK


def cmd_link_trials(args) -> int:
    manifest = pipeline.RunManifest.load(args.manifest)
    summary = pipeline.link_trials(manifest)
    logger.info("sites: %d linked, %d vague, %d unmatched of %d",
                summary["linked_sites"], summary["vague_sites"],
                summary["unmatched_sites"], summary["distinct_sites"])
    return EXIT_OK


def cmd_metrics(args) -> int:
    manifest = pipeline.RunManifest.load(args.manifest)
    kb = pipeline.load_built_kb(manifest)
    pipeline.write_metrics_files(manifest, kb, pipeline.ingest(manifest))
    logger.info("metrics written to %s", manifest.output_dir)
    return EXIT_OK


def cmd_query(args, out=None) -> int:
    out = out or sys.stdout
    if args.max_km is not None and args.near is None:
        raise ArgumentError("--max-km needs --near")
    if args.max_km is not None and args.max_km < 0:
        raise ArgumentError("--max-km must be non-negative")
    center = parse_point(args.near) if args.near is not None else None
    path = _kb_path(args.kb)
    if not path.is_file():
        raise pipeline.MissingKBError(f"no knowledge base at {path}")
    kb = load_kb(path)

    stype = SemanticType[args.type] if args.type else None
    allowed = {e.kb_id for e in query_filter(kb, args.country, args.state, args.city, stype)}
    if center is not None:
        rows = [(e, d) for e, d in query_radius(kb, center, args.max_km) if e.kb_id in allowed]
    else:
        rows = [(e, None) for e in sorted(kb.entities, key=lambda e: e.kb_id) if e.kb_id in allowed]
    if args.limit is not None:
        rows = rows[: max(args.limit, 0)]

    if args.json:
        payload = [
            {
                "kb_id": e.kb_id,
                "name": e.preferred_name,
                "city": e.city.name if e.city else None,
                "country": e.country.name if e.country else None,
                "distance_km": None if d is None else round(d, 6),
            }
            for e, d in rows
        ]
        out.write(json.dumps(payload, indent=2, ensure_ascii=False) + "\n")
        return EXIT_OK
    header = ["kb_id", "name", "city", "country"] + (["distance_km"] if center else [])
    table = [header]
    for e, d in rows:
        row = [e.kb_id, e.preferred_name, e.city.name or "" if e.city else "",
               e.country.name or "" if e.country else ""]
        if center:
            row.append(f"{d:.3f}")
        table.append(row)
    widths = [max(len(r[i]) for r in table) for i in range(len(header))]
    for r in table:
        out.write("  ".join(cell.ljust(w) for cell, w in zip(r, widths)).rstrip() + "\n")
    return EXIT_OK


COMMANDS = {
    "build": cmd_build,
    "link-trials": cmd_link_trials,
    "metrics": cmd_metrics,
    "query": cmd_query,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        return COMMANDS[args.command](args)
    except ArgumentError as exc:
        logger.error("%s", exc)
        return EXIT_BAD_ARGUMENTS
    except FacilityKBError as exc:
        logger.error("%s: %s", exc.category, exc)
        return EXIT_CODES.get(exc.category, EXIT_CODES["INPUT"])


if __name__ == "__main__":
    sys.exit(main())
