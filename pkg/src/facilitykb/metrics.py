"""Coverage, completeness and connectivity figures for a built knowledge base."""

from __future__ import annotations

import csv
import json
import logging
from collections import Counter, defaultdict
from dataclasses import dataclass
from itertools import permutations
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence

from .align import KnowledgeBase
from .core import (
    SOURCE_ORDER,
    MalformedPopulationTableError,
    SemanticType,
    SourceId,
    UnreadableFileError,
)
from .ingest import SourceRecord

logger = logging.getLogger(__name__)

PER_100K = 100_000
DENSITY_MIN_POPULATION = 500_000
NO_DATA = "NO_DATA"


def _pct(part: int, whole: int) -> float:
    return 100.0 * part / whole if whole else 0.0


@dataclass(frozen=True)
class LocatedRow:
    total: int
    with_coordinates: int
    percentage: float


def located_stats(kb: KnowledgeBase) -> dict[SemanticType, LocatedRow]:
    """Per semantic type: entities, entities with a valid point, and their share."""
    totals, located = Counter(), Counter()
    for e in kb.entities:
        for t in e.types:
            totals[t] += 1
            if e.point is not None:
                located[t] += 1
    return {
        t: LocatedRow(totals[t], located[t], _pct(located[t], totals[t]))
        for t in sorted(SemanticType)
    }


def source_coverage(records: Iterable[SourceRecord]) -> dict[str, dict[str, int]]:
    """Concepts per source and how many are located at each level."""
    out = {s.name: Counter() for s in SOURCE_ORDER}
    for r in records:
        row = out[r.source.name]
        row["concepts"] += 1
        row["country"] += r.country is not None
        row["state"] += r.state is not None
        row["city"] += r.city is not None
        row["zip"] += bool(r.zip)
        row["coordinates"] += r.point is not None
    keys = ("concepts", "country", "state", "city", "zip", "coordinates")
    return {name: {k: row[k] for k in keys} for name, row in out.items()}


def kb_coverage(kb: KnowledgeBase) -> dict[str, int]:
    return {
        "entities": len(kb),
        "country": sum(e.country is not None for e in kb),
        "state": sum(e.state is not None for e in kb),
        "city": sum(e.city is not None for e in kb),
        "zip": sum(bool(e.zip) for e in kb),
        "coordinates": sum(e.point is not None for e in kb),
        "countries": len({e.country.geonames_id or e.country.name for e in kb if e.country}),
    }


def language_stats(kb: KnowledgeBase, per_source_records: Iterable[SourceRecord] = ()) -> dict:
    """Average number of distinct known language tags per concept.

    Aliases without a language tag do not count.
    """
    per_source: dict[str, list[int]] = defaultdict(list)
    for r in per_source_records:
        per_source[r.source.name].append(len({a.lang for a in r.aliases if a.lang}))
    kb_counts = [len(e.languages()) for e in kb.entities]
    all_langs = {lang for e in kb.entities for lang in e.languages()}
    return {
        "per_source": {
            s.name: (sum(per_source[s.name]) / len(per_source[s.name]) if per_source[s.name] else 0.0)
            for s in SOURCE_ORDER
        },
        "kb_average": sum(kb_counts) / len(kb_counts) if kb_counts else 0.0,
        "distinct_languages": len(all_langs),
    }


def connectivity_stats(records: Iterable[SourceRecord], kb: KnowledgeBase) -> dict:
    """Cross-source mappings declared by the sources versus produced by alignment.

    An entity holding n source identifiers yields n(n-1)/2 undirected pairs
    and n(n-1) directed mappings. Declared links only count when both ends are
    records of this run. ``pct_new`` is the share of the resulting undirected
    pairs that no source declared.
    """
    records = list(records)
    present = {r.id for r in records}
    declared_directed: set[tuple[SourceId, SourceId]] = set()
    for r in records:
        for foreign, native in r.sameas.items():
            target = SourceId(foreign, native)
            if target in present:
                declared_directed.add((r.id, target))
    declared_pairs = {frozenset(p) for p in declared_directed}

    after_pairs = set()
    directed_after = 0
    for e in kb.entities:
        ids = e.source_ids()
        n = len(ids)
        directed_after += n * (n - 1)
        after_pairs.update(frozenset(p) for p in permutations(ids, 2))
    undirected_after = len(after_pairs)
    new_pairs = len(after_pairs - declared_pairs)
    return {
        "declared_directed_before": len(declared_directed),
        "undirected_before": len(declared_pairs),
        "undirected_after": undirected_after,
        "directed_after": directed_after,
        # Legacy names: "unidirectional" counts pairs, "bidirectional" both directions.
        "unidirectional_after": undirected_after,
        "bidirectional_after": directed_after,
        "new_pairs": new_pairs,
        "pct_new": _pct(new_pairs, undirected_after),
    }


def source_overlaps(kb: KnowledgeBase) -> dict[str, int]:
    """Entity count per exact combination of contributing sources."""
    buckets = Counter()
    for e in kb.entities:
        key = "+".join(s.name for s in SOURCE_ORDER if s in e.ids)
        buckets[key] += 1
    return dict(sorted(buckets.items()))


def load_population_table(path, delimiter: Optional[str] = None) -> dict[str, int]:
    """Read ``country_geonames_id, population`` rows; a header row is allowed.

    The delimiter defaults to tab for ``.tsv`` files and comma otherwise.
    """
    path = Path(path)
    if delimiter is None:
        delimiter = "\t" if path.suffix.lower() in (".tsv", ".tab", ".txt") else ","
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise UnreadableFileError(f"cannot read population table {path}: {exc}") from exc
    table: dict[str, int] = {}
    for lineno, row in enumerate(csv.reader(text.splitlines(), delimiter=delimiter), 1):
        if not row or not "".join(row).strip() or row[0].lstrip().startswith("#"):
            continue
        if len(row) != 2:
            raise MalformedPopulationTableError(f"{path}:{lineno}: expected 2 columns")
        gid, pop = row[0].strip(), row[1].strip()
        if lineno == 1 and not gid.isdigit():
            continue
        if not gid.isdigit() or not pop.isdigit():
            raise MalformedPopulationTableError(f"{path}:{lineno}: bad row {row!r}")
        if gid in table:
            raise MalformedPopulationTableError(f"{path}:{lineno}: duplicate country {gid}")
        table[gid] = int(pop)
    return table


def density(kb: KnowledgeBase, population_table: Mapping[str, int]) -> dict[str, object]:
    """Healthcare organizations per 100,000 inhabitants, per country GeoNames id.

    Countries with fewer than 500,000 inhabitants or no population figure
    are reported as ``NO_DATA``.
    """
    for gid, pop in population_table.items():
        if not isinstance(pop, int) or isinstance(pop, bool) or pop < 0:
            raise MalformedPopulationTableError(f"bad population for {gid}: {pop!r}")
    counts = Counter(
        e.country.geonames_id
        for e in kb.entities
        if SemanticType.HEALTHCARE_ORGANIZATION in e.types
        and e.country is not None
        and e.country.geonames_id is not None
    )
    out: dict[str, object] = {}
    for gid in sorted(set(counts) | set(population_table), key=lambda g: (len(g), g)):
        pop = population_table.get(gid)
        if pop is None or pop < DENSITY_MIN_POPULATION:
            out[gid] = NO_DATA
        else:
            out[gid] = PER_100K * counts[gid] / pop
    return out


def metrics_report(
    kb: KnowledgeBase,
    records: Sequence[SourceRecord],
    population_table: Optional[Mapping[str, int]] = None,
    extra: Optional[dict] = None,
) -> dict:
    report = {
        "per_source": source_coverage(records),
        "kb": kb_coverage(kb),
        "per_type_located": {
            t.name: {"total": row.total, "with_coordinates": row.with_coordinates,
                     "percentage": round(row.percentage, 4)}
            for t, row in located_stats(kb).items()
        },
        "language": language_stats(kb, records),
        "connectivity": connectivity_stats(records, kb),
        "overlaps": source_overlaps(kb),
    }
    if population_table is not None:
        report["density"] = {
            gid: (v if v == NO_DATA else round(v, 6)) for gid, v in density(kb, population_table).items()
        }
    if extra:
        report.update(extra)
    return report


def _flatten(prefix: str, value, rows: list):
    if isinstance(value, dict):
        for k in sorted(value, key=str):
            _flatten(f"{prefix}.{k}" if prefix else str(k), value[k], rows)
    else:
        rows.append((prefix, value))


def write_metrics(report: dict, json_path, tsv_path) -> None:
    Path(json_path).write_text(
        json.dumps(report, indent=2, sort_keys=True, ensure_ascii=False) + "\n", encoding="utf-8"
    )
    rows: list = []
    _flatten("", report, rows)
    with open(tsv_path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, delimiter="\t", lineterminator="\n")
        writer.writerow(("metric", "value"))
        writer.writerows(rows)
