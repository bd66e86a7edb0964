"""Run manifest and the end-to-end build and link steps.

A manifest is a JSON object; relative paths resolve against the manifest's
own directory::

    {
      "dumps": {"wikidata": "dumps/wikidata.jsonl", "umls": "dumps/umls.jsonl"},
      "gazetteer": "gazetteer.tsv",
      "blacklist": "blacklist.txt",
      "merge": {"k": 10},
      "registry": "registry.tsv",
      "population": "population.tsv",
      "output_dir": "out",
      "workers": 4,
      "index_mode": "EXACT"
    }

``blacklist``, ``merge``, ``registry``, ``population``, ``workers`` and
``index_mode`` are optional. Without a blacklist file the built-in list is
used.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from . import export
from .align import KnowledgeBase, MergeConfig, build_kb
from .core import ConfigError, InputError, SourceTag
from .geo import Gazetteer, LinkStats, load_gazetteer, resolve_locations
from .ingest import (
    Blacklist,
    SourceRecord,
    apply_blacklist,
    load_source_dump,
    resolve_admin_territory,
)
from .metrics import load_population_table, metrics_report, write_metrics
from .textmatch import IndexMode
from .triallink import link_sites, link_summary, parse_registry_dump, write_link_report

logger = logging.getLogger(__name__)

# Artifact names inside the output directory.
CSV_NAME = "facilities.csv"
TURTLE_NAME = "facilities.ttl"
SUMMARY_NAME = "summary.json"
KB_NAME = "kb.json"
METRICS_JSON = "metrics.json"
METRICS_TSV = "metrics.tsv"
MERGE_REPORT = "merge_report.jsonl"
LINK_REPORT = "trial_links.tsv"
LINK_SUMMARY = "trial_links_summary.json"

_KNOWN_KEYS = {
    "dumps", "gazetteer", "blacklist", "merge", "registry", "population",
    "output_dir", "workers", "index_mode",
}


@dataclass
class RunManifest:
    dumps: dict[SourceTag, Path]
    gazetteer: Path
    output_dir: Path
    blacklist: Optional[Path] = None
    merge: MergeConfig = field(default_factory=MergeConfig)
    registry: Optional[Path] = None
    population: Optional[Path] = None
    workers: Optional[int] = None
    index_mode: IndexMode = IndexMode.EXACT
    raw: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, data: dict, base_dir: Path = Path(".")) -> "RunManifest":
        if not isinstance(data, dict):
            raise ConfigError("manifest must be a JSON object")
        unknown = set(data) - _KNOWN_KEYS
        if unknown:
            raise ConfigError(f"unknown manifest keys: {sorted(unknown)}")
        for key in ("dumps", "gazetteer", "output_dir"):
            if not data.get(key):
                raise ConfigError(f"manifest lacks {key!r}")

        def path(value) -> Path:
            p = Path(value)
            return p if p.is_absolute() else base_dir / p

        try:
            dumps = {SourceTag.parse(k): path(v) for k, v in data["dumps"].items()}
            merge = MergeConfig.from_dict(data.get("merge") or {})
            mode = IndexMode[str(data.get("index_mode", "EXACT")).upper()]
        except (ValueError, KeyError, AttributeError, TypeError) as exc:
            raise ConfigError(f"bad manifest value: {exc}") from exc
        workers = data.get("workers")
        if workers is not None and (not isinstance(workers, int) or workers < 1):
            raise ConfigError("workers must be a positive integer")
        manifest = cls(
            dumps=dumps,
            gazetteer=path(data["gazetteer"]),
            output_dir=path(data["output_dir"]),
            blacklist=path(data["blacklist"]) if data.get("blacklist") else None,
            merge=merge,
            registry=path(data["registry"]) if data.get("registry") else None,
            population=path(data["population"]) if data.get("population") else None,
            workers=workers,
            index_mode=mode,
            raw=data,
        )
        manifest.validate()
        return manifest

    @classmethod
    def load(cls, path) -> "RunManifest":
        path = Path(path)
        try:
            data = json.loads(path.read_text(encoding="utf-8"))
        except OSError as exc:
            raise ConfigError(f"cannot read manifest {path}: {exc}") from exc
        except ValueError as exc:
            raise ConfigError(f"manifest {path} is not valid JSON: {exc}") from exc
        return cls.from_dict(data, path.parent)

    def validate(self) -> None:
        required = [("gazetteer", self.gazetteer)]
        required += [(f"dump {s.value}", p) for s, p in self.dumps.items()]
        for label, p in (("blacklist", self.blacklist), ("registry", self.registry),
                         ("population", self.population)):
            if p is not None:
                required.append((label, p))
        for label, p in required:
            if not p.is_file():
                raise ConfigError(f"{label} not found: {p}")

    def config_hash(self) -> str:
        blob = json.dumps(self.raw, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()


@dataclass
class IngestResult:
    records: list[SourceRecord]
    gazetteer: Gazetteer
    stats: dict


def ingest(manifest: RunManifest) -> IngestResult:
    """Load every dump, drop blacklisted and duplicate concepts, link locations."""
    gaz = load_gazetteer(manifest.gazetteer)
    blacklist = Blacklist.load(manifest.blacklist) if manifest.blacklist else Blacklist.default()
    sources = [s for s in SourceTag if s in manifest.dumps]
    workers = manifest.workers or min(len(sources), os.cpu_count() or 1) or 1
    with ThreadPoolExecutor(max_workers=workers) as pool:
        loaded = list(pool.map(lambda s: load_source_dump(manifest.dumps[s], s), sources))

    stats: dict = {"loaded": {}, "skipped_lines": {}, "duplicates": 0,
                   "blacklisted": 0, "territories_dropped": 0}
    records: list[SourceRecord] = []
    seen = set()
    for source, result in zip(sources, loaded):
        stats["loaded"][source.name] = len(result.records)
        stats["skipped_lines"][source.name] = result.skipped
        for r in result.records:
            if r.id in seen:
                stats["duplicates"] += 1
                continue
            seen.add(r.id)
            records.append(r)
    records, stats["blacklisted"] = apply_blacklist(records, blacklist)

    link_stats = LinkStats()
    out = []
    for r in records:
        r, dropped = resolve_admin_territory(r, gaz)
        stats["territories_dropped"] += dropped
        out.append(resolve_locations(r, gaz, link_stats))
    stats["location_linking"] = link_stats.as_dict()
    return IngestResult(out, gaz, stats)


def build(manifest: RunManifest) -> dict:
    """Full build; returns a summary of what was written."""
    ing = ingest(manifest)
    kb = build_kb(ing.records, manifest.merge, manifest.index_mode)
    return write_build_artifacts(manifest, kb, ing)


def write_build_artifacts(manifest: RunManifest, kb: KnowledgeBase, ing: IngestResult) -> dict:
    out = manifest.output_dir
    rows = export.export_csv(kb, out / CSV_NAME)
    statements = export.export_turtle(kb, out / TURTLE_NAME)
    summary = export.write_summary(kb, out / SUMMARY_NAME, statements, rows)
    export.save_kb(kb, out / KB_NAME)
    export.write_merge_report(kb, out / MERGE_REPORT)
    write_metrics_files(manifest, kb, ing)
    return summary


def write_metrics_files(manifest: RunManifest, kb: KnowledgeBase, ing: IngestResult) -> dict:
    population = load_population_table(manifest.population) if manifest.population else None
    report = metrics_report(
        kb, ing.records, population,
        extra={"ingest": ing.stats, "alignment": dict(sorted(kb.counters.items()))},
    )
    try:
        write_metrics(report, manifest.output_dir / METRICS_JSON, manifest.output_dir / METRICS_TSV)
    except OSError as exc:
        raise export.UnwritablePathError(f"cannot write metrics: {exc}") from exc
    return report


def load_built_kb(manifest: RunManifest) -> KnowledgeBase:
    path = manifest.output_dir / KB_NAME
    if not path.is_file():
        raise MissingKBError(f"no built knowledge base at {path}; run build first")
    return export.load_kb(path)


class MissingKBError(InputError):
    pass


def link_trials(manifest: RunManifest) -> dict:
    if manifest.registry is None:
        raise ConfigError("manifest has no registry")
    kb = load_built_kb(manifest)
    gaz = load_gazetteer(manifest.gazetteer)
    registry = parse_registry_dump(manifest.registry)
    result = link_sites(registry.sites, kb, gazetteer=gaz)
    summary = link_summary(registry, result)
    out = manifest.output_dir
    try:
        write_link_report(out / LINK_REPORT, registry, result)
        (out / LINK_SUMMARY).write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n",
                                        encoding="utf-8")
    except OSError as exc:
        raise export.UnwritablePathError(f"cannot write link report: {exc}") from exc
    return summary
