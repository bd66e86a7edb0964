"""Knowledge-base construction from source records.

Four passes, each respecting the one-to-one constraint (an entity holds at
most one identifier per source):

1. groups of records that are sameAs-linked to every other LOD source in the
   run become entities;
2. remaining sameAs-linked records are absorbed source by source, in
   ``source_order``, into the entity they link to (or seed a new one);
3. records without usable sameAs links are merged by trigram TF-IDF
   similarity gated by geography (rules 1-3 below);
4. whatever is left becomes a singleton entity.

Step 3 merge rules, the first one whose data requirements hold decides:

* rule 1, both sides have coordinates: cosine >= 0.75 and distance <= 1 km;
* rule 2, both sides have city and country names: names equal and
  cosine >= 0.9;
* rule 3, otherwise: same country and at least three alias pairs with
  cosine >= 0.99.

Cosine between two multi-alias entities is the maximum over alias pairs.
"""

from __future__ import annotations

import hashlib
import json
import logging
from collections import Counter, defaultdict
from dataclasses import asdict, dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from .core import (
    LOD_SOURCES,
    SOURCE_ORDER,
    Alias,
    GeoPoint,
    LocationRef,
    SemanticType,
    SourceId,
    SourceTag,
    normalize_name,
)
from .geo import haversine_km
from .ingest import SourceRecord
from .textmatch import DEFAULT_K, MIN_DF, CandidateIndex, IndexMode, build_vocabulary

logger = logging.getLogger(__name__)

KB_ID_PREFIX = "MTF"


@dataclass(frozen=True)
class MergeConfig:
    rule1_cos: float = 0.75
    rule1_max_km: float = 1.0
    rule2_cos: float = 0.9
    rule3_cos: float = 0.99
    rule3_min_aliases: int = 3
    k: int = DEFAULT_K
    min_df: int = MIN_DF
    source_order: tuple[SourceTag, ...] = SOURCE_ORDER

    def __post_init__(self):
        if sorted(self.source_order) != sorted(SOURCE_ORDER) or len(self.source_order) != 5:
            raise ValueError("source_order must list each source exactly once")
        if self.k < 1:
            raise ValueError("k must be positive")

    @classmethod
    def from_dict(cls, data: dict) -> "MergeConfig":
        data = dict(data)
        if "source_order" in data:
            data["source_order"] = tuple(SourceTag.parse(s) for s in data["source_order"])
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown merge settings: {sorted(unknown)}")
        return cls(**data)

    def as_dict(self) -> dict:
        out = asdict(self)
        out["source_order"] = [s.name for s in self.source_order]
        return out

    def config_hash(self) -> str:
        blob = json.dumps(self.as_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()

    def rank(self, source: SourceTag) -> int:
        return self.source_order.index(source)


def location_key(ref: Optional[LocationRef]) -> Optional[str]:
    """Comparison key for a location: its normalized name, else its id."""
    if ref is None:
        return None
    if ref.name:
        return normalize_name(ref.name)
    return f"#{ref.geonames_id}"


class Cluster:
    """A group of records under construction. Holds at most one record per source."""

    __slots__ = ("records", "events", "in_kb")

    def __init__(self, records: Sequence[SourceRecord] = (), in_kb: bool = True):
        self.records: list[SourceRecord] = list(records)
        self.events: list[dict] = []
        self.in_kb = in_kb

    @property
    def key(self) -> SourceId:
        return min(r.id for r in self.records)

    def has(self, source: SourceTag) -> bool:
        return any(r.source is source for r in self.records)

    def by_priority(self, order: Sequence[SourceTag]) -> list[SourceRecord]:
        return sorted(self.records, key=lambda r: order.index(r.source))

    def pick(self, attr: str, order: Sequence[SourceTag]):
        for r in self.by_priority(order):
            value = getattr(r, attr)
            if value is not None:
                return value
        return None


@dataclass
class PartialKB:
    """Working state shared by the alignment steps."""

    clusters: list[Cluster] = field(default_factory=list)
    cluster_of: dict[SourceId, Cluster] = field(default_factory=dict)
    events: list[dict] = field(default_factory=list)
    counters: Counter = field(default_factory=Counter)

    def add_cluster(self, cluster: Cluster) -> Cluster:
        cluster.in_kb = True
        self.clusters.append(cluster)
        for r in cluster.records:
            self.cluster_of[r.id] = cluster
        return cluster

    def join(self, cluster: Cluster, record: SourceRecord) -> None:
        if cluster.has(record.source):
            raise AssertionError(f"one-to-one violated joining {record.id}")
        cluster.records.append(record)
        self.cluster_of[record.id] = cluster

    def log(self, cluster: Optional[Cluster], **event) -> dict:
        event = {k: v for k, v in event.items() if v is not None}
        event["_target"] = cluster
        self.events.append(event)
        if cluster is not None and event.get("kind") == "MERGE":
            cluster.events.append(event)
        return event

    def source_ids(self) -> set[SourceId]:
        return set(self.cluster_of)


def _linked(a: SourceRecord, b: SourceRecord) -> bool:
    return a.sameas.get(b.source) == b.id.native_id or b.sameas.get(a.source) == a.id.native_id


def step1_full_sameas(
    records: Iterable[SourceRecord], kb: Optional[PartialKB] = None
) -> tuple[PartialKB, list[SourceRecord]]:
    """Create entities from groups sameAs-linked across every LOD source present."""
    kb = kb if kb is not None else PartialKB()
    records = sorted(records, key=lambda r: r.id)
    present = {r.source for r in records} & LOD_SOURCES
    if len(present) < 2:
        return kb, records

    # Two records of one source claiming the same foreign id: all of them,
    # and the claimed record, sit out this step.
    claims = defaultdict(list)
    for r in records:
        for foreign, native in r.sameas.items():
            claims[(r.source, SourceId(foreign, native))].append(r)
    conflicted: set[SourceId] = set()
    for (source, target), claimants in sorted(claims.items(), key=lambda kv: (kv[0][0].rank, kv[0][1])):
        if len(claimants) > 1:
            ids = [c.id for c in claimants]
            conflicted.update(ids)
            conflicted.add(target)
            kb.counters["step1_conflicts"] += 1
            kb.log(
                None,
                step=1,
                kind="CONFLICT",
                record=str(target),
                claimants=[str(i) for i in ids],
            )

    pool = {
        r.id: r for r in records if r.source in LOD_SOURCES and r.id not in conflicted
    }
    adj: dict[SourceId, set[SourceId]] = defaultdict(set)
    for r in pool.values():
        for foreign, native in r.sameas.items():
            target = SourceId(foreign, native)
            if target in pool:
                adj[r.id].add(target)
                adj[target].add(r.id)

    seen: set[SourceId] = set()
    grouped: set[SourceId] = set()
    for start in sorted(pool):
        if start in seen or start not in adj:
            continue
        component, stack = [], [start]
        seen.add(start)
        while stack:
            node = stack.pop()
            component.append(pool[node])
            for nxt in adj[node]:
                if nxt not in seen:
                    seen.add(nxt)
                    stack.append(nxt)
        if not _is_full_clique(component, present):
            continue
        cluster = kb.add_cluster(Cluster(sorted(component, key=lambda r: r.id)))
        grouped.update(r.id for r in component)
        kb.counters["step1_entities"] += 1
        kb.log(cluster, step=1, kind="MERGE", record=str(cluster.key),
               members=[str(r.id) for r in cluster.records])
    return kb, [r for r in records if r.id not in grouped]


def _is_full_clique(component: list[SourceRecord], present: set[SourceTag]) -> bool:
    sources = [r.source for r in component]
    if len(sources) != len(present) or set(sources) != present:
        return False
    member = {r.source: r.id.native_id for r in component}
    for r in component:
        for foreign, native in r.sameas.items():
            if foreign in member and member[foreign] != native:
                return False
    return all(
        _linked(a, b) for i, a in enumerate(component) for b in component[i + 1 :]
    )


def step2_partial_sameas(
    kb: PartialKB,
    remaining: Iterable[SourceRecord],
    order: Sequence[SourceTag] = SOURCE_ORDER,
) -> tuple[PartialKB, list[SourceRecord]]:
    """Absorb partially sameAs-linked records, one source at a time.

    A record joins the first entity (by entity key) it is linked to that has
    no identifier yet for its source; when every linked entity already has
    one, or nothing is linked yet, it seeds a new entity. Records with no
    sameAs link to any record in the run are passed on to step 3.
    """
    remaining = list(remaining)
    everyone = {r.id: r for r in remaining}
    for cluster in kb.clusters:
        everyone.update((r.id, r) for r in cluster.records)

    # Who declares whom, over every record in the run.
    declared_by: dict[SourceId, set[SourceId]] = defaultdict(set)
    for r in everyone.values():
        for foreign, native in r.sameas.items():
            declared_by[SourceId(foreign, native)].add(r.id)

    def has_links(r: SourceRecord) -> bool:
        if any(SourceId(f, n) in everyone for f, n in r.sameas.items()):
            return True
        return bool(declared_by.get(r.id))

    by_source = defaultdict(list)
    for r in remaining:
        by_source[r.source].append(r)

    passed = []
    for source in order:
        for r in sorted(by_source.get(source, ()), key=lambda r: r.id.native_id):
            if not has_links(r):
                passed.append(r)
                continue
            linked = {}
            for foreign, native in r.sameas.items():
                c = kb.cluster_of.get(SourceId(foreign, native))
                if c is not None:
                    linked[id(c)] = c
            for other in declared_by.get(r.id, ()):
                c = kb.cluster_of.get(other)
                if c is not None:
                    linked[id(c)] = c
            candidates = sorted(linked.values(), key=lambda c: c.key)
            eligible = [c for c in candidates if not c.has(r.source)]
            if eligible:
                target = eligible[0]
                kb.join(target, r)
                kb.counters["step2_joins"] += 1
                kb.log(target, step=2, kind="MERGE", record=str(r.id))
                continue
            cluster = kb.add_cluster(Cluster([r]))
            if candidates:
                kb.counters["step2_blocked"] += 1
                kb.log(candidates[0], step=2, kind="BLOCKED", record=str(r.id),
                       reason="source slot taken")
            kb.counters["step2_seeded"] += 1
    return kb, sorted(passed, key=lambda r: r.id)


@dataclass(frozen=True)
class RuleOutcome:
    rule: int
    accepted: bool
    score: float
    distance_km: Optional[float] = None
    strong_pairs: Optional[int] = None


def evaluate_rules(
    score: float,
    a_point: Optional[GeoPoint],
    b_point: Optional[GeoPoint],
    a_city: Optional[str],
    b_city: Optional[str],
    a_country: Optional[str],
    b_country: Optional[str],
    strong_pairs: int,
    cfg: MergeConfig,
) -> RuleOutcome:
    """Apply the first rule whose data requirements hold.

    City and country arguments are comparison keys (see :func:`location_key`).
    ``strong_pairs`` is the number of distinct alias pairs scoring at least
    ``cfg.rule3_cos``; it is only consulted by rule 3.
    """
    if a_point is not None and b_point is not None:
        dist = haversine_km(a_point, b_point)
        ok = score >= cfg.rule1_cos and dist <= cfg.rule1_max_km
        return RuleOutcome(1, ok, score, distance_km=dist)
    if a_city and b_city and a_country and b_country:
        ok = a_city == b_city and a_country == b_country and score >= cfg.rule2_cos
        return RuleOutcome(2, ok, score)
    ok = (
        a_country is not None
        and a_country == b_country
        and strong_pairs >= cfg.rule3_min_aliases
    )
    return RuleOutcome(3, ok, score, strong_pairs=strong_pairs)


def build_alias_index(
    records: Iterable[SourceRecord], cfg: MergeConfig, mode: IndexMode = IndexMode.EXACT
) -> CandidateIndex:
    """Global TF-IDF space over the distinct alias texts of every record."""
    items = [(r.id, text) for r in records for text in r.alias_texts()]
    vocab = build_vocabulary([text for _, text in items], min_df=cfg.min_df)
    return CandidateIndex(vocab, items, mode=mode)


def step3_string_merge(
    kb: PartialKB,
    remaining: Iterable[SourceRecord],
    cfg: MergeConfig,
    index: CandidateIndex,
) -> tuple[PartialKB, list[SourceRecord]]:
    """Merge each unmatched record into its best geo-compatible candidate.

    Records are visited in ``source_order`` then native id. A record already
    absorbed by an earlier record is skipped. Candidates are the top-K
    entities (or still-unmerged records) by best alias cosine; the first
    candidate accepted by the rules and not blocked by one-to-one wins.
    """
    order = cfg.source_order
    remaining = sorted(remaining, key=lambda r: (cfg.rank(r.source), r.id.native_id))
    for r in remaining:
        kb.cluster_of[r.id] = Cluster([r], in_kb=False)

    owner_pos = {owner: i for i, owner in enumerate(index.owners)}
    starts = index._owner_starts
    ends = np.append(starts[1:], len(index))
    col_text = index.alias_texts

    for rec in remaining:
        own = kb.cluster_of[rec.id]
        if len(own.records) > 1 or rec.id not in owner_pos:
            continue
        q_texts = rec.alias_texts()
        rows = index.alias_scores(q_texts)
        if rows.size == 0:
            continue
        best_alias = rows.max(axis=0)
        owner_best = np.maximum.reduceat(best_alias, starts)

        # Walk owners by descending score, gathering distinct clusters.
        walk = np.lexsort((np.arange(len(owner_best)), -owner_best))
        found: dict[int, tuple[float, Cluster]] = {}
        kth = None
        for pos in walk:
            s = float(owner_best[pos])
            if s <= 0.0 or (kth is not None and s < kth):
                break
            c = kb.cluster_of.get(index.owners[pos])
            if c is None or c is own or id(c) in found:
                continue
            found[id(c)] = (s, c)
            if len(found) == cfg.k:
                kth = s
        ranked = sorted(found.values(), key=lambda sc: (-sc[0], sc[1].key))

        r_city = location_key(rec.city)
        r_country = location_key(rec.country)
        for score, cand in ranked:
            strong = set()
            for member in cand.records:
                p = owner_pos.get(member.id)
                if p is None:
                    continue
                block = rows[:, starts[p] : ends[p]]
                for qi, ci in zip(*np.nonzero(block >= cfg.rule3_cos)):
                    strong.add((q_texts[qi], col_text[starts[p] + ci]))
            outcome = evaluate_rules(
                score,
                rec.point,
                cand.pick("point", order),
                r_city,
                location_key(cand.pick("city", order)),
                r_country,
                location_key(cand.pick("country", order)),
                len(strong),
                cfg,
            )
            if not outcome.accepted:
                continue
            if cand.has(rec.source):
                kb.counters["step3_blocked"] += 1
                kb.log(cand, step=3, kind="BLOCKED", rule=outcome.rule, record=str(rec.id),
                       score=outcome.score, reason="source slot taken")
                continue
            kb.join(cand, rec)
            if not cand.in_kb:
                kb.add_cluster(cand)
            kb.counters[f"step3_rule{outcome.rule}"] += 1
            kb.log(cand, step=3, kind="MERGE", rule=outcome.rule, record=str(rec.id),
                   score=outcome.score,
                   distance_km=None if outcome.distance_km is None else round(outcome.distance_km, 6),
                   strong_pairs=outcome.strong_pairs)
            break

    left = []
    for r in remaining:
        c = kb.cluster_of[r.id]
        if c.in_kb:
            continue
        del kb.cluster_of[r.id]
        left.append(r)
    return kb, sorted(left, key=lambda r: r.id)


def step4_residual(kb: PartialKB, remaining: Iterable[SourceRecord]) -> PartialKB:
    for r in sorted(remaining, key=lambda r: r.id):
        kb.add_cluster(Cluster([r]))
        kb.counters["step4_singletons"] += 1
    return kb


@dataclass(frozen=True)
class MergedEntity:
    kb_id: str
    ids: dict[SourceTag, str]
    preferred_name: str
    aliases: tuple[Alias, ...]
    types: frozenset[SemanticType]
    country: Optional[LocationRef] = None
    state: Optional[LocationRef] = None
    city: Optional[LocationRef] = None
    zip: Optional[str] = None
    point: Optional[GeoPoint] = None
    provenance: tuple[dict, ...] = ()

    def __hash__(self):
        return hash(self.kb_id)

    def source_ids(self) -> list[SourceId]:
        return sorted(SourceId(s, n) for s, n in self.ids.items())

    def languages(self) -> set[str]:
        return {a.lang for a in self.aliases if a.lang}


def _preferred_name(records: Sequence[SourceRecord]) -> str:
    head = records[0]
    for alias in head.aliases:
        if alias.lang == "en":
            return alias.text
    return head.aliases[0].text


def finalize_cluster(cluster: Cluster, kb_id: str, cfg: MergeConfig) -> MergedEntity:
    order = cfg.source_order
    members = cluster.by_priority(order)
    if len({r.source for r in members}) != len(members):
        raise AssertionError(f"{kb_id}: two records of one source")
    return MergedEntity(
        kb_id=kb_id,
        ids={r.source: r.id.native_id for r in members},
        preferred_name=_preferred_name(members),
        aliases=tuple(sorted({a for r in members for a in r.aliases})),
        types=frozenset(t for r in members for t in r.types),
        country=cluster.pick("country", order),
        state=cluster.pick("state", order),
        city=cluster.pick("city", order),
        zip=cluster.pick("zip", order),
        point=cluster.pick("point", order),
        provenance=tuple(_public_event(e, kb_id) for e in cluster.events),
    )


def _public_event(event: dict, kb_id: Optional[str]) -> dict:
    out = {k: v for k, v in event.items() if not k.startswith("_")}
    if kb_id is not None:
        out["kb_id"] = kb_id
    return out


@dataclass
class KnowledgeBase:
    entities: list[MergedEntity]
    by_source_id: dict[SourceId, str]
    config: MergeConfig
    counters: dict = field(default_factory=dict)
    events: list[dict] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.entities)

    def __iter__(self):
        return iter(self.entities)

    def get(self, kb_id: str) -> MergedEntity:
        return self._by_kb_id()[kb_id]

    def _by_kb_id(self) -> dict[str, MergedEntity]:
        cache = getattr(self, "_kb_cache", None)
        if cache is None or len(cache) != len(self.entities):
            cache = {e.kb_id: e for e in self.entities}
            self._kb_cache = cache
        return cache

    def partition(self) -> set[frozenset[SourceId]]:
        return {frozenset(e.source_ids()) for e in self.entities}

    def metadata(self) -> dict:
        return {
            "entity_count": len(self.entities),
            "config": self.config.as_dict(),
            "config_hash": self.config.config_hash(),
            "counters": dict(sorted(self.counters.items())),
        }


def build_kb(
    records: Iterable[SourceRecord],
    cfg: Optional[MergeConfig] = None,
    index_mode: IndexMode = IndexMode.EXACT,
) -> KnowledgeBase:
    """Run steps 1-4 and number the entities.

    Entities are ordered by their smallest constituent identifier and
    numbered ``MTF00000001`` upwards, so the result is a pure function of the
    record set and the configuration.
    """
    cfg = cfg or MergeConfig()
    records = list(records)
    ids = Counter(r.id for r in records)
    dupes = [str(i) for i, n in ids.items() if n > 1]
    if dupes:
        raise ValueError(f"duplicate record identifiers: {sorted(dupes)[:5]}")

    kb, remaining = step1_full_sameas(records)
    kb, remaining = step2_partial_sameas(kb, remaining, cfg.source_order)
    index = build_alias_index(records, cfg, mode=index_mode)
    kb, remaining = step3_string_merge(kb, remaining, cfg, index)
    kb = step4_residual(kb, remaining)

    clusters = sorted(kb.clusters, key=lambda c: c.key)
    kb_ids = {id(c): f"{KB_ID_PREFIX}{i:08d}" for i, c in enumerate(clusters, 1)}
    entities = [finalize_cluster(c, kb_ids[id(c)], cfg) for c in clusters]
    by_source_id = {r.id: kb_ids[id(c)] for c in clusters for r in c.records}
    events = []
    for event in kb.events:
        target = event.get("_target")
        events.append(_public_event(event, kb_ids.get(id(target)) if target is not None else None))
    counters = dict(kb.counters)
    counters["records"] = len(records)
    counters["entities"] = len(entities)
    return KnowledgeBase(entities, by_source_id, cfg, counters, events)


def check_one_to_one(kb: KnowledgeBase) -> list[str]:
    """Return a description of every one-to-one violation (empty when sound)."""
    problems = []
    seen: dict[SourceId, str] = {}
    for e in kb.entities:
        for sid in e.source_ids():
            if sid in seen:
                problems.append(f"{sid} in {seen[sid]} and {e.kb_id}")
            seen[sid] = e.kb_id
    return problems
