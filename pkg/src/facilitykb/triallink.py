"""Link clinical-trial site mentions to knowledge-base facilities.

Registry dumps are delimited text with a header row naming the columns
``trial_id, facility_name, city, zip, state, country`` (any order, extra
columns ignored). Distinct sites are keyed on (name, city, zip, state,
country); a site mentioned by several trials is linked once.
"""

from __future__ import annotations

import csv
import logging
import re
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence

from .align import KnowledgeBase, location_key
from .core import Level, UnreadableFileError, normalize_name
from .geo import Gazetteer, link_location_text
from .textmatch import DEFAULT_K, MIN_DF, CandidateIndex, IndexMode, build_vocabulary

logger = logging.getLogger(__name__)

LINK_THRESHOLD = 0.7
REGISTRY_COLUMNS = ("trial_id", "facility_name", "city", "zip", "state", "country")


@dataclass(frozen=True, order=True)
class TrialSite:
    raw_name: str
    city: Optional[str] = None
    zip: Optional[str] = None
    state: Optional[str] = None
    country: Optional[str] = None

    def __post_init__(self):
        if not self.raw_name or not self.raw_name.strip():
            raise ValueError("site name must be non-empty")

    @property
    def key(self) -> tuple[str, str, str, str, str]:
        return (self.raw_name, self.city or "", self.zip or "", self.state or "", self.country or "")


@dataclass(frozen=True)
class SiteMention:
    trial_id: str
    site: TrialSite


@dataclass
class Registry:
    mentions: list[SiteMention]
    skipped: int = 0

    @property
    def sites(self) -> list[TrialSite]:
        """Distinct sites in first-mention order."""
        return list(dict.fromkeys(m.site for m in self.mentions))

    @property
    def multiplicity(self) -> Counter:
        return Counter(m.site for m in self.mentions)

    @property
    def trial_ids(self) -> set[str]:
        return {m.trial_id for m in self.mentions}

    def sites_per_trial(self) -> float:
        trials = self.trial_ids
        return len(self.mentions) / len(trials) if trials else 0.0


def _cell(row: dict, column: str) -> Optional[str]:
    value = row.get(column)
    if value is None:
        return None
    value = value.strip()
    return value or None


def parse_registry_dump(path, delimiter: str = "\t") -> Registry:
    path = Path(path)
    try:
        fh = path.open(encoding="utf-8", newline="")
    except OSError as exc:
        raise UnreadableFileError(f"cannot read registry {path}: {exc}") from exc
    mentions, skipped = [], 0
    with fh:
        try:
            reader = csv.DictReader(fh, delimiter=delimiter)
            missing = [c for c in ("trial_id", "facility_name") if c not in (reader.fieldnames or ())]
            if missing:
                raise UnreadableFileError(f"{path}: header lacks columns {missing}")
            for row in reader:
                trial = _cell(row, "trial_id")
                name = _cell(row, "facility_name")
                if not trial or not name or None in row:
                    skipped += 1
                    continue
                site = TrialSite(
                    name,
                    city=_cell(row, "city"),
                    zip=_cell(row, "zip"),
                    state=_cell(row, "state"),
                    country=_cell(row, "country"),
                )
                mentions.append(SiteMention(trial, site))
        except (csv.Error, UnicodeDecodeError) as exc:
            raise UnreadableFileError(f"cannot parse registry {path}: {exc}") from exc
    if skipped:
        logger.warning("%s: skipped %d malformed rows", path, skipped)
    return Registry(mentions, skipped)


@dataclass(frozen=True)
class VaguePattern:
    """SQL ``LIKE``-style pattern: ``%`` matches any run of characters, case-insensitively."""

    pattern: str
    label: str = ""

    def __post_init__(self):
        if not self.label:
            object.__setattr__(self, "label", self.pattern)
        parts = [re.escape(p) for p in self.pattern.split("%")]
        object.__setattr__(
            self, "_regex", re.compile("".join(p if i == 0 else ".*" + p for i, p in enumerate(parts)),
                                       re.IGNORECASE | re.DOTALL)
        )

    def matches(self, name: str) -> bool:
        return self._regex.fullmatch(name.strip()) is not None


DEFAULT_VAGUE_PATTERNS: tuple[VaguePattern, ...] = tuple(
    VaguePattern(p)
    for p in (
        "%Investigational Site%",
        "%Facility #%",
        "%Investigative Site%",
        "%Hospital #%",
        "%Research Site%",
        "Site%",
        "Local Ins%",
        "Local Inv%",
        "Local Hosp%",
        "Hospital Local%",
        "%local%office%",
        "%local%information%",
        "%local%authority of%",
        "Azienda%Sanitaria Locale%",
        "Local primary school%",
    )
)


def detect_vague(name: str, patterns: Sequence[VaguePattern] = DEFAULT_VAGUE_PATTERNS) -> Optional[str]:
    for pat in patterns:
        if pat.matches(name):
            return pat.label
    return None


@dataclass(frozen=True)
class TrialSiteLink:
    site: TrialSite
    kb_id: str
    score: float
    method: str = "STRING_MATCH"


@dataclass
class LinkResult:
    links: list[TrialSiteLink] = field(default_factory=list)
    unmatched: list[TrialSite] = field(default_factory=list)
    vague: list[tuple[TrialSite, str]] = field(default_factory=list)


def build_entity_index(
    kb: KnowledgeBase, mode: IndexMode = IndexMode.EXACT, min_df: int = MIN_DF
) -> CandidateIndex:
    items = []
    for e in kb.entities:
        for text in dict.fromkeys(a.text for a in e.aliases):
            items.append((e.kb_id, text))
    vocab = build_vocabulary([t for _, t in items], min_df=min_df)
    return CandidateIndex(vocab, items, mode=mode)


def _same_place(text: str, ref, level: Level, gaz: Optional[Gazetteer]) -> bool:
    if normalize_name(text) == location_key(ref):
        return True
    if gaz is None or ref.geonames_id is None:
        return False
    hint = None
    if level is Level.CITY:
        place = gaz.get(ref.geonames_id)
        hint = place.country_id if place is not None else None
    return link_location_text(text, level, hint, gaz) == ref.geonames_id


def _location_compatible(site: TrialSite, entity, gaz: Optional[Gazetteer] = None) -> bool:
    """Fields present on both sides must agree; absent fields never block."""
    pairs = ((site.country, entity.country, Level.COUNTRY), (site.city, entity.city, Level.CITY))
    for text, ref, level in pairs:
        if text and ref is not None and not _same_place(text, ref, level, gaz):
            return False
    return True


def link_sites(
    sites: Iterable[TrialSite],
    kb: KnowledgeBase,
    index: Optional[CandidateIndex] = None,
    threshold: float = LINK_THRESHOLD,
    k: int = DEFAULT_K,
    patterns: Sequence[VaguePattern] = DEFAULT_VAGUE_PATTERNS,
    gazetteer: Optional[Gazetteer] = None,
) -> LinkResult:
    """Divert vague names, then assign sites to facilities one-to-one.

    Every (site, facility) candidate with cosine strictly above ``threshold``
    and compatible location is collected, then accepted greedily by
    descending score (ties by site key, then kb_id) while both sides are free.
    With a gazetteer, site country and city texts may also match a
    facility's location through the gazetteer's alternate names.
    """
    index = index if index is not None else build_entity_index(kb)
    result = LinkResult()
    distinct = sorted(set(sites), key=lambda s: s.key)
    to_match = []
    for site in distinct:
        label = detect_vague(site.raw_name, patterns)
        if label is not None:
            result.vague.append((site, label))
        else:
            to_match.append(site)

    candidates = []
    for site in to_match:
        for kb_id, score in index.topk(site.raw_name, k):
            if score <= threshold:
                break
            if _location_compatible(site, kb.get(kb_id), gazetteer):
                candidates.append((-score, site.key, kb_id, site))
    candidates.sort(key=lambda c: c[:3])

    used_sites, used_entities = set(), set()
    for neg_score, _, kb_id, site in candidates:
        if site in used_sites or kb_id in used_entities:
            continue
        used_sites.add(site)
        used_entities.add(kb_id)
        result.links.append(TrialSiteLink(site, kb_id, -neg_score))
    result.unmatched = [s for s in to_match if s not in used_sites]
    result.links.sort(key=lambda link: link.site.key)
    return result


def link_summary(registry: Registry, result: LinkResult) -> dict:
    """Counts and percentages over distinct sites and over mentions."""
    mult = registry.multiplicity
    linked = {link.site for link in result.links}
    vague = {s for s, _ in result.vague}
    n_sites = len(mult)
    n_mentions = sum(mult.values())

    def pct(part, whole):
        return round(100.0 * part / whole, 4) if whole else 0.0

    out = {
        "trials": len(registry.trial_ids),
        "mentions": n_mentions,
        "distinct_sites": n_sites,
        "sites_per_trial": round(registry.sites_per_trial(), 4),
        "skipped_rows": registry.skipped,
    }
    for name, group in (("linked", linked), ("vague", vague), ("unmatched", set(result.unmatched))):
        sites = len(group)
        mentions = sum(mult[s] for s in group)
        out[f"{name}_sites"] = sites
        out[f"{name}_mentions"] = mentions
        out[f"pct_{name}_of_sites"] = pct(sites, n_sites)
        out[f"pct_{name}_of_mentions"] = pct(mentions, n_mentions)
    out["vague_by_pattern"] = dict(sorted(Counter(label for _, label in result.vague).items()))
    return out


def write_link_report(path, registry: Registry, result: LinkResult) -> int:
    """One row per mention: the site, its outcome, and the facility when linked."""
    by_site = {link.site: link for link in result.links}
    vague = dict(result.vague)
    rows = []
    for m in sorted(registry.mentions, key=lambda m: (m.trial_id, m.site.key)):
        link = by_site.get(m.site)
        if link is not None:
            outcome = ("LINKED", link.kb_id, f"{link.score:.6f}", link.method)
        elif m.site in vague:
            outcome = ("VAGUE", "", "", vague[m.site])
        else:
            outcome = ("UNMATCHED", "", "", "")
        rows.append((m.trial_id, *m.site.key, *outcome))
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, delimiter="\t", lineterminator="\n")
        writer.writerow(
            ("trial_id", "facility_name", "city", "zip", "state", "country",
             "outcome", "kb_id", "score", "detail")
        )
        writer.writerows(rows)
    return len(rows)
