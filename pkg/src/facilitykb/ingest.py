"""Load normalized source dumps, filter blacklisted concepts, and resolve
Wikidata administrative territories.

A dump is UTF-8 JSON Lines, one concept per line::

    {"source": "wikidata", "id": "Q123", "types": ["HEALTHCARE_ORGANIZATION"],
     "aliases": [{"text": "Foo Hospital", "lang": "en"}],
     "country": {"name": "Netherlands", "geonames_id": "2750405"},
     "state": {...}, "city": {...},
     "admin_territories": [{"geonames_id": "2759794"}],
     "zip": "1081 HN", "lat": 52.33, "lon": 4.86,
     "sameas": {"dbpedia": "Foo_Hospital"}}

Unknown fields are ignored. A line that cannot be turned into a valid
record is skipped and counted; a line naming a different source than the
one expected aborts the load.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, NamedTuple, Optional

from .core import (
    Alias,
    GeoPoint,
    Level,
    LocationRef,
    SemanticType,
    SourceId,
    SourceMismatchError,
    SourceTag,
    UnreadableFileError,
    normalize_geopoint,
    validate_source_id,
)
from .geo import Gazetteer, classify_territory, standardize

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SourceRecord:
    id: SourceId
    types: frozenset[SemanticType]
    aliases: tuple[Alias, ...]
    country: Optional[LocationRef] = None
    state: Optional[LocationRef] = None
    city: Optional[LocationRef] = None
    admin_territories: tuple[LocationRef, ...] = ()
    zip: Optional[str] = None
    point: Optional[GeoPoint] = None
    sameas: dict[SourceTag, str] = field(default_factory=dict, hash=False, compare=True)

    def __post_init__(self):
        if not self.aliases:
            raise ValueError(f"{self.id}: at least one alias is required")
        if not self.types:
            raise ValueError(f"{self.id}: at least one semantic type is required")
        if self.id.source in self.sameas:
            raise ValueError(f"{self.id}: sameAs must not point into its own source")

    @property
    def source(self) -> SourceTag:
        return self.id.source

    def alias_texts(self) -> list[str]:
        """Distinct alias texts in first-seen order."""
        seen = []
        for alias in self.aliases:
            if alias.text not in seen:
                seen.append(alias.text)
        return seen


# Table of concepts that name a category rather than a facility.
DEFAULT_BLACKLIST_DBPEDIA = (
    "Hospital",
    "Rehabilitation_hospital",
    "University",
    "School",
    "Community_college",
    "Sixth_form_college",
    "Professional_school",
    "Reform_school",
)
DEFAULT_BLACKLIST_UMLS = (
    "C3828423", "C0557812", "C0027689", "C0681333", "C1318228", "C0871230",
    "C0337962", "C0036375", "C0557808", "C1562642", "C0598858", "C0587907",
    "C3833703", "C3838700", "C0020021", "C0442592", "C3839733", "C3810847",
    "C3840771", "C0237680", "C3834491",
)


@dataclass(frozen=True)
class Blacklist:
    entries: frozenset[SourceId] = frozenset()

    def __contains__(self, sid: SourceId) -> bool:
        return sid in self.entries

    def __len__(self) -> int:
        return len(self.entries)

    @classmethod
    def default(cls) -> "Blacklist":
        ids = [SourceId(SourceTag.DBPEDIA, name) for name in DEFAULT_BLACKLIST_DBPEDIA]
        ids += [SourceId(SourceTag.UMLS, cui) for cui in DEFAULT_BLACKLIST_UMLS]
        return cls(frozenset(ids))

    @classmethod
    def load(cls, path) -> "Blacklist":
        """Read ``SOURCE:native_id`` lines; blank lines and ``#`` comments are ignored."""
        path = Path(path)
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as exc:
            raise UnreadableFileError(f"cannot read blacklist {path}: {exc}") from exc
        ids = set()
        for lineno, line in enumerate(text.splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            try:
                ids.add(SourceId.parse(line))
            except ValueError as exc:
                logger.warning("%s:%d: ignoring blacklist entry: %s", path, lineno, exc)
        return cls(frozenset(ids))


class LoadResult(NamedTuple):
    records: list[SourceRecord]
    skipped: int


def _location(obj, level: Level) -> Optional[LocationRef]:
    if obj is None:
        return None
    if not isinstance(obj, dict):
        raise ValueError(f"{level.value.lower()} must be an object")
    gid = obj.get("geonames_id")
    gid = str(gid).strip() if gid not in (None, "") else None
    name = obj.get("name")
    name = name.strip() if isinstance(name, str) and name.strip() else None
    if gid is None and name is None:
        return None
    return LocationRef(
        level,
        geonames_id=gid,
        name=name,
        feature_class=obj.get("feature_class") or None,
        feature_code=obj.get("feature_code") or None,
    )


def parse_record(obj: dict) -> SourceRecord:
    """Build a record from one decoded dump line. Raises ValueError when invalid."""
    if not isinstance(obj, dict):
        raise ValueError("record must be a JSON object")
    source = SourceTag.parse(str(obj["source"]))
    sid = SourceId(source, str(obj["id"]).strip())
    if not validate_source_id(sid):
        raise ValueError(f"invalid identifier {sid}")

    types = frozenset(SemanticType.parse(t) for t in obj.get("types") or ())
    aliases = tuple(
        Alias(a["text"], a.get("lang")) if isinstance(a, dict) else Alias(a)
        for a in obj.get("aliases") or ()
    )

    territories = []
    for item in obj.get("admin_territories") or ():
        if isinstance(item, (str, int)):
            item = {"geonames_id": str(item)}
        # Territory level is unknown until resolved; park as CITY placeholder.
        ref = _location(item, Level.CITY)
        if ref is not None:
            territories.append(ref)

    sameas = {}
    for key, native in (obj.get("sameas") or {}).items():
        foreign = SourceTag.parse(key)
        if foreign is source or native in (None, ""):
            continue
        fid = SourceId(foreign, str(native).strip())
        if validate_source_id(fid):
            sameas[foreign] = fid.native_id
        else:
            logger.debug("%s: dropping invalid sameAs %s", sid, fid)

    zip_code = obj.get("zip")
    zip_code = str(zip_code).strip() if zip_code not in (None, "") else None

    return SourceRecord(
        id=sid,
        types=types,
        aliases=aliases,
        country=_location(obj.get("country"), Level.COUNTRY),
        state=_location(obj.get("state"), Level.STATE),
        city=_location(obj.get("city"), Level.CITY),
        admin_territories=tuple(territories),
        zip=zip_code or None,
        point=normalize_geopoint(obj.get("lat"), obj.get("lon")),
        sameas=sameas,
    )


def load_source_dump(path, expected_source: SourceTag) -> LoadResult:
    path = Path(path)
    try:
        fh = path.open(encoding="utf-8")
    except OSError as exc:
        raise UnreadableFileError(f"cannot read dump {path}: {exc}") from exc

    records, skipped = [], 0
    with fh:
        try:
            lines = list(fh)
        except (OSError, UnicodeDecodeError) as exc:
            raise UnreadableFileError(f"cannot read dump {path}: {exc}") from exc
    for lineno, line in enumerate(lines, 1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError:
            skipped += 1
            continue
        declared = obj.get("source") if isinstance(obj, dict) else None
        if isinstance(declared, str):
            try:
                tag = SourceTag.parse(declared)
            except ValueError:
                tag = None
            if tag is not None and tag is not expected_source:
                raise SourceMismatchError(
                    f"{path}:{lineno}: record source {declared!r} in a "
                    f"{expected_source.value} dump"
                )
        try:
            records.append(parse_record(obj))
        except (KeyError, TypeError, ValueError, AttributeError) as exc:
            logger.debug("%s:%d: skipped: %s", path, lineno, exc)
            skipped += 1
    if skipped:
        logger.warning("%s: skipped %d malformed lines", path, skipped)
    return LoadResult(records, skipped)


def apply_blacklist(
    records: Iterable[SourceRecord], bl: Blacklist
) -> tuple[list[SourceRecord], int]:
    kept, removed = [], 0
    for rec in records:
        if rec.id in bl:
            removed += 1
        else:
            kept.append(rec)
    return kept, removed


def resolve_admin_territory(
    record: SourceRecord, gaz: Gazetteer
) -> tuple[SourceRecord, int]:
    """Turn Wikidata administrative territories into city/state fields.

    Returns the rewritten record and the number of territories that could not
    be placed. The first city-level and first state-level territory win;
    fields the record already carries are kept.
    """
    if not record.admin_territories:
        return record, 0
    city, state = record.city, record.state
    dropped = 0
    for ref in record.admin_territories:
        level = classify_territory(ref.geonames_id, gaz)
        place = gaz.get(ref.geonames_id)
        if level is Level.CITY and city is None:
            city = standardize(LocationRef(Level.CITY, place.geonames_id), place)
        elif level is Level.STATE and state is None:
            state = standardize(LocationRef(Level.STATE, place.geonames_id), place)
        elif level not in (Level.CITY, Level.STATE):
            dropped += 1
    return replace(record, city=city, state=state, admin_territories=()), dropped
