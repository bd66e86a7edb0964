"""Gazetteer lookups, great-circle distance and place-name linking.

The gazetteer is read from a GeoNames main-export file (``allCountries.txt``
or a per-country extract). Column indices, zero based::

    0 geonameid        5 longitude        10 admin1 code   14 population
    1 name             6 feature class    11 admin2 code   15 elevation
    2 asciiname        7 feature code     12 admin3 code   16 dem
    3 alternatenames   8 country code     13 admin4 code   17 timezone
    4 latitude         9 cc2                               18 modification date

Only three kinds of rows are kept: independent political entities
(feature class ``A``, code ``PCL*`` or ``TERR``) as countries, first-level
administrative divisions (``A.ADM1``) as states, and populated places
(class ``P``) with more than 500 inhabitants as cities.
"""

from __future__ import annotations

import csv
import logging
import math
from collections import defaultdict
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Optional

from .core import (
    GeoPoint,
    Level,
    LocationRef,
    UnreadableFileError,
    normalize_geopoint,
    normalize_name,
)

logger = logging.getLogger(__name__)

EARTH_RADIUS_KM = 6371.0
CITY_MIN_POPULATION = 500

COL_ID, COL_NAME, COL_ASCII, COL_ALT = 0, 1, 2, 3
COL_LAT, COL_LON, COL_FCLASS, COL_FCODE, COL_CC = 4, 5, 6, 7, 8
COL_POPULATION = 14
MIN_COLUMNS = 15


@dataclass(frozen=True)
class Place:
    geonames_id: str
    name: str
    level: Level
    feature_class: str
    feature_code: str
    alt_names: tuple[str, ...] = ()
    point: Optional[GeoPoint] = None
    country_id: Optional[str] = None
    country_code: Optional[str] = None
    population: int = 0


def classify_row(feature_class: str, feature_code: str, population: int) -> Level:
    if feature_class == "A" and (feature_code.startswith("PCL") or feature_code == "TERR"):
        return Level.COUNTRY
    if feature_class == "A" and feature_code == "ADM1":
        return Level.STATE
    if feature_class == "P" and population > CITY_MIN_POPULATION:
        return Level.CITY
    return Level.OTHER


@dataclass
class Gazetteer:
    places: dict[str, Place] = field(default_factory=dict)
    name_index: dict[str, set[str]] = field(default_factory=lambda: defaultdict(set))

    @classmethod
    def from_places(cls, places: Iterable[Place]) -> "Gazetteer":
        gaz = cls()
        for place in places:
            gaz.add(place)
        return gaz

    def add(self, place: Place) -> None:
        if place.level is Level.OTHER:
            return
        self.places[place.geonames_id] = place
        for name in (place.name, *place.alt_names):
            key = normalize_name(name)
            if key:
                self.name_index[key].add(place.geonames_id)

    def get(self, geonames_id: Optional[str]) -> Optional[Place]:
        if geonames_id is None:
            return None
        return self.places.get(geonames_id)

    def __len__(self) -> int:
        return len(self.places)


def load_gazetteer(path) -> Gazetteer:
    """Build a gazetteer from a GeoNames tab-separated export.

    Rows below the city population cutoff and rows of other feature kinds are
    dropped. States and cities get their ``country_id`` from the country row
    sharing their ISO country code, so the file must contain the country rows.
    """
    path = Path(path)
    try:
        fh = path.open(encoding="utf-8", newline="")
    except OSError as exc:
        raise UnreadableFileError(f"cannot read gazetteer {path}: {exc}") from exc

    rows = []
    skipped = 0
    with fh:
        for raw in csv.reader(fh, delimiter="\t", quoting=csv.QUOTE_NONE):
            if not raw or raw[0].startswith("#"):
                continue
            if len(raw) < MIN_COLUMNS:
                skipped += 1
                continue
            try:
                population = int(raw[COL_POPULATION] or 0)
            except ValueError:
                skipped += 1
                continue
            level = classify_row(raw[COL_FCLASS], raw[COL_FCODE], population)
            if level is Level.OTHER:
                continue
            rows.append((raw, level, population))
    if skipped:
        logger.warning("gazetteer %s: skipped %d malformed rows", path, skipped)

    country_by_code = {
        raw[COL_CC]: raw[COL_ID] for raw, level, _ in rows if level is Level.COUNTRY
    }
    gaz = Gazetteer()
    for raw, level, population in rows:
        alts = tuple(a for a in raw[COL_ALT].split(",") if a.strip())
        if raw[COL_ASCII] and raw[COL_ASCII] != raw[COL_NAME]:
            alts = (raw[COL_ASCII], *alts)
        if level is Level.COUNTRY:
            country_id = raw[COL_ID]
        else:
            country_id = country_by_code.get(raw[COL_CC])
            if country_id is None:
                logger.debug("dropping %s: no country row for %r", raw[COL_ID], raw[COL_CC])
                continue
        gaz.add(
            Place(
                geonames_id=raw[COL_ID],
                name=raw[COL_NAME],
                level=level,
                feature_class=raw[COL_FCLASS],
                feature_code=raw[COL_FCODE],
                alt_names=alts,
                point=normalize_geopoint(raw[COL_LAT], raw[COL_LON]),
                country_id=country_id,
                country_code=raw[COL_CC] or None,
                population=population,
            )
        )
    return gaz


def haversine_km(a: GeoPoint, b: GeoPoint) -> float:
    """Great-circle distance in kilometres on a sphere of radius 6371 km."""
    if a == b:
        return 0.0
    phi1, phi2 = math.radians(a.lat), math.radians(b.lat)
    dphi = phi2 - phi1
    dlmb = math.radians(b.lon - a.lon)
    h = math.sin(dphi / 2) ** 2 + math.cos(phi1) * math.cos(phi2) * math.sin(dlmb / 2) ** 2
    h = min(1.0, max(0.0, h))
    return 2 * EARTH_RADIUS_KM * math.asin(math.sqrt(h))


def classify_territory(geonames_id: Optional[str], gaz: Gazetteer) -> Level:
    place = gaz.get(geonames_id)
    return place.level if place is not None else Level.OTHER


def link_location_text(
    name: str, level: Level, country_hint: Optional[str], gaz: Gazetteer
) -> Optional[str]:
    """Exact normalized-name lookup; returns None unless exactly one place qualifies."""
    key = normalize_name(name)
    if not key:
        return None
    hits = []
    for gid in gaz.name_index.get(key, ()):
        place = gaz.places[gid]
        if place.level is not level:
            continue
        if country_hint is not None and place.country_id != country_hint:
            continue
        hits.append(gid)
    return hits[0] if len(hits) == 1 else None


@dataclass
class LinkStats:
    """Counts of location fields by how they were resolved."""

    mapped: int = 0
    string_linked: int = 0
    unlinked: int = 0
    missing: int = 0

    def merge(self, other: "LinkStats") -> None:
        self.mapped += other.mapped
        self.string_linked += other.string_linked
        self.unlinked += other.unlinked
        self.missing += other.missing

    def as_dict(self) -> dict:
        total = self.mapped + self.string_linked + self.unlinked + self.missing
        out = {
            "mapped": self.mapped,
            "string_linked": self.string_linked,
            "unlinked": self.unlinked,
            "missing": self.missing,
            "total": total,
        }
        for key in ("mapped", "string_linked", "unlinked", "missing"):
            out[f"pct_{key}"] = round(100.0 * out[key] / total, 4) if total else 0.0
        return out


def standardize(ref: LocationRef, place: Place) -> LocationRef:
    return replace(
        ref,
        level=place.level,
        geonames_id=place.geonames_id,
        name=place.name,
        feature_class=place.feature_class,
        feature_code=place.feature_code,
    )


def resolve_locations(record, gaz: Gazetteer, stats: Optional[LinkStats] = None):
    """Attach GeoNames ids to a record's country, state and city.

    Ids already present are checked against the gazetteer and their names
    replaced by the gazetteer's primary name. Text-only fields are linked by
    exact normalized name, country first so it can narrow state and city
    lookups. A missing country is filled from a resolved state or city.
    """
    stats = stats if stats is not None else LinkStats()
    slots = {Level.COUNTRY: record.country, Level.STATE: record.state, Level.CITY: record.city}
    resolved: dict[Level, Optional[LocationRef]] = {}

    for level in (Level.COUNTRY, Level.STATE, Level.CITY):
        ref = slots[level]
        if ref is None:
            stats.missing += 1
            resolved[level] = None
            continue
        if ref.geonames_id is not None:
            place = gaz.get(ref.geonames_id)
            if place is not None and place.level is level:
                stats.mapped += 1
                resolved[level] = standardize(ref, place)
                continue
            if place is None:
                # Known id the gazetteer cannot classify: keep it as published.
                stats.mapped += 1
                resolved[level] = ref
                continue
            # Id of a different level: fall back to the name, if any.
            if not ref.name:
                stats.unlinked += 1
                resolved[level] = None
                continue
            ref = LocationRef(level, None, ref.name)
        country = resolved.get(Level.COUNTRY)
        hint = country.geonames_id if country is not None and level is not Level.COUNTRY else None
        gid = link_location_text(ref.name, level, hint, gaz)
        if gid is not None:
            stats.string_linked += 1
            resolved[level] = standardize(ref, gaz.places[gid])
        else:
            stats.unlinked += 1
            resolved[level] = ref

    if resolved[Level.COUNTRY] is None:
        for level in (Level.CITY, Level.STATE):
            ref = resolved[level]
            place = gaz.get(ref.geonames_id) if ref is not None else None
            if place is not None and place.country_id in gaz.places:
                resolved[Level.COUNTRY] = standardize(
                    LocationRef(Level.COUNTRY, place.country_id), gaz.places[place.country_id]
                )
                break

    return replace(
        record,
        country=resolved[Level.COUNTRY],
        state=resolved[Level.STATE],
        city=resolved[Level.CITY],
    )
