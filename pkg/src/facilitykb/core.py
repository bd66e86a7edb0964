"""Shared domain types and value sanity rules.

Everything here is an immutable value object. Identifier syntax checks and
coordinate normalization live here so that every loader applies the same
rules before a value reaches the alignment code.
"""

from __future__ import annotations

import enum
import functools
import math
import re
import unicodedata
from dataclasses import dataclass
from typing import Optional


class FacilityKBError(Exception):
    """Base class for pipeline errors. ``category`` drives CLI exit codes."""

    category = "INPUT"


class ConfigError(FacilityKBError):
    category = "CONFIG"


class InputError(FacilityKBError):
    category = "INPUT"


class UnreadableFileError(InputError):
    pass


class SourceMismatchError(InputError):
    pass


class MalformedPopulationTableError(InputError):
    pass


class OutputError(FacilityKBError):
    category = "OUTPUT"


class UnwritablePathError(OutputError):
    pass


class SourceTag(enum.Enum):
    """Source vocabularies, declared in alignment priority order."""

    WIKIDATA = "wikidata"
    GEONAMES = "geonames"
    DBPEDIA = "dbpedia"
    YAGO = "yago"
    UMLS = "umls"

    @property
    def rank(self) -> int:
        return _SOURCE_RANK[self]

    def __lt__(self, other):
        if not isinstance(other, SourceTag):
            return NotImplemented
        return self.rank < other.rank

    def __le__(self, other):
        if not isinstance(other, SourceTag):
            return NotImplemented
        return self.rank <= other.rank

    def __gt__(self, other):
        if not isinstance(other, SourceTag):
            return NotImplemented
        return self.rank > other.rank

    def __ge__(self, other):
        if not isinstance(other, SourceTag):
            return NotImplemented
        return self.rank >= other.rank

    @classmethod
    def parse(cls, text: str) -> "SourceTag":
        try:
            return cls(text.strip().lower())
        except ValueError:
            raise ValueError(f"unknown source {text!r}") from None


_SOURCE_RANK = {tag: i for i, tag in enumerate(SourceTag)}

SOURCE_ORDER: tuple[SourceTag, ...] = tuple(SourceTag)
LOD_SOURCES = frozenset(
    {SourceTag.WIKIDATA, SourceTag.GEONAMES, SourceTag.DBPEDIA, SourceTag.YAGO}
)

_ID_PATTERNS = {
    SourceTag.WIKIDATA: re.compile(r"Q[0-9]+"),
    SourceTag.GEONAMES: re.compile(r"[1-9][0-9]*"),
    SourceTag.UMLS: re.compile(r"C[0-9]{7}"),
}


@dataclass(frozen=True, order=True)
class SourceId:
    source: SourceTag
    native_id: str

    def __str__(self) -> str:
        return f"{self.source.name}:{self.native_id}"

    @classmethod
    def parse(cls, text: str) -> "SourceId":
        """Parse ``SOURCE:native_id``; the source name is case-insensitive."""
        source, sep, native = text.strip().partition(":")
        if not sep or not native:
            raise ValueError(f"expected SOURCE:native_id, got {text!r}")
        return cls(SourceTag.parse(source), native)


def validate_source_id(sid: SourceId) -> bool:
    """True iff ``sid.native_id`` has the syntax of its source."""
    native = sid.native_id
    if not isinstance(native, str) or not native or native != native.strip():
        return False
    pattern = _ID_PATTERNS.get(sid.source)
    if pattern is not None:
        return pattern.fullmatch(native) is not None
    # DBpedia page names and YAGO resource names: any non-blank token.
    return not any(ch.isspace() for ch in native)


@dataclass(frozen=True)
class GeoPoint:
    lat: float
    lon: float

    def __post_init__(self):
        if not (-90.0 <= self.lat <= 90.0) or not (-180.0 <= self.lon <= 180.0):
            raise ValueError(f"coordinates out of range: ({self.lat}, {self.lon})")


def normalize_geopoint(lat, lon) -> Optional[GeoPoint]:
    """Return a validated point, or None for missing, unparsable, out-of-range or (0, 0)."""
    if lat is None or lon is None or isinstance(lat, bool) or isinstance(lon, bool):
        return None
    try:
        flat, flon = float(lat), float(lon)
    except (TypeError, ValueError):
        return None
    if not (math.isfinite(flat) and math.isfinite(flon)):
        return None
    if not (-90.0 <= flat <= 90.0 and -180.0 <= flon <= 180.0):
        return None
    if flat == 0.0 and flon == 0.0:
        return None
    return GeoPoint(flat, flon)


class SemanticType(enum.Enum):
    EDUCATIONAL_INSTITUTION = "EDUCATIONAL_INSTITUTION"
    HEALTHCARE_ORGANIZATION = "HEALTHCARE_ORGANIZATION"
    PHARMACEUTICAL_COMPANY = "PHARMACEUTICAL_COMPANY"

    @classmethod
    def parse(cls, text: str) -> "SemanticType":
        return cls(text.strip().upper())

    def __lt__(self, other):
        if not isinstance(other, SemanticType):
            return NotImplemented
        return self.value < other.value


@functools.total_ordering
@dataclass(frozen=True)
class Alias:
    """A name as published by a source. ``lang`` is lowercase, or None when unknown."""

    text: str
    lang: Optional[str] = None

    def __post_init__(self):
        if not isinstance(self.text, str) or not self.text.strip():
            raise ValueError("alias text must be non-empty")
        lang = self.lang
        if lang is not None:
            lang = lang.strip().lower() or None
        object.__setattr__(self, "lang", lang)

    def sort_key(self):
        return (self.text, self.lang or "")

    def __lt__(self, other):
        if not isinstance(other, Alias):
            return NotImplemented
        return self.sort_key() < other.sort_key()


class Level(enum.Enum):
    COUNTRY = "COUNTRY"
    STATE = "STATE"
    CITY = "CITY"
    OTHER = "OTHER"


@dataclass(frozen=True)
class LocationRef:
    level: Level
    geonames_id: Optional[str] = None
    name: Optional[str] = None
    feature_class: Optional[str] = None
    feature_code: Optional[str] = None

    def __post_init__(self):
        if self.level is Level.OTHER:
            raise ValueError("a location reference is a country, state or city")
        if not self.geonames_id and not (self.name and self.name.strip()):
            raise ValueError("location reference needs a GeoNames id or a name")
        if self.geonames_id is not None and not validate_source_id(
            SourceId(SourceTag.GEONAMES, self.geonames_id)
        ):
            raise ValueError(f"bad GeoNames id {self.geonames_id!r}")


def normalize_name(text: str) -> str:
    """Casefold, strip diacritics, and collapse whitespace.

    Casefolding can emit characters that decompose further, so the cycle
    repeats until it reaches a fixed point; the result is idempotent.
    """
    out = text
    for _ in range(8):
        prev = out
        out = unicodedata.normalize("NFKD", out)
        out = "".join(ch for ch in out if not unicodedata.combining(ch))
        out = " ".join(out.casefold().split())
        if out == prev:
            break
    return out
