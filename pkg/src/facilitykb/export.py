"""Serialize a knowledge base and query it in memory.

Three artifacts, all byte-stable for a given knowledge base:

* a flat CSV, one row per entity (see ``CSV_COLUMNS``);
* a Turtle document using the ``mto:``/``mtp:``/``mtr:`` namespaces;
* a JSON dump that round-trips the full entity model for later commands.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import re
from pathlib import Path
from typing import Iterable, Optional
from urllib.parse import quote

from .align import KnowledgeBase, MergeConfig, MergedEntity, location_key
from .core import (
    Alias,
    GeoPoint,
    InputError,
    Level,
    LocationRef,
    SemanticType,
    SourceId,
    SourceTag,
    UnwritablePathError,
    normalize_name,
)
from .geo import haversine_km

CSV_COLUMNS = (
    "kb_id",
    "preferred_name",
    "semantic_types",
    "latitude",
    "longitude",
    "city_geonames_id",
    "city_name",
    "zip",
    "state_geonames_id",
    "state_name",
    "country_geonames_id",
    "country_name",
    "wikidata_id",
    "dbpedia_id",
    "yago_id",
    "geonames_id",
    "umls_cui",
)

MTO = "http://research.mytomorrows.com/ontology/"
MTP = "http://research.mytomorrows.com/property/"
MTR = "http://research.mytomorrows.com/resource/"

PREFIXES = (
    ("rdf", "http://www.w3.org/1999/02/22-rdf-syntax-ns#"),
    ("rdfs", "http://www.w3.org/2000/01/rdf-schema#"),
    ("owl", "http://www.w3.org/2002/07/owl#"),
    ("xsd", "http://www.w3.org/2001/XMLSchema#"),
    ("skos", "http://www.w3.org/2004/02/skos/core#"),
    ("schema", "http://schema.org/"),
    ("gn", "http://www.geonames.org/ontology#"),
    ("geo", "http://www.opengis.net/ont/geosparql#"),
    ("mto", MTO),
    ("mtp", MTP),
    ("mtr", MTR),
)

SOURCE_IRI = {
    SourceTag.WIKIDATA: "http://www.wikidata.org/entity/{}",
    SourceTag.DBPEDIA: "http://dbpedia.org/resource/{}",
    SourceTag.YAGO: "http://yago-knowledge.org/resource/{}",
    SourceTag.GEONAMES: "https://sws.geonames.org/{}/",
}

TYPE_CLASS = {
    SemanticType.EDUCATIONAL_INSTITUTION: "mto:EducationalInstitution",
    SemanticType.HEALTHCARE_ORGANIZATION: "mto:HealthcareOrganization",
    SemanticType.PHARMACEUTICAL_COMPANY: "mto:PharmaceuticalCompany",
}
LEVEL_CLASS = {Level.COUNTRY: "mto:Country", Level.STATE: "mto:State", Level.CITY: "mto:City"}

# Schema triples, written only for a non-empty knowledge base.
TBOX = (
    ("mto:TrialFacility", "rdf:type", "owl:Class"),
    ("mto:TrialFacility", "rdfs:subClassOf", "schema:Organization"),
    ("mto:HealthcareOrganization", "rdf:type", "owl:Class"),
    ("mto:HealthcareOrganization", "rdfs:subClassOf", "mto:TrialFacility"),
    ("mto:HealthcareOrganization", "owl:equivalentClass", "schema:MedicalOrganization"),
    ("mto:EducationalInstitution", "rdf:type", "owl:Class"),
    ("mto:EducationalInstitution", "rdfs:subClassOf", "mto:TrialFacility"),
    ("mto:EducationalInstitution", "owl:equivalentClass", "schema:EducationalOrganization"),
    ("mto:PharmaceuticalCompany", "rdf:type", "owl:Class"),
    ("mto:PharmaceuticalCompany", "rdfs:subClassOf", "mto:TrialFacility"),
    ("mto:PharmaceuticalCompany", "rdfs:subClassOf", "schema:Corporation"),
    ("mto:Country", "rdf:type", "owl:Class"),
    ("mto:Country", "owl:equivalentClass", "schema:Country"),
    ("mto:Country", "rdfs:subClassOf", "gn:Feature"),
    ("mto:State", "rdf:type", "owl:Class"),
    ("mto:State", "owl:equivalentClass", "schema:State"),
    ("mto:State", "rdfs:subClassOf", "gn:Feature"),
    ("mto:City", "rdf:type", "owl:Class"),
    ("mto:City", "owl:equivalentClass", "schema:City"),
    ("mto:City", "rdfs:subClassOf", "gn:Feature"),
    ("mtp:country", "rdf:type", "owl:ObjectProperty"),
    ("mtp:country", "rdfs:range", "mto:Country"),
    ("mtp:state", "rdf:type", "owl:ObjectProperty"),
    ("mtp:state", "rdfs:range", "mto:State"),
    ("mtp:city", "rdf:type", "owl:ObjectProperty"),
    ("mtp:city", "rdfs:range", "mto:City"),
    ("mtp:latitude", "rdf:type", "owl:DatatypeProperty"),
    ("mtp:latitude", "owl:equivalentProperty", "schema:latitude"),
    ("mtp:longitude", "rdf:type", "owl:DatatypeProperty"),
    ("mtp:longitude", "owl:equivalentProperty", "schema:longitude"),
    ("mtp:zip", "rdf:type", "owl:DatatypeProperty"),
    ("mtp:zip", "owl:equivalentProperty", "schema:postalCode"),
    ("mtp:umlsCui", "rdf:type", "owl:DatatypeProperty"),
)

_LANGTAG = re.compile(r"[a-zA-Z]+(-[a-zA-Z0-9]+)*")


def _fmt_float(x: float) -> str:
    return repr(float(x))


def _ensure_parent(path: Path) -> None:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise UnwritablePathError(f"cannot create {path.parent}: {exc}") from exc


def _write_text(path, text: str) -> None:
    path = Path(path)
    _ensure_parent(path)
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise UnwritablePathError(f"cannot write {path}: {exc}") from exc


def csv_rows(kb: KnowledgeBase) -> list[list[str]]:
    rows = []
    for e in sorted(kb.entities, key=lambda e: e.kb_id):
        def loc(ref: Optional[LocationRef]):
            return (ref.geonames_id or "", ref.name or "") if ref else ("", "")

        city, state, country = loc(e.city), loc(e.state), loc(e.country)
        rows.append([
            e.kb_id,
            e.preferred_name,
            ";".join(t.name for t in sorted(e.types)),
            _fmt_float(e.point.lat) if e.point else "",
            _fmt_float(e.point.lon) if e.point else "",
            *city,
            e.zip or "",
            *state,
            *country,
            e.ids.get(SourceTag.WIKIDATA, ""),
            e.ids.get(SourceTag.DBPEDIA, ""),
            e.ids.get(SourceTag.YAGO, ""),
            e.ids.get(SourceTag.GEONAMES, ""),
            e.ids.get(SourceTag.UMLS, ""),
        ])
    return rows


def render_csv(kb: KnowledgeBase) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n", quoting=csv.QUOTE_MINIMAL)
    writer.writerow(CSV_COLUMNS)
    writer.writerows(csv_rows(kb))
    return buf.getvalue()


def export_csv(kb: KnowledgeBase, path) -> int:
    """Write the flat CSV (UTF-8, LF, comma) and return the number of data rows."""
    _write_text(path, render_csv(kb))
    return len(kb.entities)


def _literal(text: str, lang: Optional[str] = None, datatype: Optional[str] = None) -> str:
    escaped = (
        text.replace("\\", "\\\\")
        .replace('"', '\\"')
        .replace("\n", "\\n")
        .replace("\r", "\\r")
        .replace("\t", "\\t")
    )
    out = f'"{escaped}"'
    if datatype:
        return f"{out}^^{datatype}"
    if lang and _LANGTAG.fullmatch(lang):
        return f"{out}@{lang}"
    return out


def _iri(url: str) -> str:
    return "<" + quote(url, safe=":/?#[]@!$&'()*+,;=%~.-_") + ">"


def _location_node(ref: LocationRef) -> str:
    if ref.geonames_id:
        return f"mtr:geonames_{ref.geonames_id}"
    digest = hashlib.sha1(f"{ref.level.value}|{normalize_name(ref.name)}".encode("utf-8")).hexdigest()
    return f"mtr:place_{ref.level.value.lower()}_{digest[:12]}"


def preferred_alias(e: MergedEntity) -> Alias:
    same = [a for a in e.aliases if a.text == e.preferred_name]
    for a in same:
        if a.lang == "en":
            return a
    return same[0] if same else Alias(e.preferred_name)


def _wkt(point: GeoPoint, lat_first: bool) -> str:
    first, second = (point.lat, point.lon) if lat_first else (point.lon, point.lat)
    return f"POINT({_fmt_float(first)} {_fmt_float(second)})"


def turtle_statements(kb: KnowledgeBase, wkt_lat_first: bool = False):
    """Yield ``(subject, [(predicate, object), ...])`` blocks in output order."""
    if not kb.entities:
        return
    tbox: dict[str, list] = {}
    for s, p, o in TBOX:
        tbox.setdefault(s, []).append((p, o))
    for s, pos in tbox.items():
        yield s, pos

    locations: dict[str, LocationRef] = {}
    for e in sorted(kb.entities, key=lambda e: e.kb_id):
        pos = [("rdf:type", "mto:TrialFacility")]
        pos += [("rdf:type", TYPE_CLASS[t]) for t in sorted(e.types)]
        pref = preferred_alias(e)
        pos.append(("rdfs:label", _literal(pref.text, pref.lang)))
        pos.append(("skos:prefLabel", _literal(pref.text, pref.lang)))
        for a in e.aliases:
            if a != pref:
                pos.append(("skos:altLabel", _literal(a.text, a.lang)))
        for prop, ref in (("mtp:country", e.country), ("mtp:state", e.state), ("mtp:city", e.city)):
            if ref is not None:
                node = _location_node(ref)
                locations.setdefault(node, ref)
                pos.append((prop, node))
        if e.zip:
            pos.append(("mtp:zip", _literal(e.zip)))
        if e.point is not None:
            pos.append(("mtp:latitude", _literal(_fmt_float(e.point.lat), datatype="xsd:decimal")))
            pos.append(("mtp:longitude", _literal(_fmt_float(e.point.lon), datatype="xsd:decimal")))
            pos.append(("geo:asWKT", _literal(_wkt(e.point, wkt_lat_first), datatype="geo:wktLiteral")))
        for source in (SourceTag.WIKIDATA, SourceTag.GEONAMES, SourceTag.DBPEDIA, SourceTag.YAGO):
            native = e.ids.get(source)
            if native is not None:
                pos.append(("owl:sameAs", _iri(SOURCE_IRI[source].format(native))))
        if SourceTag.UMLS in e.ids:
            pos.append(("mtp:umlsCui", _literal(e.ids[SourceTag.UMLS])))
        yield f"mtr:{e.kb_id}", pos

    for node in sorted(locations):
        ref = locations[node]
        pos = [("rdf:type", LEVEL_CLASS[ref.level]), ("rdf:type", "gn:Feature")]
        if ref.name:
            pos.append(("rdfs:label", _literal(ref.name, "en")))
        if ref.feature_class:
            pos.append(("gn:featureClass", f"gn:{ref.feature_class}"))
            if ref.feature_code:
                pos.append(("gn:featureCode", f"gn:{ref.feature_class}.{ref.feature_code}"))
        if ref.geonames_id:
            pos.append(("owl:sameAs", _iri(SOURCE_IRI[SourceTag.GEONAMES].format(ref.geonames_id))))
        yield node, pos


def render_turtle(kb: KnowledgeBase, wkt_lat_first: bool = False) -> tuple[str, int]:
    lines = [f"@prefix {p}: <{iri}> ." for p, iri in PREFIXES]
    count = 0
    for subject, pos in turtle_statements(kb, wkt_lat_first):
        lines.append("")
        lines.append(subject)
        for i, (p, o) in enumerate(pos):
            end = " ." if i == len(pos) - 1 else " ;"
            lines.append(f"    {'a' if p == 'rdf:type' else p} {o}{end}")
        count += len(pos)
    return "\n".join(lines) + "\n", count


def export_turtle(kb: KnowledgeBase, path, wkt_lat_first: bool = False) -> int:
    """Write the Turtle document and return how many triples it holds."""
    text, count = render_turtle(kb, wkt_lat_first)
    _write_text(path, text)
    return count


def write_summary(kb: KnowledgeBase, path, statement_count: int, row_count: int) -> dict:
    summary = {
        "entity_count": len(kb.entities),
        "csv_rows": row_count,
        "statement_count": statement_count,
        "config_hash": kb.config.config_hash(),
    }
    _write_text(path, json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return summary


# JSON round trip of the full model

def _ref_to_json(ref: Optional[LocationRef]):
    if ref is None:
        return None
    out = {"level": ref.level.value}
    for key in ("geonames_id", "name", "feature_class", "feature_code"):
        value = getattr(ref, key)
        if value is not None:
            out[key] = value
    return out


def _ref_from_json(obj) -> Optional[LocationRef]:
    if obj is None:
        return None
    return LocationRef(
        Level(obj["level"]),
        geonames_id=obj.get("geonames_id"),
        name=obj.get("name"),
        feature_class=obj.get("feature_class"),
        feature_code=obj.get("feature_code"),
    )


def entity_to_json(e: MergedEntity) -> dict:
    return {
        "kb_id": e.kb_id,
        "preferred_name": e.preferred_name,
        "ids": {s.value: e.ids[s] for s in sorted(e.ids)},
        "aliases": [{"text": a.text, "lang": a.lang} for a in e.aliases],
        "types": [t.name for t in sorted(e.types)],
        "country": _ref_to_json(e.country),
        "state": _ref_to_json(e.state),
        "city": _ref_to_json(e.city),
        "zip": e.zip,
        "lat": e.point.lat if e.point else None,
        "lon": e.point.lon if e.point else None,
        "provenance": list(e.provenance),
    }


def entity_from_json(obj: dict) -> MergedEntity:
    point = None
    if obj.get("lat") is not None and obj.get("lon") is not None:
        point = GeoPoint(obj["lat"], obj["lon"])
    return MergedEntity(
        kb_id=obj["kb_id"],
        ids={SourceTag.parse(k): v for k, v in obj["ids"].items()},
        preferred_name=obj["preferred_name"],
        aliases=tuple(Alias(a["text"], a.get("lang")) for a in obj["aliases"]),
        types=frozenset(SemanticType.parse(t) for t in obj["types"]),
        country=_ref_from_json(obj.get("country")),
        state=_ref_from_json(obj.get("state")),
        city=_ref_from_json(obj.get("city")),
        zip=obj.get("zip"),
        point=point,
        provenance=tuple(obj.get("provenance") or ()),
    )


def save_kb(kb: KnowledgeBase, path) -> None:
    doc = {
        "metadata": kb.metadata(),
        "entities": [entity_to_json(e) for e in sorted(kb.entities, key=lambda e: e.kb_id)],
    }
    _write_text(path, json.dumps(doc, indent=1, sort_keys=True, ensure_ascii=False) + "\n")


def load_kb(path) -> KnowledgeBase:
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
        entities = [entity_from_json(o) for o in doc["entities"]]
        meta = doc.get("metadata", {})
        cfg = MergeConfig.from_dict(meta.get("config", {}))
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise InputError(f"cannot load knowledge base {path}: {exc}") from exc
    by_source_id = {SourceId(s, n): e.kb_id for e in entities for s, n in e.ids.items()}
    return KnowledgeBase(entities, by_source_id, cfg, dict(meta.get("counters", {})))


def write_merge_report(kb: KnowledgeBase, path) -> int:
    lines = [json.dumps(ev, sort_keys=True, ensure_ascii=False) for ev in kb.events]
    _write_text(path, "".join(line + "\n" for line in lines))
    return len(lines)


def query_radius(
    kb: KnowledgeBase, center: GeoPoint, max_km: Optional[float] = None
) -> list[tuple[MergedEntity, float]]:
    """Located entities by distance from ``center``; ties by kb_id."""
    hits = []
    for e in kb.entities:
        if e.point is None:
            continue
        d = haversine_km(center, e.point)
        if max_km is None or d <= max_km:
            hits.append((e, d))
    hits.sort(key=lambda h: (h[1], h[0].kb_id))
    return hits


def query_filter(
    kb: KnowledgeBase,
    country: Optional[str] = None,
    state: Optional[str] = None,
    city: Optional[str] = None,
    type: Optional[SemanticType] = None,
) -> list[MergedEntity]:
    wanted = [
        (normalize_name(value), attr)
        for value, attr in ((country, "country"), (state, "state"), (city, "city"))
        if value
    ]
    out = []
    for e in kb.entities:
        if type is not None and type not in e.types:
            continue
        if all(location_key(getattr(e, attr)) == key for key, attr in wanted):
            out.append(e)
    return sorted(out, key=lambda e: e.kb_id)


def iter_located(kb: KnowledgeBase) -> Iterable[MergedEntity]:
    return (e for e in kb.entities if e.point is not None)
