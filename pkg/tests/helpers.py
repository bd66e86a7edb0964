"""Fixture builders and independent reference implementations for the tests.

The oracles here deliberately avoid the package's own numeric code: TF-IDF
is recomputed from ``collections.Counter`` dictionaries, distances from a
separately written haversine, and merging by exhaustive pairwise scans.
"""

import math
import random
import unicodedata
from collections import Counter

from facilitykb.core import (
    Alias,
    GeoPoint,
    Level,
    LocationRef,
    SemanticType,
    SourceId,
    SourceTag,
)
from facilitykb.ingest import SourceRecord

H = SemanticType.HEALTHCARE_ORGANIZATION
E = SemanticType.EDUCATIONAL_INSTITUTION
P = SemanticType.PHARMACEUTICAL_COMPANY

LOD = [SourceTag.WIKIDATA, SourceTag.GEONAMES, SourceTag.DBPEDIA, SourceTag.YAGO]
ALL = LOD + [SourceTag.UMLS]


def rec(source, native, *aliases, types=(H,), point=None, city=None, country=None,
        state=None, zip=None, sameas=None):
    """Terse SourceRecord constructor. Aliases are texts or (text, lang) pairs."""
    if isinstance(source, str):
        source = SourceTag.parse(source)
    als = tuple(Alias(*a) if isinstance(a, tuple) else Alias(a) for a in aliases)

    def loc(value, level):
        if value is None or isinstance(value, LocationRef):
            return value
        if isinstance(value, tuple):
            return LocationRef(level, geonames_id=value[0], name=value[1])
        return LocationRef(level, name=value)

    return SourceRecord(
        id=SourceId(source, native),
        types=frozenset(types),
        aliases=als,
        country=loc(country, Level.COUNTRY),
        state=loc(state, Level.STATE),
        city=loc(city, Level.CITY),
        zip=zip,
        point=GeoPoint(*point) if point is not None else None,
        sameas=dict(sameas or {}),
    )


def native_id(source, n):
    if source is SourceTag.WIKIDATA:
        return f"Q{n}"
    if source is SourceTag.GEONAMES:
        return str(n)
    if source is SourceTag.UMLS:
        return f"C{n:07d}"
    return f"Page_{n}"


WORDS = [
    "saint", "mary", "general", "memorial", "university", "regional", "county",
    "medical", "center", "hospital", "clinic", "children", "royal", "national",
    "cancer", "institute", "heart", "mercy", "grace", "valley", "river", "north",
    "south", "east", "west", "lake", "park", "hill", "bay", "city",
]
CITIES = [
    ("Amsterdam", "Netherlands", 52.37, 4.89),
    ("Rotterdam", "Netherlands", 51.92, 4.48),
    ("London", "United Kingdom", 51.51, -0.13),
    ("Paris", "France", 48.85, 2.35),
    ("Springfield", "United States", 39.80, -89.64),
    ("Springfield", "Canada", 46.05, -64.20),
]


def _typo(rng, text):
    if len(text) < 4:
        return text
    i = rng.randrange(1, len(text) - 1)
    op = rng.random()
    if op < 0.4:
        return text[:i] + text[i + 1:]
    if op < 0.7:
        return text[:i] + rng.choice("aeiourst") + text[i:]
    return text[:i] + text[i + 1] + text[i] + text[i + 2:]


def random_records(rng: random.Random, n: int, sameas_rate=0.5, adversarial=True,
                   near_km=0.6, share_names=0.0, case_variants=0.0, point_rate=0.6):
    """Randomized multi-source records describing a smaller set of facilities.

    Each facility appears in a random subset of sources with noisy names,
    nearby points and (sometimes) city/country text. sameAs links are drawn
    between copies of one facility; with ``adversarial`` some links point at
    copies of other facilities, at missing records, or duplicate a claim.
    """
    records = []
    counter = 1
    facilities = []
    while len(records) < n:
        words = rng.sample(WORDS, rng.randint(2, 4))
        if facilities and rng.random() < share_names:
            words = list(rng.choice(facilities)[0])
        city = rng.choice(CITIES)
        base = (city[2] + rng.uniform(-0.05, 0.05), city[3] + rng.uniform(-0.05, 0.05))
        facilities.append((words, city, base))
        sources = rng.sample(ALL, rng.randint(1, 5))
        copies = []
        for source in sources:
            if len(records) >= n:
                break
            nid = native_id(source, counter)
            counter += 1
            name = " ".join(words).title()
            texts = [name]
            for _ in range(rng.randint(0, 2)):
                texts.append(_typo(rng, name) if rng.random() < 0.7 else name.upper())
            if rng.random() < 0.3:
                texts = [_typo(rng, t) for t in texts]
            if rng.random() < case_variants:
                texts += [name.upper(), name.lower(), "  " + name]
            aliases = tuple(dict.fromkeys(texts))
            point = None
            if rng.random() < point_rate:
                d = near_km / 111.0
                point = (base[0] + rng.uniform(-d, d), base[1] + rng.uniform(-d, d))
            has_loc = rng.random() < 0.6
            copies.append(rec(
                source, nid, *aliases,
                types=[rng.choice([H, E, P])],
                point=point,
                city=city[0] if has_loc and rng.random() < 0.8 else None,
                country=city[1] if has_loc else None,
            ))
        records.extend(copies)
        # sameAs links between copies.
        for i, a in enumerate(copies):
            links = {}
            for b in copies:
                if b is a or rng.random() > sameas_rate:
                    continue
                links[b.source] = b.id.native_id
            if adversarial and rng.random() < 0.25:
                target_source = rng.choice([s for s in ALL if s is not a.source])
                roll = rng.random()
                if roll < 0.4 and records:
                    other = rng.choice(records)
                    if other.source is target_source:
                        links[target_source] = other.id.native_id
                elif roll < 0.7:
                    links[target_source] = native_id(target_source, 10**6 + rng.randrange(50))
                else:
                    links[target_source] = native_id(target_source, rng.randrange(1, counter))
            if links:
                copies[i] = a.__class__(**{**a.__dict__, "sameas": links})
        records[len(records) - len(copies):] = copies
    rng.shuffle(records)
    return records


# Independent TF-IDF

def oracle_norm(text):
    out = text
    for _ in range(8):
        prev = out
        out = unicodedata.normalize("NFKD", out)
        out = "".join(c for c in out if not unicodedata.combining(c))
        out = " ".join(out.casefold().split())
        if out == prev:
            break
    return out


def oracle_trigrams(text):
    t = oracle_norm(text)
    return Counter(t[i:i + 3] for i in range(len(t) - 2))


class OracleTfidf:
    def __init__(self, docs, min_df=10):
        df = Counter()
        for d in docs:
            df.update(set(oracle_trigrams(d)))
        n = len(docs)
        self.idf = {t: math.log((1 + n) / (1 + c)) + 1 for t, c in df.items() if c >= min_df}
        self._cache = {}

    def vec(self, text):
        v = self._cache.get(text)
        if v is None:
            v = {t: c * self.idf[t] for t, c in oracle_trigrams(text).items() if t in self.idf}
            self._cache[text] = v
        return v

    def cos(self, a, b):
        u, v = self.vec(a), self.vec(b)
        if not u or not v:
            return 0.0
        dot = sum(w * v[t] for t, w in u.items() if t in v)
        nu = math.sqrt(sum(w * w for w in u.values()))
        nv = math.sqrt(sum(w * w for w in v.values()))
        return round(min(1.0, max(0.0, dot / (nu * nv))), 9)


def brute_topk(tfidf, items, query_texts, k):
    """Owner ranking by best alias cosine, ties by owner; zero scores dropped."""
    best = {}
    for owner, text in items:
        s = max(tfidf.cos(q, text) for q in query_texts)
        best[owner] = max(best.get(owner, 0.0), s)
    ranked = sorted(((o, s) for o, s in best.items() if s > 0), key=lambda x: (-x[1], x[0]))
    return ranked[:k]


def oracle_haversine(lat1, lon1, lat2, lon2, r=6371.0):
    p1, p2 = math.radians(lat1), math.radians(lat2)
    a = (math.sin((p2 - p1) / 2) ** 2
         + math.cos(p1) * math.cos(p2) * math.sin(math.radians(lon2 - lon1) / 2) ** 2)
    return 2 * r * math.atan2(math.sqrt(a), math.sqrt(1 - a))


# Exhaustive merge oracle for the string-merge step

def _loc_key(ref):
    if ref is None:
        return None
    return oracle_norm(ref.name) if ref.name else "#" + ref.geonames_id


def oracle_string_merge(start_clusters, pending, all_records, cfg):
    """Replay the string-merge step by exhaustive pairwise comparison.

    ``start_clusters`` is the list of record-id lists produced by the sameAs
    steps, ``pending`` the records they left over. Returns the final
    partition as a set of frozensets of SourceIds.
    """
    tfidf = OracleTfidf([t for r in all_records for t in r.alias_texts()], cfg.min_df)
    by_id = {r.id: r for r in all_records}
    clusters = [list(c) for c in start_clusters]
    in_kb = [True] * len(clusters)
    where = {}
    for ci, c in enumerate(clusters):
        for sid in c:
            where[sid] = ci
    order = sorted(pending, key=lambda r: (cfg.source_order.index(r.source), r.id.native_id))
    for r in order:
        where[r.id] = len(clusters)
        clusters.append([r.id])
        in_kb.append(False)

    def pick(ci, attr):
        members = sorted((by_id[s] for s in clusters[ci]),
                         key=lambda m: cfg.source_order.index(m.source))
        for m in members:
            v = getattr(m, attr)
            if v is not None:
                return v
        return None

    for r in order:
        own = where[r.id]
        if len(clusters[own]) > 1:
            continue
        q = r.alias_texts()
        scored = []
        for ci, members in enumerate(clusters):
            if ci == own or not members:
                continue
            pair_scores = {}
            for sid in members:
                for t in by_id[sid].alias_texts():
                    for qt in q:
                        pair_scores[(qt, t)] = max(pair_scores.get((qt, t), 0.0), tfidf.cos(qt, t))
            s = max(pair_scores.values())
            if s > 0:
                scored.append((s, min(members), ci, pair_scores))
        scored.sort(key=lambda x: (-x[0], x[1]))
        if len(scored) > cfg.k:
            kth = scored[cfg.k - 1][0]
            scored = [x for x in scored if x[0] >= kth]
        for s, _, ci, pair_scores in scored:
            a_pt, b_pt = r.point, pick(ci, "point")
            a_city, b_city = _loc_key(r.city), _loc_key(pick(ci, "city"))
            a_cty, b_cty = _loc_key(r.country), _loc_key(pick(ci, "country"))
            if a_pt is not None and b_pt is not None:
                d = oracle_haversine(a_pt.lat, a_pt.lon, b_pt.lat, b_pt.lon)
                ok = s >= cfg.rule1_cos and d <= cfg.rule1_max_km
            elif a_city and b_city and a_cty and b_cty:
                ok = a_city == b_city and a_cty == b_cty and s >= cfg.rule2_cos
            else:
                strong = sum(1 for v in pair_scores.values() if v >= cfg.rule3_cos)
                ok = a_cty is not None and a_cty == b_cty and strong >= cfg.rule3_min_aliases
            if not ok:
                continue
            if any(by_id[m].source is r.source for m in clusters[ci]):
                continue
            clusters[ci].append(r.id)
            clusters[own] = []
            where[r.id] = ci
            in_kb[ci] = True
            break
    return {frozenset(c) for c in clusters if c}


def benchmark_corpus(seed=7, n_owners=600, n_queries=200):
    """Fixed alias corpus and noisy queries for approximate-retrieval recall."""
    rng = random.Random(seed)
    items = []
    names = []
    for i in range(n_owners):
        name = " ".join(rng.sample(WORDS, rng.randint(2, 4))).title()
        names.append(name)
        owner = f"E{i:05d}"
        items.append((owner, name))
        for _ in range(rng.randint(0, 3)):
            items.append((owner, _typo(rng, name)))
    queries = []
    for _ in range(n_queries):
        q = rng.choice(names)
        for _ in range(rng.randint(0, 2)):
            q = _typo(rng, q)
        queries.append(q)
    return items, queries


def twelve_entity_kb():
    """Hand-countable knowledge base.

    ======  ========  =====  =====================  ============
    entity  types     point  alias languages        country
    ======  ========  =====  =====================  ============
    1       H         yes    en, de, de             NL
    2       H         yes    en                     NL
    3       H         no     fr, nl                 NL
    4       H         yes    (none)                 NL
    5       H         yes    en                     NL
    6       H, E      yes    en, fr                 IS
    7       E         no     en                     IS
    8       E         yes    de                     GB
    9       E         no     (none)                 GB
    10      P         no     en                     -
    11      P         no     en, de, fr, it         -
    12      H         no     en                     DE
    ======  ========  =====  =====================  ============
    """
    from facilitykb.align import KnowledgeBase, MergeConfig, MergedEntity

    countries = {"NL": ("2750405", "Netherlands"), "IS": ("2629691", "Iceland"),
                 "GB": ("2635167", "United Kingdom"), "DE": ("2921044", "Germany")}
    rows = [
        ({H}, True, ["en", "de", "de"], "NL"),
        ({H}, True, ["en"], "NL"),
        ({H}, False, ["fr", "nl"], "NL"),
        ({H}, True, [None], "NL"),
        ({H}, True, ["en"], "NL"),
        ({H, E}, True, ["en", "fr"], "IS"),
        ({E}, False, ["en"], "IS"),
        ({E}, True, ["de"], "GB"),
        ({E}, False, [None], "GB"),
        ({P}, False, ["en"], None),
        ({P}, False, ["en", "de", "fr", "it"], None),
        ({H}, False, ["en"], "DE"),
    ]
    entities = []
    for i, (types, located, langs, cc) in enumerate(rows, 1):
        aliases = tuple(sorted({Alias(f"Facility {i} {j}", lang) for j, lang in enumerate(langs)}))
        country = LocationRef(Level.COUNTRY, *countries[cc]) if cc else None
        entities.append(MergedEntity(
            kb_id=f"MTF{i:08d}",
            ids={SourceTag.WIKIDATA: f"Q{i}"},
            preferred_name=aliases[0].text,
            aliases=aliases,
            types=frozenset(types),
            country=country,
            point=GeoPoint(50.0 + i / 100, 5.0) if located else None,
        ))
    by_source_id = {SourceId(SourceTag.WIKIDATA, f"Q{i}"): e.kb_id for i, e in enumerate(entities, 1)}
    return KnowledgeBase(entities, by_source_id, MergeConfig())


TWELVE_POPULATION = {"2750405": 1_000_000, "2629691": 400_000, "2635167": 66_488_991}
