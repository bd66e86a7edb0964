"""Regenerate the bundled demo inputs under ``demo/``.

The output is a pure function of the tables below and a fixed seed, so the
committed files can be rebuilt byte for byte:

    python3 scripts/make_demo.py [OUT_DIR]
"""

import json
import random
import sys
from pathlib import Path

SEED = 20210601

# geonameid, name, asciiname, alternatenames, lat, lon, class, code, cc, population
GAZETTEER = [
    ("2750405", "Netherlands", "Netherlands", "Nederland,The Netherlands,Holland", 52.25, 5.75, "A", "PCLI", "NL", 17231017),
    ("2635167", "United Kingdom", "United Kingdom", "UK,Great Britain,Royaume-Uni", 54.75844, -2.69531, "A", "PCLI", "GB", 66488991),
    ("3017382", "France", "France", "Frankreich,Francia", 46.0, 2.0, "A", "PCLI", "FR", 66987244),
    ("6252001", "United States", "United States", "USA,United States of America,US", 39.76, -98.5, "A", "PCLI", "US", 327167434),
    ("2921044", "Germany", "Germany", "Deutschland,Allemagne", 51.5, 10.5, "A", "PCLI", "DE", 82927922),
    ("3175395", "Italy", "Italy", "Italia,Italie", 42.83333, 12.83333, "A", "PCLI", "IT", 60431283),
    ("2629691", "Iceland", "Iceland", "Island,Islande", 65.0, -18.0, "A", "PCLI", "IS", 353574),
    ("2749879", "North Holland", "North Holland", "Noord-Holland", 52.58333, 4.91667, "A", "ADM1", "NL", 2762163),
    ("2745909", "Utrecht", "Utrecht", "Provincie Utrecht", 52.08333, 5.16667, "A", "ADM1", "NL", 1353596),
    ("2743698", "South Holland", "South Holland", "Zuid-Holland", 52.0, 4.66667, "A", "ADM1", "NL", 3673893),
    ("6269131", "England", "England", "Angleterre", 52.16045, -0.70312, "A", "ADM1", "GB", 55268100),
    ("3012874", "Ile-de-France", "Ile-de-France", "Île-de-France", 48.5, 2.5, "A", "ADM1", "FR", 12278210),
    ("11071625", "Auvergne-Rhone-Alpes", "Auvergne-Rhone-Alpes", "Auvergne-Rhône-Alpes", 45.5, 4.5, "A", "ADM1", "FR", 7994459),
    ("4896861", "Illinois", "Illinois", "IL,State of Illinois", 40.00032, -89.25037, "A", "ADM1", "US", 12671821),
    ("6254926", "Massachusetts", "Massachusetts", "MA,Commonwealth of Massachusetts", 42.36565, -71.10832, "A", "ADM1", "US", 6892503),
    ("4736286", "Texas", "Texas", "TX", 31.25044, -99.25061, "A", "ADM1", "US", 28995881),
    ("2950157", "Land Berlin", "Land Berlin", "Berlin", 52.5, 13.41667, "A", "ADM1", "DE", 3664088),
    ("2951839", "Bavaria", "Bavaria", "Bayern", 49.0, 11.5, "A", "ADM1", "DE", 13076721),
    ("3169778", "Apulia", "Apulia", "Puglia", 41.0, 16.5, "A", "ADM1", "IT", 4029053),
    ("3174976", "Lazio", "Lazio", "Latium", 41.9, 12.7, "A", "ADM1", "IT", 5879082),
    ("3426183", "Capital Region", "Capital Region", "Hofudborgarsvaedi", 64.15, -21.7, "A", "ADM1", "IS", 233034),
    ("2759794", "Amsterdam", "Amsterdam", "Amsterdã,Amsterdão", 52.37403, 4.88969, "P", "PPLC", "NL", 741636),
    ("2745912", "Utrecht", "Utrecht", "Trecht", 52.09083, 5.12222, "P", "PPLA", "NL", 290529),
    ("2747891", "Rotterdam", "Rotterdam", "Roterdam", 51.9225, 4.47917, "P", "PPL", "NL", 598199),
    ("2643743", "London", "London", "Londres,Londra,Londen", 51.50853, -0.12574, "P", "PPLC", "GB", 8961989),
    ("2653941", "Cambridge", "Cambridge", "Cantabrigia", 52.2, 0.11667, "P", "PPLA2", "GB", 128488),
    ("2988507", "Paris", "Paris", "Parigi,Parijs", 48.85341, 2.3488, "P", "PPLC", "FR", 2138551),
    ("2996944", "Lyon", "Lyon", "Lyons,Lione", 45.74846, 4.84671, "P", "PPLA", "FR", 522969),
    ("4250542", "Springfield", "Springfield", "Springfield IL", 39.80172, -89.64371, "P", "PPLA", "US", 116565),
    ("4951788", "Springfield", "Springfield", "Springfield MA", 42.10148, -72.58981, "P", "PPLA2", "US", 155929),
    ("4699066", "Houston", "Houston", "Hyuston", 29.76328, -95.36327, "P", "PPLA2", "US", 2304580),
    ("4930956", "Boston", "Boston", "Beantown", 42.35843, -71.05977, "P", "PPLA", "US", 692600),
    ("4887398", "Chicago", "Chicago", "Chicago IL", 41.85003, -87.65005, "P", "PPLA2", "US", 2746388),
    ("2950159", "Berlin", "Berlin", "Berlín,Berlino", 52.52437, 13.41053, "P", "PPLC", "DE", 3426354),
    ("2867714", "Munich", "Munich", "München,Monaco di Baviera", 48.13743, 11.57549, "P", "PPLA", "DE", 1260391),
    ("3181528", "Brindisi", "Brindisi", "Brundisium", 40.63215, 17.93607, "P", "PPLA2", "IT", 87141),
    ("3169070", "Rome", "Rome", "Roma,Rom", 41.89193, 12.51133, "P", "PPLC", "IT", 2318895),
    ("3413829", "Reykjavik", "Reykjavik", "Reykjavík", 64.13548, -21.89541, "P", "PPLC", "IS", 118918),
    # Too small to count as a city, and a non-place feature: both ignored on load.
    ("2754817", "Hilversumse Meent", "Hilversumse Meent", "", 52.27, 5.18, "P", "PPL", "NL", 300),
    ("6942554", "Onze Lieve Vrouwe Gasthuis", "Onze Lieve Vrouwe Gasthuis", "", 52.35993, 4.91441, "S", "HSP", "NL", 0),
]

STATE_OF = {
    "2759794": "2749879", "2745912": "2745909", "2747891": "2743698",
    "2643743": "6269131", "2653941": "6269131", "2988507": "3012874",
    "2996944": "11071625", "4250542": "4896861", "4951788": "6254926",
    "4699066": "4736286", "4930956": "6254926", "4887398": "4896861",
    "2950159": "2950157", "2867714": "2951839", "3181528": "3169778",
    "3169070": "3174976", "3413829": "3426183",
}
COUNTRY_OF = {
    "NL": "2750405", "GB": "2635167", "FR": "3017382", "US": "6252001",
    "DE": "2921044", "IT": "3175395", "IS": "2629691",
}

H, E, P = "HEALTHCARE_ORGANIZATION", "EDUCATIONAL_INSTITUTION", "PHARMACEUTICAL_COMPANY"

# name, city id (or None), type, extra labels {lang: text}, pattern
#   full:    Wikidata, GeoNames, DBpedia and YAGO all sameAs-linked (+ UMLS alone)
#   partial: Wikidata <-> DBpedia, YAGO -> DBpedia; GeoNames unlinked but nearby
#   string:  Wikidata alone; DBpedia unlinked with the same city and country
#   triple:  Wikidata and UMLS; UMLS has three identical aliases and a country
#   single:  Wikidata only
FACILITIES = [
    ("Academic Medical Center", "2759794", H, {"nl": "Academisch Medisch Centrum"}, "full"),
    ("VU University Medical Center", "2759794", H, {"nl": "VU Medisch Centrum"}, "partial"),
    ("Onze Lieve Vrouwe Gasthuis", "2759794", H, {}, "string"),
    ("Antoni van Leeuwenhoek Hospital", "2759794", H, {"nl": "Antoni van Leeuwenhoek Ziekenhuis"}, "full"),
    ("University of Amsterdam", "2759794", E, {"nl": "Universiteit van Amsterdam"}, "partial"),
    ("University Medical Center Utrecht", "2745912", H, {"nl": "Universitair Medisch Centrum Utrecht"}, "full"),
    ("Utrecht University", "2745912", E, {"nl": "Universiteit Utrecht"}, "string"),
    ("Erasmus MC", "2747891", H, {"nl": "Erasmus Medisch Centrum"}, "triple"),
    ("Guy's Hospital", "2643743", H, {}, "full"),
    ("St Thomas' Hospital", "2643743", H, {}, "partial"),
    ("Great Ormond Street Hospital", "2643743", H, {"fr": "Hôpital de Great Ormond Street"}, "full"),
    ("Royal Marsden Hospital", "2643743", H, {}, "string"),
    ("University College London", "2643743", E, {"fr": "University College de Londres"}, "full"),
    ("Imperial College London", "2643743", E, {"de": "Imperial College London"}, "partial"),
    ("Addenbrooke's Hospital", "2653941", H, {}, "full"),
    ("University of Cambridge", "2653941", E, {"fr": "Université de Cambridge", "de": "Universität Cambridge"}, "full"),
    ("AstraZeneca", "2653941", P, {}, "triple"),
    ("GlaxoSmithKline", "2643743", P, {}, "partial"),
    ("Pitié-Salpêtrière Hospital", "2988507", H, {"fr": "Hôpital de la Pitié-Salpêtrière"}, "full"),
    ("Necker-Enfants Malades Hospital", "2988507", H, {"fr": "Hôpital Necker-Enfants malades"}, "partial"),
    ("Institut Curie", "2988507", H, {"en": "Curie Institute"}, "full"),
    ("Sorbonne University", "2988507", E, {"fr": "Sorbonne Université"}, "string"),
    ("Sanofi", "2988507", P, {"fr": "Sanofi"}, "triple"),
    ("Hospices Civils de Lyon", "2996944", H, {}, "partial"),
    ("Memorial Medical Center", "4250542", H, {}, "full"),
    ("St. John's Hospital", "4250542", H, {}, "string"),
    ("Baystate Medical Center", "4951788", H, {}, "partial"),
    ("Mercy Medical Center", "4951788", H, {}, "single"),
    ("MD Anderson Cancer Center", "4699066", H, {"es": "Centro de Cáncer MD Anderson"}, "full"),
    ("Houston Methodist Hospital", "4699066", H, {}, "partial"),
    ("Massachusetts General Hospital", "4930956", H, {"de": "Massachusetts General Hospital"}, "full"),
    ("Boston Children's Hospital", "4930956", H, {}, "string"),
    ("Dana-Farber Cancer Institute", "4930956", H, {}, "full"),
    ("Harvard University", "4930956", E, {"fr": "Université Harvard", "de": "Harvard-Universität", "it": "Università di Harvard"}, "full"),
    ("Northwestern Memorial Hospital", "4887398", H, {}, "partial"),
    ("Rush University Medical Center", "4887398", H, {}, "single"),
    ("University of Chicago", "4887398", E, {"fr": "Université de Chicago"}, "full"),
    ("Charité", "2950159", H, {"de": "Charité – Universitätsmedizin Berlin"}, "full"),
    ("Humboldt University of Berlin", "2950159", E, {"de": "Humboldt-Universität zu Berlin"}, "partial"),
    ("Klinikum rechts der Isar", "2867714", H, {}, "string"),
    ("Ludwig Maximilian University of Munich", "2867714", E, {"de": "Ludwig-Maximilians-Universität München"}, "full"),
    ("Bayer", None, P, {"de": "Bayer AG"}, "triple"),
    ("Landspítali", "3413829", H, {"en": "National University Hospital of Iceland"}, "full"),
    ("Perrino Hospital", "3181528", H, {"it": "Ospedale Antonio Perrino"}, "partial"),
    ("Agostino Gemelli University Policlinic", "3169070", H, {"it": "Policlinico Universitario Agostino Gemelli"}, "full"),
    ("Sapienza University of Rome", "3169070", E, {"it": "Sapienza Università di Roma"}, "string"),
    ("Pfizer", None, P, {}, "triple"),
    ("Janssen Pharmaceutica", None, P, {"nl": "Janssen Pharmaceutica NV"}, "single"),
]

# Category concepts that the blacklist removes.
NOISE = [
    ("dbpedia", "Hospital", "Hospital", H),
    ("dbpedia", "University", "University", E),
    ("umls", "C0020021", "Hospitals", H),
    ("umls", "C0442592", "Health care facility", H),
]

REGISTRY_SITES = [
    # facility_name, city, zip, state, country
    ("Academic Medical Center", "Amsterdam", "1105 AZ", "", "Netherlands"),
    ("Antoni van Leeuwenhoek Hospital", "Amsterdam", "1066 CX", "", "Netherlands"),
    ("University Medical Center Utrecht", "Utrecht", "3584 CX", "", "Netherlands"),
    ("Guy's Hospital", "London", "SE1 9RT", "", "United Kingdom"),
    ("Royal Marsden Hospital", "London", "SW3 6JJ", "", "United Kingdom"),
    ("Addenbrookes Hospital", "Cambridge", "CB2 0QQ", "", "United Kingdom"),
    ("Institut Curie", "Paris", "75005", "", "France"),
    ("Memorial Medical Center", "Springfield", "62781", "Illinois", "United States"),
    ("Baystate Medical Center", "Springfield", "01199", "Massachusetts", "United States"),
    ("MD Anderson Cancer Center", "Houston", "77030", "Texas", "United States"),
    ("Massachusetts General Hospital", "Boston", "02114", "Massachusetts", "United States"),
    ("Dana Farber Cancer Institute", "Boston", "02215", "Massachusetts", "United States"),
    ("Pfizer Investigational Site", "Chicago", "", "Illinois", "United States"),
    ("Site 128", "Berlin", "", "", "Germany"),
    ("Local Institution", "Rome", "", "", "Italy"),
    ("Azienda Sanitaria Locale Brindisi", "Brindisi", "", "", "Italy"),
    ("Clinique Saint-Jean", "Lyon", "69008", "", "France"),
    ("Springfield Clinical Research Associates", "Springfield", "62702", "Illinois", "United States"),
    ("Reykjavik Dermatology Practice", "Reykjavik", "101", "", "Iceland"),
    ("Memorial Medical Center", "Houston", "77002", "Texas", "United States"),
]

POPULATION = [
    ("2750405", 17231017),
    ("2635167", 66488991),
    ("3017382", 66987244),
    ("6252001", 327167434),
    ("2921044", 82927922),
    ("3175395", 60431283),
    ("2629691", 353574),
]


def slug(name: str) -> str:
    return name.replace(" ", "_")


def jitter(rng: random.Random, lat: float, lon: float, km: float) -> tuple[float, float]:
    # About 111 km per degree of latitude; good enough for a small offset.
    dlat = rng.uniform(-km, km) / 111.0
    dlon = rng.uniform(-km, km) / 70.0
    return round(lat + dlat, 6), round(lon + dlon, 6)


def place_refs(city_id):
    row = next(r for r in GAZETTEER if r[0] == city_id)
    state = next(r for r in GAZETTEER if r[0] == STATE_OF[city_id])
    country = next(r for r in GAZETTEER if r[0] == COUNTRY_OF[row[8]])
    return row, state, country


def build_records(rng: random.Random) -> dict[str, list[dict]]:
    dumps = {s: [] for s in ("wikidata", "geonames", "dbpedia", "yago", "umls")}
    q, g, c = 100001, 9000001, 3000001
    for name, city_id, stype, labels, pattern in FACILITIES:
        aliases = [{"text": name, "lang": "en"}]
        aliases += [{"text": t, "lang": lang} for lang, t in labels.items() if t != name or lang != "en"]
        if city_id:
            city, state, country = place_refs(city_id)
            base = jitter(rng, city[4], city[5], 3.0)
        else:
            city = state = country = None
            base = None
        qid, gid, cui = f"Q{q}", str(g), f"C{c:07d}"
        q, g, c = q + 1, g + 1, c + 1
        page = slug(name)

        wd = {"source": "wikidata", "id": qid, "types": [stype], "aliases": aliases}
        if city_id:
            wd["admin_territories"] = [city[0]]
            wd["country"] = {"geonames_id": country[0]}
            wd["lat"], wd["lon"] = base

        def located(rec, km, with_ids=True, text_place=False):
            if not city_id:
                return rec
            lat, lon = jitter(rng, base[0], base[1], km)
            rec["lat"], rec["lon"] = lat, lon
            if text_place:
                rec["city"] = {"name": city[1]}
                rec["country"] = {"name": country[1]}
            elif with_ids:
                rec["city"] = {"geonames_id": city[0], "name": city[1]}
                rec["country"] = {"geonames_id": country[0]}
            return rec

        if pattern == "full":
            wd["sameas"] = {"dbpedia": page, "yago": page, "geonames": gid}
            gn = located({"source": "geonames", "id": gid, "types": [stype],
                          "aliases": [{"text": name}], "sameas": {"wikidata": qid}}, 0.2)
            db = located({"source": "dbpedia", "id": page, "types": [stype],
                          "aliases": aliases[:2], "sameas": {"wikidata": qid, "yago": page, "geonames": gid}},
                         0.2, text_place=True)
            yg = {"source": "yago", "id": page, "types": [stype], "aliases": [{"text": name, "lang": "en"}],
                  "sameas": {"wikidata": qid, "dbpedia": page, "geonames": gid}}
            dumps["geonames"].append(gn)
            dumps["dbpedia"].append(db)
            dumps["yago"].append(yg)
            dumps["umls"].append({"source": "umls", "id": cui, "types": [stype],
                                  "aliases": [{"text": name.upper()}]})
        elif pattern == "partial":
            wd["sameas"] = {"dbpedia": page}
            db = located({"source": "dbpedia", "id": page, "types": [stype], "aliases": aliases[:1]},
                         0.2, text_place=True)
            yg = {"source": "yago", "id": page, "types": [stype], "aliases": [{"text": name, "lang": "en"}],
                  "sameas": {"dbpedia": page}}
            gn = located({"source": "geonames", "id": gid, "types": [stype],
                          "aliases": [{"text": name}]}, 0.3)
            dumps["dbpedia"].append(db)
            dumps["yago"].append(yg)
            dumps["geonames"].append(gn)
        elif pattern == "string":
            db = located({"source": "dbpedia", "id": page, "types": [stype], "aliases": aliases},
                         5.0, text_place=True)
            db.pop("lat", None)
            db.pop("lon", None)
            dumps["dbpedia"].append(db)
        elif pattern == "triple":
            variants = [name, name + " plc" if stype == P else name, name]
            umls = {"source": "umls", "id": cui, "types": [stype],
                    "aliases": [{"text": name, "lang": "en"}, {"text": name.upper(), "lang": "en"},
                                {"text": name.lower()}, {"text": variants[1]}]}
            if country is not None:
                umls["country"] = {"geonames_id": country[0]}
                wd.pop("lat", None)
                wd.pop("lon", None)
            else:
                umls["country"] = {"name": "United States"}
                wd["country"] = {"name": "United States"}
            # Three distinct spellings with identical trigram profiles.
            dumps["umls"].append(umls)
            wd["aliases"] = wd["aliases"] + [{"text": name.upper()}, {"text": name.lower()}]
        dumps["wikidata"].append(wd)

    # Unrelated local concepts, one source each, to fill out the corpus.
    extras = [
        ("Westfriesgasthuis", "2759794"), ("Zaans Medisch Centrum", "2759794"),
        ("Diakonessenhuis", "2745912"), ("Maasstad Ziekenhuis", "2747891"),
        ("Ikazia Ziekenhuis", "2747891"), ("Whittington Hospital", "2643743"),
        ("Homerton University Hospital", "2643743"), ("Royal Papworth Hospital", "2653941"),
        ("Hopital Cochin", "2988507"), ("Hopital Saint-Louis", "2988507"),
        ("Hopital Edouard Herriot", "2996944"), ("Centre Leon Berard", "2996944"),
        ("Springfield Clinic", "4250542"), ("Shriners Hospital for Children", "4951788"),
        ("Ben Taub Hospital", "4699066"), ("Texas Children's Hospital", "4699066"),
        ("Beth Israel Deaconess Medical Center", "4930956"), ("Brigham and Women's Hospital", "4930956"),
        ("Tufts Medical Center", "4930956"), ("Lurie Children's Hospital", "4887398"),
        ("Vivantes Klinikum Neukolln", "2950159"), ("Deutsches Herzzentrum Berlin", "2950159"),
        ("Helios Klinikum Berlin-Buch", "2950159"), ("Schwabing Hospital", "2867714"),
        ("Ospedale Di Summa", "3181528"), ("Ospedale San Camillo", "3169070"),
        ("Ospedale Sandro Pertini", "3169070"), ("Children's Hospital Reykjavik", "3413829"),
        ("Boston University", "4930956"), ("Northeastern University", "4930956"),
        ("King's College London", "2643743"), ("Erasmus University Rotterdam", "2747891"),
        ("Technical University of Munich", "2867714"), ("Free University of Berlin", "2950159"),
        ("University of Illinois Springfield", "4250542"), ("American International College", "4951788"),
    ]
    sources = ("wikidata", "geonames", "dbpedia", "yago")
    for i, (name, city_id) in enumerate(extras):
        stype = E if ("University" in name or "College" in name) else H
        source = sources[i % 4]
        city, state, country = place_refs(city_id)
        lat, lon = jitter(rng, city[4], city[5], 6.0)
        if source == "wikidata":
            nid = f"Q{q}"
            q += 1
        elif source == "geonames":
            nid = str(g)
            g += 1
        else:
            nid = slug(name)
        rec = {"source": source, "id": nid, "types": [stype], "aliases": [{"text": name, "lang": "en"}]}
        if source == "wikidata":
            rec["admin_territories"] = [city[0], state[0]]
            rec["lat"], rec["lon"] = lat, lon
        elif source == "geonames":
            rec["city"] = {"geonames_id": city[0]}
            rec["lat"], rec["lon"] = lat, lon
        else:
            rec["city"] = {"name": city[1]}
            rec["state"] = {"name": state[1]}
            rec["country"] = {"name": country[1]}
            if i % 3 == 0:
                rec["lat"], rec["lon"] = lat, lon
            if i % 5 == 0:
                rec["lat"], rec["lon"] = 0.0, 0.0
        dumps[source].append(rec)

    for source, nid, text, stype in NOISE:
        dumps[source].append({"source": source, "id": nid, "types": [stype],
                              "aliases": [{"text": text, "lang": "en"}]})
    return dumps


def write(out: Path) -> None:
    rng = random.Random(SEED)
    out.mkdir(parents=True, exist_ok=True)
    (out / "dumps").mkdir(exist_ok=True)

    with open(out / "gazetteer.tsv", "w", encoding="utf-8", newline="\n") as fh:
        for gid, name, ascii_name, alts, lat, lon, fclass, fcode, cc, pop in GAZETTEER:
            row = [gid, name, ascii_name, alts, str(lat), str(lon), fclass, fcode, cc,
                   "", "", "", "", "", str(pop), "", "", "", "2021-01-01"]
            fh.write("\t".join(row) + "\n")

    dumps = build_records(rng)
    total = 0
    for source, records in dumps.items():
        with open(out / "dumps" / f"{source}.jsonl", "w", encoding="utf-8", newline="\n") as fh:
            for rec in records:
                fh.write(json.dumps(rec, ensure_ascii=False, sort_keys=True) + "\n")
            if source == "dbpedia":
                fh.write("{not valid json\n")
        total += len(records)

    with open(out / "blacklist.txt", "w", encoding="utf-8", newline="\n") as fh:
        fh.write("# Concepts naming a category of facility rather than a facility.\n")
        fh.write("DBPEDIA:Hospital\nDBPEDIA:University\nUMLS:C0020021\nUMLS:C0442592\n")

    with open(out / "registry.tsv", "w", encoding="utf-8", newline="\n") as fh:
        fh.write("trial_id\tfacility_name\tcity\tzip\tstate\tcountry\n")
        trials = [f"NCT{4000000 + i:08d}" for i in range(12)]
        for i, site in enumerate(REGISTRY_SITES):
            mentions = 1 + (i % 3 == 0)
            for j in range(mentions):
                trial = trials[(i + 5 * j) % len(trials)]
                fh.write("\t".join((trial, *site)) + "\n")

    with open(out / "population.tsv", "w", encoding="utf-8", newline="\n") as fh:
        fh.write("country_geonames_id\tpopulation\n")
        for gid, pop in POPULATION:
            fh.write(f"{gid}\t{pop}\n")

    manifest = {
        "dumps": {s: f"dumps/{s}.jsonl" for s in dumps},
        "gazetteer": "gazetteer.tsv",
        "blacklist": "blacklist.txt",
        "registry": "registry.tsv",
        "population": "population.tsv",
        "output_dir": "out",
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    print(f"wrote {total} records to {out}", file=sys.stderr)


if __name__ == "__main__":
    write(Path(sys.argv[1]) if len(sys.argv) > 1 else Path(__file__).resolve().parent.parent / "demo")
