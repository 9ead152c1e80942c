"""Generate the bundled toy-city fixture under src/urbansent/data/toycity/.

Every generated sentence is checked against the shipped lexicon and word
lists so the fixture keeps its intended properties: filler reviews never
match the lexicon, density sentences score the label their template claims,
and retained POIs clear the review threshold with margin. Rerunning the
script reproduces the fixture byte for byte.
"""

from __future__ import annotations

import csv
import json
import sys
from pathlib import Path

import numpy as np

ROOT = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(ROOT / "src"))

from urbansent import ontology, sentiment, textprep  # noqa: E402

OUT = ROOT / "src" / "urbansent" / "data" / "toycity"
SEED = 20240817

CBGS = ["131210001001", "131210001002", "131210002001"]
FAKE_CBG = "131210009999"  # pre-assigned id with no factor row
# lon bands per CBG, shared lat band
BANDS = {
    "131210001001": (-84.420, -84.390),
    "131210001002": (-84.390, -84.360),
    "131210002001": (-84.360, -84.330),
}
LAT_RANGE = (33.730, 33.790)

# (expected label, text) for sentences that must match the lexicon
DENSITY_POSITIVE = [
    "Parking was easy to find even on a Saturday.",
    "It is close to the station and the walk over is pleasant.",
    "Easy access from the highway and a quick drive home.",
    "The neighborhood around it is quiet and walkable.",
    "Plenty of parking and the lot stays quiet.",
    "Transit stops nearby make getting here so easy.",
    "Great location with a spacious lot out front.",
    "The surrounding streets felt peaceful on our evening walk.",
    "Being right next to the park makes the trip lovely.",
    "Quick to reach by bus and the stop is adjacent.",
]
DENSITY_NEGATIVE = [
    "Parking here is a nightmare on weekends.",
    "Traffic around this location is horrible at rush hour.",
    "The area gets crowded and noisy after five.",
    "Finding parking felt impossible and stressful.",
    "It is far from any transit and the drive is awful.",
    "Constant congestion makes the street outside chaotic every evening.",
    "Terrible congestion on every road nearby.",
    "The district feels hectic and the sidewalks are packed with noisy crowds.",
    "Awful traffic and the parking lot is always packed.",
    "The surrounding block is loud, dirty, and crowded.",
]
# flagged by the lexicon but not about getting there; classifier target False
FALSE_POSITIVE = [
    "The seating area near the window was lovely.",
    "Our table in the outdoor patio area felt cozy.",
    "The dining area was decorated beautifully for the season.",
    "Staff brought dessert to our area within minutes.",
    "The bar area near the kitchen smelled wonderful.",
    "We sat in the outdoor garden area and the roses were beautiful.",
    "The waiting area near the entrance has charming artwork.",
    "The kids play area near the counter kept everyone happy.",
]
# must never match the lexicon, either as a sentence or inside a review
FILLER = [
    "The espresso was rich and smooth.",
    "Staff remembered our usual order.",
    "Portions are generous for the price.",
    "The playlist was fun without being loud.",
    "Fresh flowers on every table.",
    "The menu changes with the season.",
    "Service was quick and friendly.",
    "The pastries sold out before noon.",
    "Our server suggested a wonderful dessert.",
    "The decor mixes brick with warm wood.",
    "Happy hour prices are a steal.",
    "The soup of the day was delicious.",
]

NAICS_POOL = [
    ("722511", 12),  # restaurants
    ("722515", 4),   # coffee shops
    ("445110", 5),   # grocery
    ("448140", 4),   # clothing
    ("451110", 3),   # sporting goods
    ("812112", 3),   # salons
    ("531120", 3),   # commercial property
    ("541511", 3),   # software services
    ("611110", 3),   # schools
    ("712130", 2),   # zoos and gardens
    ("721110", 2),   # hotels
    ("522110", 2),   # banks
    ("622110", 1),   # hospital
    ("236220", 1),   # construction
    ("811111", 2),   # auto repair
]

NAME_FIRST = ["Peach", "Ponce", "Midtown", "Summerhill", "Oakland", "Decatur", "Cascade", "Grant Park", "Westside", "Candler"]
NAME_SECOND = ["Coffee Works", "Kitchen", "Market", "Books", "Diner", "Fitness", "Bakery", "Tavern", "Salon", "Supply Co"]
AUTHORS = [
    "Alex P.", "Jordan R.", "Sam K.", "Taylor M.", "Casey L.", "Riley S.", "Morgan B.", "Jamie W.",
    "Drew H.", "Quinn F.", "Avery D.", "Reese T.", "Skyler J.", "Rowan C.", "Emerson V.", "Harper N.",
]


def check_templates(lexicon, lists) -> None:
    for text in DENSITY_POSITIVE + DENSITY_NEGATIVE + FALSE_POSITIVE:
        toks = textprep.tokenize(text)
        assert ontology.match_tokens(toks, lexicon), f"template must match lexicon: {text}"
    for text in DENSITY_POSITIVE:
        label = sentiment.label_from_triple(sentiment.lexicon_score(text, lists))
        assert label is sentiment.SentimentLabel.POSITIVE, f"expected positive: {text} -> {label}"
    for text in DENSITY_NEGATIVE:
        label = sentiment.label_from_triple(sentiment.lexicon_score(text, lists))
        assert label is sentiment.SentimentLabel.NEGATIVE, f"expected negative: {text} -> {label}"
    for text in FILLER:
        toks = textprep.tokenize(text)
        assert not ontology.match_tokens(toks, lexicon), f"filler must not match lexicon: {text}"


def build_pois(rng) -> list[dict]:
    codes = [code for code, n in NAICS_POOL for _ in range(n)]
    assert len(codes) == 50
    pois = []
    for i in range(50):
        cbg = CBGS[i % 3]
        lo, hi = BANDS[cbg]
        lon = float(rng.uniform(lo + 0.002, hi - 0.002))
        lat = float(rng.uniform(LAT_RANGE[0] + 0.002, LAT_RANGE[1] - 0.002))
        name = f"{NAME_FIRST[i % len(NAME_FIRST)]} {NAME_SECOND[(i // len(NAME_FIRST)) % len(NAME_SECOND)]}"
        pois.append(
            {
                "poi_id": f"poi-{i + 1:03d}",
                "name": name,
                "latitude": round(lat, 6),
                "longitude": round(lon, 6),
                "naics_code": codes[i],
                "cbg_id": "",
                "expected_cbg": cbg,
                "sparse": i in (12, 25, 38, 49),
            }
        )
    # two POIs sit outside every polygon: no CBG unless pre-assigned
    pois[7]["latitude"] = 33.700000
    pois[7]["expected_cbg"] = None
    pois[31]["latitude"] = 33.701500
    pois[31]["expected_cbg"] = None
    # one POI pre-assigned to a CBG that has no factor row
    pois[19]["cbg_id"] = FAKE_CBG
    pois[19]["expected_cbg"] = FAKE_CBG
    # one pre-assignment overriding geometry (sits in band 0, pinned to band 2's id)
    pois[22]["cbg_id"] = CBGS[2]
    pois[22]["expected_cbg"] = CBGS[2]
    return pois


def make_review(rng, serial: int, poi: dict, genre: str, mood: float, lexicon) -> dict:
    sentences: list[str] = []
    if genre == "density":
        n_density = int(rng.integers(2, 4))
        for _ in range(n_density):
            pool = DENSITY_POSITIVE if rng.random() < (1 + mood) / 2 else DENSITY_NEGATIVE
            sentences.append(pool[int(rng.integers(0, len(pool)))])
        if rng.random() < 0.5:
            sentences.append(FILLER[int(rng.integers(0, len(FILLER)))])
    elif genre == "falsepos":
        for _ in range(int(rng.integers(1, 3))):
            sentences.append(FALSE_POSITIVE[int(rng.integers(0, len(FALSE_POSITIVE)))])
        sentences.append(FILLER[int(rng.integers(0, len(FILLER)))])
    else:
        for _ in range(int(rng.integers(2, 4))):
            sentences.append(FILLER[int(rng.integers(0, len(FILLER)))])
    text = " ".join(sentences)
    toks = textprep.tokenize(text)
    matched = bool(ontology.match_tokens(toks, lexicon))
    assert matched == (genre != "filler"), f"unexpected lexicon behaviour for {genre}: {text}"

    n_pos = sum(s in DENSITY_POSITIVE for s in sentences)
    n_neg = sum(s in DENSITY_NEGATIVE for s in sentences)
    if genre == "density":
        rating = 4 + int(rng.integers(0, 2)) if n_pos >= n_neg else 1 + int(rng.integers(0, 2))
    else:
        rating = 3 + int(rng.integers(0, 3))
    return {
        "review_id": f"r{serial:05d}",
        "author": AUTHORS[int(rng.integers(0, len(AUTHORS)))],
        "rating": rating,
        "likes": int(rng.integers(0, 12)),
        "text": text,
        "_genre": genre,
        "_signal": n_pos - n_neg,
    }


def main() -> None:
    rng = np.random.default_rng(SEED)
    lexicon = ontology.load_lexicon(ontology.bundled_lexicon_path())
    lists = sentiment.bundled_word_lists()
    check_templates(lexicon, lists)

    pois = build_pois(rng)
    OUT.mkdir(parents=True, exist_ok=True)
    (OUT / "reviews").mkdir(exist_ok=True)

    serial = 1
    labels: list[tuple[str, bool]] = []
    for poi in pois:
        mood = float(rng.uniform(-0.9, 0.9))
        n_density = int(rng.integers(4, 7)) if poi["sparse"] else int(rng.integers(12, 17))
        n_false = int(rng.integers(0, 2)) if poi["sparse"] else int(rng.integers(1, 4))
        n_filler = int(rng.integers(1, 3)) if poi["sparse"] else int(rng.integers(2, 5))
        reviews = []
        for _ in range(n_density):
            reviews.append(make_review(rng, serial, poi, "density", mood, lexicon))
            serial += 1
        for _ in range(n_false):
            reviews.append(make_review(rng, serial, poi, "falsepos", mood, lexicon))
            serial += 1
        for _ in range(n_filler):
            reviews.append(make_review(rng, serial, poi, "filler", mood, lexicon))
            serial += 1
        for r in reviews:
            if r["_genre"] == "density" and rng.random() < 0.40:
                labels.append((r["review_id"], True))
            elif r["_genre"] == "falsepos" and rng.random() < 0.85:
                labels.append((r["review_id"], False))
        payload = [
            {"review_id": r["review_id"], "author": r["author"], "rating": r["rating"], "likes": r["likes"], "text": r["text"]}
            for r in reviews
        ]
        (OUT / "reviews" / f"{poi['poi_id']}.json").write_text(
            json.dumps(payload, indent=1, sort_keys=True) + "\n", encoding="utf-8"
        )

    n_true = sum(1 for _, v in labels if v)
    n_false_lab = len(labels) - n_true
    assert n_true >= 25 and n_false_lab >= 25, f"label balance too thin: {n_true} true / {n_false_lab} false"

    with open(OUT / "pois.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["poi_id", "name", "latitude", "longitude", "naics_code", "cbg_id"])
        for poi in pois:
            writer.writerow(
                [poi["poi_id"], poi["name"], f"{poi['latitude']:.6f}", f"{poi['longitude']:.6f}", poi["naics_code"], poi["cbg_id"]]
            )

    with open(OUT / "labels.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["review_id", "label"])
        for rid, value in labels:
            writer.writerow([rid, "true" if value else "false"])

    lat_lo, lat_hi = LAT_RANGE
    features = []
    for cbg in CBGS:
        lo, hi = BANDS[cbg]
        ring = [[lo, lat_lo], [hi, lat_lo], [hi, lat_hi], [lo, lat_hi], [lo, lat_lo]]
        features.append(
            {"type": "Feature", "properties": {"cbg_id": cbg}, "geometry": {"type": "Polygon", "coordinates": [ring]}}
        )
    (OUT / "cbg_polygons.geojson").write_text(
        json.dumps({"type": "FeatureCollection", "features": features}, indent=1, sort_keys=True) + "\n", encoding="utf-8"
    )

    factor_cols = [
        "pct_college", "median_income", "pct_white", "pct_african_american", "pct_hispanic", "pct_asian",
        "pct_age_18_44", "pct_age_45_64", "pct_age_over_65", "pct_male", "population_density",
        "bus_stop_density", "metro_station_density", "primary_road_density", "secondary_road_density",
        "minor_road_density", "pct_industrial", "pct_institutional", "pct_utilities", "pct_commercial",
        "pct_residential", "lum",
    ]
    factor_rows = [
        [38.5, 52000, 41.2, 38.9, 9.4, 6.1, 46.3, 24.7, 11.2, 48.6, 3120.4, 14.2, 0.8, 2.1, 4.6, 18.3, 6.2, 9.8, 1.4, 22.6, 48.1, 0.42],
        [51.3, 68500, 52.7, 27.4, 7.8, 8.9, 52.1, 21.9, 9.7, 49.8, 4588.9, 21.7, 1.6, 3.4, 6.2, 22.9, 3.8, 12.4, 0.9, 31.2, 39.6, 0.61],
        [29.8, 41800, 33.6, 47.2, 12.3, 3.7, 41.8, 27.6, 14.9, 47.2, 2204.7, 9.6, 0.3, 1.2, 3.1, 14.7, 9.4, 7.1, 2.3, 17.8, 55.3, 0.77],
    ]
    with open(OUT / "cbg_factors.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["cbg_id"] + factor_cols)
        for cbg, row in zip(CBGS, factor_rows):
            writer.writerow([cbg] + row)

    config = {
        "poi_catalog": "pois.csv",
        "reviews_dir": "reviews",
        "cbg_factors": "cbg_factors.csv",
        "cbg_polygons": "cbg_polygons.geojson",
        "labels": "labels.csv",
        "classifier": "nb",
        "cv_folds": 5,
        "poi_min_reviews": 10,
        "cbg_min_reviews": 10,
        "sentiment_mode": "label",
        "lsva_top_k": 30,
        "pls_max_components": 1,
        "pls_folds": 3,
        "seed": 7,
        "out": "out/toycity",
        "geojson": True,
    }
    (OUT / "config.json").write_text(json.dumps(config, indent=2, sort_keys=True) + "\n", encoding="utf-8")

    total_reviews = serial - 1
    print(f"wrote {len(pois)} POIs, {total_reviews} reviews, {len(labels)} labels to {OUT}")


if __name__ == "__main__":
    main()
