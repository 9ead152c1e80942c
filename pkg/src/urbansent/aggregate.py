"""Roll review sentiment up to POI and census block group levels.

Retention thresholds differ on purpose: a POI needs at least
``poi_min_reviews`` qualifying reviews (inclusive), while a CBG must exceed
``cbg_min_reviews`` in total (strict).
"""

from __future__ import annotations

from dataclasses import dataclass

POI_MIN_REVIEWS = 10
CBG_MIN_REVIEWS = 10

# 2-digit NAICS sector names for the codes that show up in review corpora.
# 44-45, 31-33, and 48-49 are ranges sharing one sector name.
NAICS_SECTORS = {
    "11": "Agriculture, Forestry, Fishing and Hunting",
    "21": "Mining, Quarrying, and Oil and Gas Extraction",
    "22": "Utilities",
    "23": "Construction",
    "31": "Manufacturing",
    "32": "Manufacturing",
    "33": "Manufacturing",
    "42": "Wholesale Trade",
    "44": "Retail Trade",
    "45": "Retail Trade",
    "48": "Transportation and Warehousing",
    "49": "Transportation and Warehousing",
    "51": "Information",
    "52": "Finance and Insurance",
    "53": "Real Estate and Rental and Leasing",
    "54": "Professional, Scientific, and Technical Services",
    "55": "Management of Companies and Enterprises",
    "56": "Administrative and Support and Waste Management",
    "61": "Educational Services",
    "62": "Health Care and Social Assistance",
    "71": "Arts, Entertainment, and Recreation",
    "72": "Accommodation and Food Services",
    "81": "Other Services (except Public Administration)",
    "92": "Public Administration",
}

# Merged-range keys: the 2-digit prefix maps onto a canonical sector key so
# 44 and 45 (for example) count as one category.
_SECTOR_KEYS = {"45": "44", "32": "31", "33": "31", "49": "48"}


@dataclass(frozen=True)
class PoiSentiment:
    poi_id: str
    latitude: float
    longitude: float
    naics_code: str
    n_density_reviews: int
    mean_sentiment: float

    @property
    def naics_top2(self) -> str:
        return self.naics_code[:2]


@dataclass(frozen=True)
class CbgSentiment:
    cbg_id: str
    total_reviews: int
    weighted_mean: float


def poi_sentiment(pois, review_values, min_reviews: int = POI_MIN_REVIEWS):
    """Mean sentiment per POI over its qualifying reviews.

    ``review_values`` maps poi_id to the list of review-level sentiment
    values (True-classified reviews with applicable sentiment only).
    Returns (retained rows sorted by poi_id, dropped-POI count).
    """
    retained = []
    dropped = 0
    for poi in pois:
        values = review_values.get(poi.poi_id, [])
        if len(values) < min_reviews:
            if values:
                dropped += 1
            continue
        retained.append(
            PoiSentiment(
                poi_id=poi.poi_id,
                latitude=poi.latitude,
                longitude=poi.longitude,
                naics_code=poi.naics_code,
                n_density_reviews=len(values),
                mean_sentiment=sum(values) / len(values),
            )
        )
    retained.sort(key=lambda p: p.poi_id)
    return retained, dropped


def cbg_sentiment(poi_rows, poi_cbg: dict[str, str], min_reviews: int = CBG_MIN_REVIEWS):
    """Review-count-weighted mean per CBG; total must exceed the threshold.

    ``poi_cbg`` maps poi_id to cbg_id; every retained POI must be mapped.
    Returns (retained rows sorted by cbg_id, dropped-CBG count).
    """
    sums: dict[str, float] = {}
    counts: dict[str, int] = {}
    for row in poi_rows:
        cbg_id = poi_cbg.get(row.poi_id)
        if cbg_id is None:
            raise ValueError(f"poi {row.poi_id!r} has no cbg assignment")
        sums[cbg_id] = sums.get(cbg_id, 0.0) + row.mean_sentiment * row.n_density_reviews
        counts[cbg_id] = counts.get(cbg_id, 0) + row.n_density_reviews
    retained = []
    dropped = 0
    for cbg_id in sorted(counts):
        total = counts[cbg_id]
        if total <= min_reviews:
            dropped += 1
            continue
        retained.append(CbgSentiment(cbg_id=cbg_id, total_reviews=total, weighted_mean=sums[cbg_id] / total))
    return retained, dropped


def sector_name(naics_code: str) -> str:
    """Merged 2-digit sector name for a code; 'Unknown' when unparseable."""
    if not naics_code.isdigit() or len(naics_code) < 2:
        return "Unknown"
    canonical = _SECTOR_KEYS.get(naics_code[:2], naics_code[:2])
    return NAICS_SECTORS.get(canonical, "Unknown")


def naics_rollup(poi_rows):
    """POI counts per merged 2-digit sector and per finer subcategory.

    Returns (sector_counts, subcategory_counts); sector keys are
    (canonical_prefix, name) pairs, subcategory keys are 4-digit prefixes
    (or the full code when shorter). Unparseable codes land in 'unknown'.
    """
    sectors: dict[tuple[str, str], int] = {}
    subcategories: dict[str, int] = {}
    for row in poi_rows:
        code = row.naics_code
        if not code.isdigit() or len(code) < 2:
            key = ("unknown", "Unknown")
            sub = "unknown"
        else:
            prefix = code[:2]
            canonical = _SECTOR_KEYS.get(prefix, prefix)
            name = NAICS_SECTORS.get(canonical)
            if name is None:
                key = ("unknown", "Unknown")
                sub = "unknown"
            else:
                key = (canonical, name)
                sub = code[:4]
        sectors[key] = sectors.get(key, 0) + 1
        subcategories[sub] = subcategories.get(sub, 0) + 1
    return sectors, subcategories
