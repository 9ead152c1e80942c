"""Parse and validate the four input artifacts into the canonical data model.

Real review dumps are dirty, so row-level problems accumulate into a
machine-readable validation report instead of aborting; only structural
problems (missing columns, unreadable files) raise.
"""

from __future__ import annotations

import csv
import json
import unicodedata
from dataclasses import dataclass, field
from pathlib import Path


class SchemaError(ValueError):
    """Input file structure does not match the documented schema."""


class GeometryError(ValueError):
    """Polygon geometry violates ring invariants."""


@dataclass(frozen=True)
class PointOfInterest:
    poi_id: str
    name: str
    latitude: float
    longitude: float
    naics_code: str
    cbg_id: str | None = None


@dataclass(frozen=True)
class Review:
    review_id: str
    poi_id: str
    author: str
    rating: int
    likes: int
    text: str


# Regression predictors for each census block group, in canonical column order.
CBG_FACTOR_COLUMNS = (
    "pct_college",
    "median_income",
    "pct_white",
    "pct_african_american",
    "pct_hispanic",
    "pct_asian",
    "pct_age_18_44",
    "pct_age_45_64",
    "pct_age_over_65",
    "pct_male",
    "population_density",
    "bus_stop_density",
    "metro_station_density",
    "primary_road_density",
    "secondary_road_density",
    "minor_road_density",
    "pct_industrial",
    "pct_institutional",
    "pct_utilities",
    "pct_commercial",
    "pct_residential",
    "lum",
)

_PCT_COLUMNS = frozenset(c for c in CBG_FACTOR_COLUMNS if c.startswith("pct_"))
_DENSITY_COLUMNS = frozenset(c for c in CBG_FACTOR_COLUMNS if c.endswith("_density"))


@dataclass(frozen=True)
class CbgRecord:
    cbg_id: str
    factors: dict[str, float]

    def __getattr__(self, name):
        try:
            return self.factors[name]
        except KeyError:
            raise AttributeError(name) from None


@dataclass(frozen=True)
class CbgPolygon:
    cbg_id: str
    rings: tuple[tuple[tuple[float, float], ...], ...]


@dataclass
class RowIssue:
    source: str
    row: int | str
    column: str
    message: str


@dataclass
class ValidationReport:
    """Non-fatal row-level errors plus skipped-review bookkeeping."""

    issues: list[RowIssue] = field(default_factory=list)
    skipped_reviews: list[dict] = field(default_factory=list)

    def add(self, source, row, column, message) -> None:
        self.issues.append(RowIssue(str(source), row, column, message))

    def merge(self, other: "ValidationReport") -> None:
        self.issues.extend(other.issues)
        self.skipped_reviews.extend(other.skipped_reviews)

    def __len__(self) -> int:
        return len(self.issues) + len(self.skipped_reviews)

    def to_dict(self) -> dict:
        return {
            "issues": [vars(i) for i in self.issues],
            "skipped_reviews": list(self.skipped_reviews),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


POI_COLUMNS = ("poi_id", "name", "latitude", "longitude", "naics_code", "cbg_id")


def _check_header(header, required, source) -> None:
    missing = [c for c in required if c not in header]
    if missing:
        raise SchemaError(f"{source}: missing column(s) {', '.join(missing)}")


def load_poi_catalog(path) -> tuple[list[PointOfInterest], ValidationReport]:
    """Parse the POI catalog CSV; row-level problems go to the report."""
    path = Path(path)
    report = ValidationReport()
    pois: list[PointOfInterest] = []
    seen: set[str] = set()
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise SchemaError(f"{path}: empty file, no header row")
        _check_header(reader.fieldnames, POI_COLUMNS, path)
        for rownum, row in enumerate(reader, start=2):
            poi_id = (row["poi_id"] or "").strip()
            if not poi_id:
                report.add(path, rownum, "poi_id", "empty poi_id")
                continue
            if poi_id in seen:
                report.add(path, rownum, "poi_id", f"duplicate poi_id {poi_id!r}; row rejected")
                continue
            try:
                lat = float(row["latitude"])
                lon = float(row["longitude"])
            except (TypeError, ValueError):
                report.add(path, rownum, "latitude/longitude", "non-numeric coordinate")
                continue
            if not -90.0 <= lat <= 90.0:
                report.add(path, rownum, "latitude", f"latitude {lat} outside [-90, 90]")
                continue
            if not -180.0 <= lon <= 180.0:
                report.add(path, rownum, "longitude", f"longitude {lon} outside [-180, 180]")
                continue
            naics = (row["naics_code"] or "").strip()
            if not naics.isdigit() or not 2 <= len(naics) <= 6:
                report.add(path, rownum, "naics_code", f"naics_code {naics!r} is not a 2-6 digit code")
                continue
            cbg = (row.get("cbg_id") or "").strip() or None
            seen.add(poi_id)
            pois.append(
                PointOfInterest(
                    poi_id=poi_id,
                    name=row.get("name") or "",
                    latitude=lat,
                    longitude=lon,
                    naics_code=naics,
                    cbg_id=cbg,
                )
            )
    return pois, report


def serialize_poi_catalog(pois) -> str:
    lines = [",".join(POI_COLUMNS)]
    for p in pois:
        writer_row = [p.poi_id, p.name, repr(p.latitude), repr(p.longitude), p.naics_code, p.cbg_id or ""]
        lines.append(_csv_line(writer_row))
    return "\n".join(lines) + "\n"


def _csv_line(cells) -> str:
    import io

    buf = io.StringIO()
    csv.writer(buf, lineterminator="").writerow(cells)
    return buf.getvalue()


def load_reviews(directory, known_poi_ids=None) -> tuple[list[Review], ValidationReport]:
    """Parse per-POI review files ``<poi_id>.json`` from a directory.

    Files whose poi_id does not resolve contribute to the skip report rather
    than failing; malformed files are file-level errors, also non-fatal.
    Review text is normalized to Unicode NFC; no other mutation.
    """
    directory = Path(directory)
    if not directory.is_dir():
        raise SchemaError(f"{directory}: not a directory")
    report = ValidationReport()
    reviews: list[Review] = []
    seen_ids: set[str] = set()
    for path in sorted(directory.glob("*.json")):
        poi_id = path.stem
        try:
            payload = json.loads(path.read_text(encoding="utf-8"))
        except (json.JSONDecodeError, UnicodeDecodeError) as exc:
            report.add(path, "-", "-", f"malformed review document: {exc}")
            continue
        if not isinstance(payload, list):
            report.add(path, "-", "-", "review document is not an array")
            continue
        if known_poi_ids is not None and poi_id not in known_poi_ids:
            for item in payload:
                rid = item.get("review_id") if isinstance(item, dict) else None
                report.skipped_reviews.append(
                    {"file": str(path), "review_id": rid, "poi_id": poi_id, "reason": "unknown poi_id"}
                )
            continue
        for idx, item in enumerate(payload):
            if not isinstance(item, dict):
                report.add(path, idx, "-", "review entry is not an object")
                continue
            missing = [k for k in ("review_id", "author", "rating", "likes", "text") if k not in item]
            if missing:
                report.add(path, idx, ",".join(missing), "missing review field(s)")
                continue
            rid = str(item["review_id"])
            if rid in seen_ids:
                report.add(path, idx, "review_id", f"duplicate review_id {rid!r}; entry rejected")
                continue
            rating = item["rating"]
            if not isinstance(rating, int) or isinstance(rating, bool) or rating not in (1, 2, 3, 4, 5):
                report.add(path, idx, "rating", f"rating {rating!r} outside 1..5")
                continue
            likes = item["likes"]
            if not isinstance(likes, int) or isinstance(likes, bool) or likes < 0:
                report.add(path, idx, "likes", f"likes {likes!r} is not a non-negative integer")
                continue
            seen_ids.add(rid)
            reviews.append(
                Review(
                    review_id=rid,
                    poi_id=poi_id,
                    author=str(item["author"]),
                    rating=rating,
                    likes=likes,
                    text=unicodedata.normalize("NFC", str(item["text"])),
                )
            )
    return reviews, report


def serialize_reviews(reviews) -> dict[str, list[dict]]:
    """Group reviews back into their per-POI document payloads."""
    docs: dict[str, list[dict]] = {}
    for r in reviews:
        docs.setdefault(r.poi_id, []).append(
            {
                "review_id": r.review_id,
                "author": r.author,
                "rating": r.rating,
                "likes": r.likes,
                "text": r.text,
            }
        )
    return docs


def load_cbg_factors(path) -> tuple[list[CbgRecord], ValidationReport]:
    """Parse the CBG factor table; one record per census block group."""
    path = Path(path)
    report = ValidationReport()
    records: list[CbgRecord] = []
    seen: set[str] = set()
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise SchemaError(f"{path}: empty file, no header row")
        _check_header(reader.fieldnames, ("cbg_id",) + CBG_FACTOR_COLUMNS, path)
        for rownum, row in enumerate(reader, start=2):
            cbg_id = (row["cbg_id"] or "").strip()
            if not cbg_id:
                report.add(path, rownum, "cbg_id", "empty cbg_id")
                continue
            if cbg_id in seen:
                report.add(path, rownum, "cbg_id", f"duplicate cbg_id {cbg_id!r}; row rejected")
                continue
            factors: dict[str, float] = {}
            bad = False
            for col in CBG_FACTOR_COLUMNS:
                try:
                    value = float(row[col])
                except (TypeError, ValueError):
                    report.add(path, rownum, col, f"non-numeric value {row[col]!r}")
                    bad = True
                    break
                if col in _PCT_COLUMNS and not 0.0 <= value <= 100.0:
                    report.add(path, rownum, col, f"percentage {value} outside [0, 100]")
                    bad = True
                    break
                if col in _DENSITY_COLUMNS and value < 0.0:
                    report.add(path, rownum, col, f"density {value} is negative")
                    bad = True
                    break
                if col == "lum" and not 0.0 <= value <= 1.0:
                    report.add(path, rownum, col, f"lum {value} outside [0, 1]")
                    bad = True
                    break
                factors[col] = value
            if bad:
                continue
            seen.add(cbg_id)
            records.append(CbgRecord(cbg_id=cbg_id, factors=factors))
    return records, report


def serialize_cbg_factors(records) -> str:
    lines = [",".join(("cbg_id",) + CBG_FACTOR_COLUMNS)]
    for r in records:
        lines.append(_csv_line([r.cbg_id] + [repr(r.factors[c]) for c in CBG_FACTOR_COLUMNS]))
    return "\n".join(lines) + "\n"


def load_cbg_polygons(path) -> list[CbgPolygon]:
    """Parse a GeoJSON FeatureCollection of CBG polygons (property cbg_id)."""
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    if payload.get("type") != "FeatureCollection":
        raise SchemaError(f"{path}: expected a GeoJSON FeatureCollection")
    polygons: list[CbgPolygon] = []
    for feat in payload.get("features", []):
        props = feat.get("properties") or {}
        cbg_id = props.get("cbg_id")
        if cbg_id is None:
            raise SchemaError(f"{path}: feature is missing the cbg_id property")
        geom = feat.get("geometry") or {}
        gtype = geom.get("type")
        coords = geom.get("coordinates")
        if gtype == "Polygon":
            ring_sets = [coords]
        elif gtype == "MultiPolygon":
            ring_sets = coords
        else:
            raise SchemaError(f"{path}: unsupported geometry type {gtype!r} for cbg {cbg_id}")
        rings = []
        for ring_set in ring_sets:
            for ring in ring_set:
                ring_t = tuple((float(x), float(y)) for x, y in ring)
                _check_ring(ring_t, cbg_id)
                rings.append(ring_t)
        polygons.append(CbgPolygon(cbg_id=str(cbg_id), rings=tuple(rings)))
    return polygons


def _check_ring(ring, cbg_id) -> None:
    if len(ring) < 4:
        raise GeometryError(f"cbg {cbg_id}: ring has {len(ring)} vertices, need >= 4")
    if ring[0] != ring[-1]:
        raise GeometryError(f"cbg {cbg_id}: ring is not closed (first vertex != last)")


def _on_segment(px, py, ax, ay, bx, by, eps=1e-12) -> bool:
    cross = (bx - ax) * (py - ay) - (by - ay) * (px - ax)
    scale = max(1.0, abs(ax), abs(ay), abs(bx), abs(by))
    if abs(cross) > eps * scale:
        return False
    return min(ax, bx) - eps <= px <= max(ax, bx) + eps and min(ay, by) - eps <= py <= max(ay, by) + eps


def point_in_polygon(lon: float, lat: float, polygon: CbgPolygon) -> bool:
    """Even-odd ray casting over all rings; boundary points count as inside."""
    inside = False
    for ring in polygon.rings:
        _check_ring(ring, polygon.cbg_id)
        n = len(ring) - 1  # closing vertex repeats the first
        for i in range(n):
            ax, ay = ring[i]
            bx, by = ring[i + 1]
            if _on_segment(lon, lat, ax, ay, bx, by):
                return True
            if (ay > lat) != (by > lat):
                x_cross = ax + (lat - ay) * (bx - ax) / (by - ay)
                if lon < x_cross:
                    inside = not inside
    return inside


def assign_cbg(poi: PointOfInterest, polygons) -> str | None:
    """First polygon (input order) containing the POI; pre-assigned id wins."""
    if poi.cbg_id:
        return poi.cbg_id
    polygons = list(polygons)
    if not polygons:
        raise ValueError("polygon list is empty")
    for polygon in polygons:
        if point_in_polygon(poi.longitude, poi.latitude, polygon):
            return polygon.cbg_id
    return None
