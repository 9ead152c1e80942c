"""Input parsing, validation reporting, and point-in-polygon geometry."""

import json

import pytest

from urbansent.ingest import (
    CBG_FACTOR_COLUMNS,
    CbgPolygon,
    GeometryError,
    PointOfInterest,
    SchemaError,
    assign_cbg,
    load_cbg_factors,
    load_cbg_polygons,
    load_poi_catalog,
    load_reviews,
    point_in_polygon,
    serialize_cbg_factors,
    serialize_poi_catalog,
    serialize_reviews,
)

POI_HEADER = "poi_id,name,latitude,longitude,naics_code,cbg_id\n"


def write_poi_csv(tmp_path, rows):
    path = tmp_path / "pois.csv"
    path.write_text(POI_HEADER + "".join(r + "\n" for r in rows), encoding="utf-8")
    return path


# ---------------------------------------------------------------------------
# POI catalog


def test_poi_catalog_happy_path(tmp_path):
    path = write_poi_csv(tmp_path, ['p1,"Cafe, The",33.75,-84.39,722511,C1', "p2,Park,33.8,-84.4,712190,"])
    pois, report = load_poi_catalog(path)
    assert not report.issues
    assert pois[0] == PointOfInterest("p1", "Cafe, The", 33.75, -84.39, "722511", "C1")
    assert pois[1].cbg_id is None


@pytest.mark.parametrize(
    "row,column",
    [
        ("p1,X,91.0,-84.0,722511,", "latitude"),
        ("p1,X,33.0,-191.0,722511,", "longitude"),
        ("p1,X,abc,-84.0,722511,", "latitude/longitude"),
        ("p1,X,33.0,-84.0,7,", "naics_code"),
        ("p1,X,33.0,-84.0,7225113,", "naics_code"),
        ("p1,X,33.0,-84.0,72a511,", "naics_code"),
        (",X,33.0,-84.0,722511,", "poi_id"),
    ],
)
def test_poi_catalog_row_errors(tmp_path, row, column):
    path = write_poi_csv(tmp_path, [row])
    pois, report = load_poi_catalog(path)
    assert pois == []
    assert len(report.issues) == 1
    assert report.issues[0].column == column
    assert report.issues[0].row == 2


def test_poi_catalog_duplicate_id_keeps_first(tmp_path):
    path = write_poi_csv(tmp_path, ["p1,A,33.0,-84.0,722511,", "p1,B,34.0,-85.0,712190,"])
    pois, report = load_poi_catalog(path)
    assert len(pois) == 1
    assert pois[0].name == "A"
    assert "duplicate" in report.issues[0].message


def test_poi_catalog_missing_column_is_fatal(tmp_path):
    path = tmp_path / "pois.csv"
    path.write_text("poi_id,name\np1,A\n")
    with pytest.raises(SchemaError):
        load_poi_catalog(path)


def test_poi_catalog_round_trip(tmp_path):
    path = write_poi_csv(tmp_path, ['p1,"Cafe, The",33.75,-84.39,722511,C1'])
    pois, _ = load_poi_catalog(path)
    text = serialize_poi_catalog(pois)
    path2 = tmp_path / "again.csv"
    path2.write_text(text)
    again, report = load_poi_catalog(path2)
    assert again == pois
    assert not report.issues


def test_poi_serialization_preserves_float_precision(tmp_path):
    poi = PointOfInterest("p1", "X", 33.123456789012345, -84.98765432109876, "722511", None)
    path = tmp_path / "p.csv"
    path.write_text(serialize_poi_catalog([poi]))
    again, _ = load_poi_catalog(path)
    assert again[0].latitude == poi.latitude
    assert again[0].longitude == poi.longitude


# ---------------------------------------------------------------------------
# Reviews


def write_reviews(tmp_path, per_poi):
    d = tmp_path / "reviews"
    d.mkdir(exist_ok=True)
    for poi_id, payload in per_poi.items():
        (d / f"{poi_id}.json").write_text(json.dumps(payload), encoding="utf-8")
    return d


def review(rid, **over):
    base = {"review_id": rid, "author": "a", "rating": 4, "likes": 0, "text": "fine"}
    base.update(over)
    return base


def test_load_reviews_happy_path(tmp_path):
    d = write_reviews(tmp_path, {"p1": [review("r1"), review("r2", rating=1)]})
    reviews, report = load_reviews(d)
    assert [r.review_id for r in reviews] == ["r1", "r2"]
    assert reviews[0].poi_id == "p1"
    assert not report.issues


def test_load_reviews_normalizes_nfc(tmp_path):
    decomposed = "café"  # e + combining acute
    d = write_reviews(tmp_path, {"p1": [review("r1", text=decomposed)]})
    reviews, _ = load_reviews(d)
    assert reviews[0].text == "café"


@pytest.mark.parametrize(
    "bad,column",
    [
        (review("r1", rating=0), "rating"),
        (review("r1", rating="5"), "rating"),
        (review("r1", rating=True), "rating"),
        (review("r1", likes=-1), "likes"),
        (review("r1", likes=1.5), "likes"),
    ],
)
def test_load_reviews_row_errors(tmp_path, bad, column):
    d = write_reviews(tmp_path, {"p1": [bad]})
    reviews, report = load_reviews(d)
    assert reviews == []
    assert report.issues[0].column == column
    assert report.issues[0].row == 0  # entry index within the file


def test_load_reviews_missing_fields(tmp_path):
    d = write_reviews(tmp_path, {"p1": [{"review_id": "r1"}]})
    reviews, report = load_reviews(d)
    assert reviews == []
    assert "missing review field" in report.issues[0].message


def test_load_reviews_duplicate_id_across_files(tmp_path):
    d = write_reviews(tmp_path, {"p1": [review("r1")], "p2": [review("r1")]})
    reviews, report = load_reviews(d)
    assert len(reviews) == 1
    assert reviews[0].poi_id == "p1"  # files sorted, first wins
    assert "duplicate review_id" in report.issues[0].message


def test_load_reviews_unknown_poi_goes_to_skip_report(tmp_path):
    d = write_reviews(tmp_path, {"p1": [review("r1")], "ghost": [review("r2")]})
    reviews, report = load_reviews(d, known_poi_ids={"p1"})
    assert [r.review_id for r in reviews] == ["r1"]
    assert report.skipped_reviews == [
        {"file": str(d / "ghost.json"), "review_id": "r2", "poi_id": "ghost", "reason": "unknown poi_id"}
    ]


def test_load_reviews_malformed_file_is_file_level(tmp_path):
    d = write_reviews(tmp_path, {"p1": [review("r1")]})
    (d / "bad.json").write_text("{not json")
    reviews, report = load_reviews(d)
    assert len(reviews) == 1
    assert report.issues[0].row == "-"
    assert "malformed review document" in report.issues[0].message


def test_load_reviews_non_array_document(tmp_path):
    d = write_reviews(tmp_path, {"p1": {"oops": True}})
    reviews, report = load_reviews(d)
    assert reviews == []
    assert "not an array" in report.issues[0].message


def test_load_reviews_non_object_entry(tmp_path):
    d = write_reviews(tmp_path, {"p1": ["just a string"]})
    reviews, report = load_reviews(d)
    assert reviews == []
    assert "not an object" in report.issues[0].message


def test_load_reviews_requires_directory(tmp_path):
    with pytest.raises(SchemaError):
        load_reviews(tmp_path / "missing")


def test_serialize_reviews_groups_by_poi(tmp_path):
    d = write_reviews(tmp_path, {"p1": [review("r1")], "p2": [review("r2")]})
    reviews, _ = load_reviews(d)
    docs = serialize_reviews(reviews)
    assert set(docs) == {"p1", "p2"}
    assert docs["p1"][0]["review_id"] == "r1"


# ---------------------------------------------------------------------------
# CBG factor table


def factor_row(cbg_id="C1", **over):
    values = {c: "10.0" for c in CBG_FACTOR_COLUMNS}
    values["median_income"] = "55000"
    values["lum"] = "0.5"
    values.update(over)
    return ",".join([cbg_id] + [values[c] for c in CBG_FACTOR_COLUMNS])


def write_factors(tmp_path, rows):
    path = tmp_path / "factors.csv"
    header = ",".join(("cbg_id",) + CBG_FACTOR_COLUMNS)
    path.write_text(header + "\n" + "".join(r + "\n" for r in rows), encoding="utf-8")
    return path


def test_cbg_factors_happy_path(tmp_path):
    path = write_factors(tmp_path, [factor_row()])
    records, report = load_cbg_factors(path)
    assert not report.issues
    assert records[0].cbg_id == "C1"
    assert records[0].factors["lum"] == 0.5
    assert records[0].median_income == 55000.0  # attribute passthrough


@pytest.mark.parametrize(
    "over,column",
    [
        ({"pct_college": "101"}, "pct_college"),
        ({"pct_college": "-0.5"}, "pct_college"),
        ({"population_density": "-1"}, "population_density"),
        ({"lum": "1.5"}, "lum"),
        ({"median_income": "lots"}, "median_income"),
    ],
)
def test_cbg_factors_range_errors(tmp_path, over, column):
    path = write_factors(tmp_path, [factor_row(**over)])
    records, report = load_cbg_factors(path)
    assert records == []
    assert report.issues[0].column == column


def test_cbg_factors_duplicate_id(tmp_path):
    path = write_factors(tmp_path, [factor_row(), factor_row()])
    records, report = load_cbg_factors(path)
    assert len(records) == 1
    assert "duplicate" in report.issues[0].message


def test_cbg_factors_missing_column_is_fatal(tmp_path):
    path = tmp_path / "factors.csv"
    path.write_text("cbg_id,lum\nC1,0.5\n")
    with pytest.raises(SchemaError):
        load_cbg_factors(path)


def test_cbg_factors_round_trip(tmp_path):
    path = write_factors(tmp_path, [factor_row()])
    records, _ = load_cbg_factors(path)
    path2 = tmp_path / "again.csv"
    path2.write_text(serialize_cbg_factors(records))
    again, report = load_cbg_factors(path2)
    assert again == records
    assert not report.issues


# ---------------------------------------------------------------------------
# Polygons


def polygon_feature(cbg_id, rings, gtype="Polygon"):
    return {
        "type": "Feature",
        "properties": {"cbg_id": cbg_id},
        "geometry": {"type": gtype, "coordinates": rings},
    }


def feature_collection(*features):
    return {"type": "FeatureCollection", "features": list(features)}


UNIT_SQUARE = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0], [0.0, 0.0]]


def write_geojson(tmp_path, payload):
    path = tmp_path / "polys.geojson"
    path.write_text(json.dumps(payload), encoding="utf-8")
    return path


def test_load_polygons_happy_path(tmp_path):
    path = write_geojson(tmp_path, feature_collection(polygon_feature("C1", [UNIT_SQUARE])))
    polys = load_cbg_polygons(path)
    assert polys[0].cbg_id == "C1"
    assert len(polys[0].rings) == 1


def test_load_polygons_multipolygon(tmp_path):
    shifted = [[x + 2.0, y] for x, y in UNIT_SQUARE]
    path = write_geojson(
        tmp_path, feature_collection(polygon_feature("C1", [[UNIT_SQUARE], [shifted]], gtype="MultiPolygon"))
    )
    polys = load_cbg_polygons(path)
    assert len(polys[0].rings) == 2


def test_load_polygons_rejects_open_ring(tmp_path):
    open_ring = UNIT_SQUARE[:-1]
    path = write_geojson(tmp_path, feature_collection(polygon_feature("C1", [open_ring])))
    with pytest.raises(GeometryError):
        load_cbg_polygons(path)


def test_load_polygons_rejects_tiny_ring(tmp_path):
    triangle_unclosed = [[0.0, 0.0], [1.0, 0.0], [0.0, 0.0]]
    path = write_geojson(tmp_path, feature_collection(polygon_feature("C1", [triangle_unclosed])))
    with pytest.raises(GeometryError):
        load_cbg_polygons(path)


def test_load_polygons_requires_cbg_id(tmp_path):
    feat = polygon_feature("C1", [UNIT_SQUARE])
    del feat["properties"]["cbg_id"]
    path = write_geojson(tmp_path, feature_collection(feat))
    with pytest.raises(SchemaError):
        load_cbg_polygons(path)


def test_load_polygons_rejects_point_geometry(tmp_path):
    payload = feature_collection(
        {"type": "Feature", "properties": {"cbg_id": "C1"}, "geometry": {"type": "Point", "coordinates": [0, 0]}}
    )
    path = write_geojson(tmp_path, payload)
    with pytest.raises(SchemaError):
        load_cbg_polygons(path)


def test_load_polygons_rejects_non_collection(tmp_path):
    path = write_geojson(tmp_path, {"type": "Polygon"})
    with pytest.raises(SchemaError):
        load_cbg_polygons(path)


# ---------------------------------------------------------------------------
# Point in polygon


SQUARE = CbgPolygon("sq", (tuple((float(x), float(y)) for x, y in UNIT_SQUARE),))


def test_point_in_polygon_interior_and_exterior():
    assert point_in_polygon(0.5, 0.5, SQUARE)
    assert not point_in_polygon(1.5, 0.5, SQUARE)
    assert not point_in_polygon(-0.5, 0.5, SQUARE)


def test_point_on_edges_and_vertices_counts_inside():
    assert point_in_polygon(0.5, 0.0, SQUARE)  # bottom edge
    assert point_in_polygon(1.0, 0.5, SQUARE)  # right edge
    assert point_in_polygon(0.0, 0.0, SQUARE)  # corner
    assert point_in_polygon(1.0, 1.0, SQUARE)  # corner


def test_point_in_polygon_hole_even_odd():
    outer = tuple((float(x), float(y)) for x, y in UNIT_SQUARE)
    hole = ((0.25, 0.25), (0.75, 0.25), (0.75, 0.75), (0.25, 0.75), (0.25, 0.25))
    donut = CbgPolygon("d", (outer, hole))
    assert not point_in_polygon(0.5, 0.5, donut)  # inside the hole
    assert point_in_polygon(0.1, 0.1, donut)  # in the ring
    assert point_in_polygon(0.25, 0.5, donut)  # on the hole boundary


def test_point_in_polygon_concave():
    # L-shape: notch cut from the top right
    ring = ((0.0, 0.0), (2.0, 0.0), (2.0, 1.0), (1.0, 1.0), (1.0, 2.0), (0.0, 2.0), (0.0, 0.0))
    ell = CbgPolygon("l", (ring,))
    assert point_in_polygon(0.5, 1.5, ell)
    assert not point_in_polygon(1.5, 1.5, ell)
    assert point_in_polygon(1.5, 0.5, ell)


def test_point_in_polygon_boundary_scales_with_coordinates():
    # the on-segment epsilon is relative, so large coordinates still work
    big = CbgPolygon(
        "big",
        (((1000.0, 1000.0), (2000.0, 1000.0), (2000.0, 2000.0), (1000.0, 2000.0), (1000.0, 1000.0)),),
    )
    assert point_in_polygon(1500.0, 1000.0, big)
    assert point_in_polygon(1500.0, 1500.0, big)
    assert not point_in_polygon(2500.0, 1500.0, big)


# ---------------------------------------------------------------------------
# CBG assignment


def poi(lon, lat, cbg_id=None):
    return PointOfInterest("p", "X", lat, lon, "722511", cbg_id)


def test_assign_cbg_first_match_wins():
    a = CbgPolygon("A", SQUARE.rings)
    b = CbgPolygon("B", SQUARE.rings)  # identical geometry
    assert assign_cbg(poi(0.5, 0.5), [a, b]) == "A"
    assert assign_cbg(poi(0.5, 0.5), [b, a]) == "B"


def test_assign_cbg_preassigned_wins_over_geometry():
    a = CbgPolygon("A", SQUARE.rings)
    assert assign_cbg(poi(0.5, 0.5, cbg_id="PRE"), [a]) == "PRE"


def test_assign_cbg_none_when_outside_all():
    a = CbgPolygon("A", SQUARE.rings)
    assert assign_cbg(poi(5.0, 5.0), [a]) is None


def test_assign_cbg_empty_polygon_list_is_error():
    with pytest.raises(ValueError):
        assign_cbg(poi(0.5, 0.5), [])
