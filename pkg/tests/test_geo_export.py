import json

import geojson
import numpy as np
import pytest

from cellefa.condense import build_median_week
from cellefa.config import PipelineConfig
from cellefa.efa.model import FactorModel
from cellefa.errors import MissingCoordinates
from cellefa.geo_export import (
    HEATMAP_HEADER,
    GeoJSONError,
    export_heatmaps,
    export_score_map,
    heatmap_table,
    read_heatmap,
    validate_geojson,
)
from cellefa.pipeline import fit
from cellefa.scoring import ScoreTable
from cellefa.synth import congruence


def model_with(pattern):
    k = pattern.shape[1]
    h2 = np.sum(pattern**2, axis=1)
    return FactorModel(pattern, np.eye(k), 1 - h2, h2, np.sum(pattern**2, axis=0))


def point_table(coords, scores):
    n = len(coords)
    return ScoreTable(tuple(f"c{i}" for i in range(n)), np.asarray(scores, dtype=float).reshape(n, -1), np.asarray(coords, dtype=float))


def test_constant_heatmap(tmp_path):
    (path,) = export_heatmaps(model_with(np.full((168, 1), 0.5)), tmp_path)
    assert path.name == "factor_1_heatmap.csv"
    lines = path.read_text().splitlines()
    assert lines[0].split(",") == HEATMAP_HEADER
    assert [line.split(",")[0] for line in lines[1:]] == ["Mon", "Tue", "Wed", "Thu", "Fri", "Sat", "Sun"]
    values = [v for line in lines[1:] for v in line.split(",")[1:]]
    assert len(values) == 168 and set(values) == {"0.5"}


def test_heatmap_round_trip(tmp_path):
    pattern = np.random.default_rng(0).uniform(-1, 1, size=(168, 3)) / 7
    files = export_heatmaps(model_with(pattern), tmp_path)
    assert [f.name for f in files] == [f"factor_{k}_heatmap.csv" for k in (1, 2, 3)]
    for j, f in enumerate(files):
        back = read_heatmap(f)
        assert back.shape == (7, 24)
        assert np.abs(back.reshape(168) - pattern[:, j]).max() <= 1e-12
        assert np.array_equal(back, heatmap_table(model_with(pattern), j))


def test_heatmap_entry_matches_slot():
    pattern = np.arange(168.0)[:, None]
    assert heatmap_table(model_with(pattern), 0)[2, 5] == 2 * 24 + 5


def test_heatmap_needs_168_slots():
    with pytest.raises(ValueError):
        heatmap_table(model_with(np.ones((10, 1)) * 0.1), 0)


def test_business_heatmap_peak(planted):
    ds, truth = planted
    res = fit(build_median_week(ds), PipelineConfig(kpi="unused"))
    j = [p.name for p in truth.profiles].index("business")
    match = next(m for m in congruence(res.model.pattern, truth.templates()) if m.planted == j)
    table = heatmap_table(res.model, match.recovered) * np.sign(match.coefficient)
    d, h = np.unravel_index(np.argmax(table), table.shape)
    assert d < 5 and 8 <= h < 17


def test_single_point_score_map(tmp_path):
    doc = export_score_map(point_table([[41.0, 29.0]], [1.2]), tmp_path / "m.geojson")
    (feat,) = doc["features"]
    assert doc["type"] == "FeatureCollection"
    assert feat["geometry"] == {"type": "Point", "coordinates": [29.0, 41.0]}
    assert feat["properties"] == {"cell_id": "c0", "f1": 1.2, "dominant": 1}
    assert json.loads((tmp_path / "m.geojson").read_text()) == doc


@pytest.mark.parametrize("coords", [[[95.0, 29.0]], [[41.0, 181.0]], [[np.nan, 29.0]]])
def test_invalid_coordinates(tmp_path, coords):
    with pytest.raises(MissingCoordinates) as err:
        export_score_map(point_table(coords, [1.0]), tmp_path / "m.geojson")
    assert "c0" in str(err.value)


def test_structure_and_dominant(tmp_path):
    rng = np.random.default_rng(1)
    n, k = 25, 4
    coords = np.column_stack([rng.uniform(40, 42, n), rng.uniform(28, 30, n)])
    scores = rng.standard_normal((n, k))
    scores[0] = [0.5, 2.0, 2.0, -1.0]  # tie goes to the lower index
    doc = export_score_map(point_table(coords, scores), tmp_path / "m.geojson")
    assert len(doc["features"]) == n
    assert [f["properties"]["cell_id"] for f in doc["features"]] == [f"c{i}" for i in range(n)]
    for i, f in enumerate(doc["features"]):
        props = f["properties"]
        assert sorted(p for p in props if p.startswith("f")) == [f"f{j}" for j in range(1, k + 1)]
        assert props["dominant"] == int(np.argmax(scores[i])) + 1
    assert doc["features"][0]["properties"]["dominant"] == 2
    parsed = geojson.loads((tmp_path / "m.geojson").read_text())
    assert parsed.is_valid


@pytest.mark.parametrize(
    "doc",
    [
        [],
        {"type": "Topology"},
        {"type": "FeatureCollection"},
        {"type": "FeatureCollection", "features": [{"type": "Feature", "geometry": None}]},
        {"type": "Feature", "properties": [], "geometry": None},
        {"type": "Feature", "properties": {}, "geometry": {"type": "Point", "coordinates": [1.0]}},
        {"type": "Feature", "properties": {}, "geometry": {"type": "Point", "coordinates": [200.0, 0.0]}},
        {"type": "Feature", "properties": {}, "geometry": {"type": "Point", "coordinates": [True, 0.0]}},
        {"type": "Feature", "properties": {}, "geometry": {"type": "Point", "coordinates": ["1", 0.0]}},
        {"type": "Feature", "properties": {}, "geometry": {"type": "Circle", "coordinates": [0, 0]}},
        {"type": "Feature", "properties": {}, "geometry": {"type": "LineString", "coordinates": [[0, 0]]}},
        {"type": "Feature", "properties": {}, "geometry": {"type": "Polygon", "coordinates": [[[0, 0], [1, 0], [1, 1], [0, 1]]]}},
        {"type": "Feature", "properties": {}, "geometry": {"type": "GeometryCollection"}},
        {"type": "Feature", "properties": {"x": float("nan")}, "geometry": None},
    ],
)
def test_validator_rejects(doc):
    with pytest.raises((GeoJSONError, ValueError)):
        validate_geojson(doc)


@pytest.mark.parametrize(
    "geometry",
    [
        None,
        {"type": "Point", "coordinates": [29.0, 41.0, 10.0]},
        {"type": "MultiPoint", "coordinates": [[0, 0], [1, 1]]},
        {"type": "LineString", "coordinates": [[0, 0], [1, 1]]},
        {"type": "MultiLineString", "coordinates": [[[0, 0], [1, 1]]]},
        {"type": "Polygon", "coordinates": [[[0, 0], [1, 0], [1, 1], [0, 0]]]},
        {"type": "MultiPolygon", "coordinates": [[[[0, 0], [1, 0], [1, 1], [0, 0]]]]},
        {"type": "GeometryCollection", "geometries": [{"type": "Point", "coordinates": [0, 0]}]},
    ],
)
def test_validator_accepts(geometry):
    doc = {"type": "FeatureCollection", "features": [{"type": "Feature", "geometry": geometry, "properties": None}]}
    validate_geojson(doc)
    assert geojson.loads(json.dumps(doc)).is_valid
