"""Static exports: per-factor 7x24 heatmap tables and GeoJSON score maps."""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from .condense import DAY_LABELS, DAYS, HOURS, SLOTS
from .efa.model import FactorModel
from .errors import MissingCoordinates
from .scoring import ScoreTable

HEATMAP_HEADER = ["day", *(f"h{h}" for h in range(HOURS))]


def heatmap_table(model: FactorModel, factor: int) -> np.ndarray:
    """Pattern column ``factor`` reshaped to (day, hour)."""
    if model.n_vars != SLOTS:
        raise ValueError(f"heatmaps need {SLOTS} variables, model has {model.n_vars}")
    return model.pattern[:, factor].reshape(DAYS, HOURS)


def export_heatmaps(model: FactorModel, out_dir) -> list[Path]:
    """Write ``factor_<k>_heatmap.csv`` (1-based k) for every factor."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for j in range(model.k):
        path = out / f"factor_{j + 1}_heatmap.csv"
        table = heatmap_table(model, j)
        with path.open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(HEATMAP_HEADER)
            for label, row in zip(DAY_LABELS, table.tolist()):
                w.writerow([label, *map(repr, row)])
        written.append(path)
    return written


def read_heatmap(path) -> np.ndarray:
    with Path(path).open(newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if rows[0] != HEATMAP_HEADER or [r[0] for r in rows[1:]] != list(DAY_LABELS):
        raise ValueError(f"{path}: not a heatmap table")
    return np.array([[float(v) for v in r[1:]] for r in rows[1:]])


def _valid_point(lat: float, lon: float) -> bool:
    return math.isfinite(lat) and math.isfinite(lon) and -90 <= lat <= 90 and -180 <= lon <= 180


def score_map_document(table: ScoreTable) -> dict:
    """GeoJSON FeatureCollection with one Point per cell.

    Each feature carries ``cell_id``, one property per factor label and
    ``dominant``, the 1-based index of the highest-scoring factor (lowest
    index on ties).
    """
    bad = [
        cid for cid, (lat, lon) in zip(table.cell_ids, table.coordinates.tolist())
        if not _valid_point(lat, lon)
    ]
    if bad:
        raise MissingCoordinates(bad)
    features = []
    for cid, (lat, lon), row in zip(table.cell_ids, table.coordinates.tolist(), table.scores.tolist()):
        props = {"cell_id": cid}
        props.update(zip(table.labels, row))
        props["dominant"] = int(np.argmax(row)) + 1 if row else None
        features.append(
            {
                "type": "Feature",
                "geometry": {"type": "Point", "coordinates": [lon, lat]},
                "properties": props,
            }
        )
    return {"type": "FeatureCollection", "features": features}


def export_score_map(table: ScoreTable, out_path) -> dict:
    """Write the score map GeoJSON and return the document."""
    doc = score_map_document(table)
    validate_geojson(doc)
    Path(out_path).write_text(json.dumps(doc, indent=1, allow_nan=False) + "\n", encoding="utf-8")
    return doc


class GeoJSONError(ValueError):
    pass


_GEOMETRIES = {"Point", "MultiPoint", "LineString", "MultiLineString", "Polygon", "MultiPolygon", "GeometryCollection"}


def _check_position(pos, where: str) -> None:
    if not isinstance(pos, list) or not 2 <= len(pos) <= 3:
        raise GeoJSONError(f"{where}: position must be an array of 2 or 3 numbers")
    for v in pos:
        if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
            raise GeoJSONError(f"{where}: position entries must be finite numbers")
    lon, lat = pos[0], pos[1]
    if not (-180 <= lon <= 180 and -90 <= lat <= 90):
        raise GeoJSONError(f"{where}: position {pos} outside lon/lat ranges")


def _check_ring(ring, where: str) -> None:
    if not isinstance(ring, list) or len(ring) < 4:
        raise GeoJSONError(f"{where}: linear ring needs at least 4 positions")
    for i, p in enumerate(ring):
        _check_position(p, f"{where}[{i}]")
    if ring[0] != ring[-1]:
        raise GeoJSONError(f"{where}: linear ring is not closed")


def _check_geometry(geom, where: str) -> None:
    if geom is None:
        return
    if not isinstance(geom, dict) or geom.get("type") not in _GEOMETRIES:
        raise GeoJSONError(f"{where}: invalid geometry type")
    kind = geom["type"]
    if kind == "GeometryCollection":
        if not isinstance(geom.get("geometries"), list):
            raise GeoJSONError(f"{where}: GeometryCollection needs 'geometries'")
        for i, g in enumerate(geom["geometries"]):
            if g is None:
                raise GeoJSONError(f"{where}.geometries[{i}]: null geometry")
            _check_geometry(g, f"{where}.geometries[{i}]")
        return
    coords = geom.get("coordinates")
    if kind == "Point":
        _check_position(coords, where)
    elif kind in ("MultiPoint", "LineString"):
        if not isinstance(coords, list) or (kind == "LineString" and len(coords) < 2):
            raise GeoJSONError(f"{where}: bad {kind} coordinates")
        for i, p in enumerate(coords):
            _check_position(p, f"{where}[{i}]")
    elif kind == "MultiLineString":
        if not isinstance(coords, list):
            raise GeoJSONError(f"{where}: bad MultiLineString coordinates")
        for i, line in enumerate(coords):
            _check_geometry({"type": "LineString", "coordinates": line}, f"{where}[{i}]")
    elif kind == "Polygon":
        if not isinstance(coords, list):
            raise GeoJSONError(f"{where}: bad Polygon coordinates")
        for i, ring in enumerate(coords):
            _check_ring(ring, f"{where}[{i}]")
    elif kind == "MultiPolygon":
        if not isinstance(coords, list):
            raise GeoJSONError(f"{where}: bad MultiPolygon coordinates")
        for i, poly in enumerate(coords):
            _check_geometry({"type": "Polygon", "coordinates": poly}, f"{where}[{i}]")


def validate_geojson(doc) -> None:
    """Strict structural check of a GeoJSON FeatureCollection or Feature.

    Enforces member types, geometry grammar, finite [lon, lat] positions in
    range, closed polygon rings and JSON-object properties.  Raises
    :class:`GeoJSONError` on the first violation.
    """
    if not isinstance(doc, dict):
        raise GeoJSONError("document must be a JSON object")
    kind = doc.get("type")
    if kind == "FeatureCollection":
        feats = doc.get("features")
        if not isinstance(feats, list):
            raise GeoJSONError("FeatureCollection needs a 'features' array")
        for i, f in enumerate(feats):
            _check_feature(f, f"features[{i}]")
    elif kind == "Feature":
        _check_feature(doc, "feature")
    else:
        raise GeoJSONError(f"unsupported top-level type {kind!r}")
    # must survive a strict JSON round trip (no NaN / Infinity)
    json.dumps(doc, allow_nan=False)


def _check_feature(f, where: str) -> None:
    if not isinstance(f, dict) or f.get("type") != "Feature":
        raise GeoJSONError(f"{where}: not a Feature")
    if "geometry" not in f or "properties" not in f:
        raise GeoJSONError(f"{where}: Feature needs 'geometry' and 'properties'")
    if f["properties"] is not None and not isinstance(f["properties"], dict):
        raise GeoJSONError(f"{where}: properties must be an object or null")
    _check_geometry(f["geometry"], f"{where}.geometry")
