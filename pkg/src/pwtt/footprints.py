"""Building footprints: annotation joins, zonal T aggregation, classification.

Footprints and damage annotations arrive as GeoJSON in a projected CRS.
A footprint is labeled damaged when any annotation point lies within the
join tolerance of its polygon; the per-building score is the mean composite
T over the pixel centers inside the polygon, falling back to the pixel
under the centroid for sub-pixel buildings.
"""

from __future__ import annotations

import csv
import enum
import json
import logging
from dataclasses import dataclass
from datetime import date
from pathlib import Path

import numpy as np
import shapely
from shapely.geometry import Point, Polygon, shape, mapping
from shapely.strtree import STRtree

from .ttest import TMap

log = logging.getLogger(__name__)

MIN_FOOTPRINT_AREA = 50.0  # m^2; anything smaller is treated as clutter
JOIN_TOLERANCE = 10.0  # m


class DamageLabel(str, enum.Enum):
    DAMAGED = "damaged"
    UNDAMAGED = "undamaged"


class CrsMismatchError(ValueError):
    """Vector inputs are not in the same CRS."""


@dataclass(frozen=True)
class Footprint:
    id: str
    polygon: Polygon
    area: float
    city: str = ""
    country: str = ""

    def __post_init__(self):
        if not isinstance(self.polygon, Polygon) or self.polygon.is_empty:
            raise ValueError(f"footprint {self.id}: geometry must be a non-empty polygon")
        if not self.polygon.is_valid:
            raise ValueError(f"footprint {self.id}: invalid polygon")
        if len(self.polygon.exterior.coords) < 4:
            raise ValueError(f"footprint {self.id}: polygon needs at least 3 vertices")
        if not self.area > 0:
            raise ValueError(f"footprint {self.id}: area must be positive")
        if abs(self.area - self.polygon.area) > 0.005 * self.polygon.area:
            raise ValueError(
                f"footprint {self.id}: declared area {self.area:.1f} deviates from "
                f"polygon area {self.polygon.area:.1f} by more than 0.5%"
            )


def footprint_from_polygon(fid: str, polygon: Polygon, city: str = "", country: str = "") -> Footprint:
    return Footprint(id=fid, polygon=polygon, area=polygon.area, city=city, country=country)


@dataclass(frozen=True)
class DamageAnnotation:
    point: Point
    annotation_date: date | None = None
    source: str = ""


@dataclass(frozen=True)
class LabeledFootprint:
    footprint: Footprint
    label: DamageLabel


@dataclass(frozen=True)
class BuildingPrediction:
    footprint_id: str
    mean_T: float
    predicted: DamageLabel
    threshold: float


def filter_footprints(footprints, min_area: float = MIN_FOOTPRINT_AREA) -> list[Footprint]:
    """Drop footprints with area strictly below ``min_area``, keeping order."""
    footprints = list(footprints)
    kept = [f for f in footprints if f.area >= min_area]
    dropped = len(footprints) - len(kept)
    if dropped:
        log.warning("filter_footprints: dropped %d footprints below %.0f m^2", dropped, min_area)
    return kept


def label_footprints(
    footprints,
    annotations,
    tolerance: float = JOIN_TOLERANCE,
    footprint_crs: str | None = None,
    annotation_crs: str | None = None,
) -> list[LabeledFootprint]:
    """Label each footprint damaged iff an annotation lies within ``tolerance``
    meters of its polygon (distance 0 when the point is inside)."""
    if footprint_crs is not None and annotation_crs is not None and footprint_crs != annotation_crs:
        raise CrsMismatchError(f"footprints in {footprint_crs} but annotations in {annotation_crs}")
    points = [a.point for a in annotations]
    tree = STRtree(points) if points else None
    out = []
    for f in footprints:
        damaged = False
        if tree is not None:
            minx, miny, maxx, maxy = f.polygon.bounds
            probe = shapely.box(minx - tolerance, miny - tolerance, maxx + tolerance, maxy + tolerance)
            for idx in tree.query(probe):
                if f.polygon.distance(points[idx]) <= tolerance:
                    damaged = True
                    break
        out.append(LabeledFootprint(f, DamageLabel.DAMAGED if damaged else DamageLabel.UNDAMAGED))
    return out


def zonal_mean_T(tmap: TMap, footprints) -> list[tuple[str, float]]:
    """Mean composite T per footprint, sorted by footprint id.

    Pixel membership is center-in-polygon; a footprint containing no pixel
    center takes the value of the pixel under its centroid. Footprints with
    no valid (non-nodata) pixel at all are omitted and counted in a warning.
    """
    grid = tmap.grid
    xs, ys = grid.pixel_centers()
    composite = tmap.composite
    results: list[tuple[str, float]] = []
    excluded = 0
    for f in sorted(footprints, key=lambda f: f.id):
        minx, miny, maxx, maxy = f.polygon.bounds
        c0 = max(int(np.ceil((minx - grid.origin_x) / grid.pixel_size - 0.5)), 0)
        c1 = min(int(np.floor((maxx - grid.origin_x) / grid.pixel_size - 0.5)), grid.width - 1)
        r0 = max(int(np.ceil((grid.origin_y - maxy) / grid.pixel_size - 0.5)), 0)
        r1 = min(int(np.floor((grid.origin_y - miny) / grid.pixel_size - 0.5)), grid.height - 1)
        value = np.nan
        if c1 >= c0 and r1 >= r0:
            cx, cy = np.meshgrid(xs[c0 : c1 + 1], ys[r0 : r1 + 1])
            inside = shapely.contains_xy(f.polygon, cx.ravel(), cy.ravel())
            if inside.any():
                vals = composite[r0 : r1 + 1, c0 : c1 + 1].ravel()[inside]
                vals = vals[np.isfinite(vals)]
                if vals.size:
                    value = float(vals.mean())
                # else: covered pixels are all nodata -> excluded
            else:
                value = _centroid_value(composite, grid, f)
        else:
            value = _centroid_value(composite, grid, f)
        if np.isfinite(value):
            results.append((f.id, float(value)))
        else:
            excluded += 1
    if excluded:
        log.warning("zonal_mean_T: %d footprints had no valid pixels and were excluded", excluded)
    return results


def _centroid_value(composite: np.ndarray, grid, f: Footprint) -> float:
    row, col = grid.index_of(f.polygon.centroid.x, f.polygon.centroid.y)
    if not grid.contains_index(row, col):
        return float("nan")
    return float(composite[row, col])


def classify_buildings(zonal, threshold: float) -> list[BuildingPrediction]:
    """Binary classification: damaged iff mean_T strictly exceeds the threshold."""
    return [
        BuildingPrediction(
            footprint_id=fid,
            mean_T=mean_t,
            predicted=DamageLabel.DAMAGED if mean_t > threshold else DamageLabel.UNDAMAGED,
            threshold=threshold,
        )
        for fid, mean_t in zonal
    ]


# ---------------------------------------------------------------------------
# GeoJSON / CSV


def load_footprints(path) -> tuple[list[Footprint], str | None]:
    """Read a FeatureCollection of polygons with {id, city, country} properties.

    Returns the footprints and the collection-level CRS identifier, if any.
    """
    doc = json.loads(Path(path).read_text())
    crs = _collection_crs(doc)
    footprints = []
    for i, feature in enumerate(doc.get("features", [])):
        geom = shape(feature["geometry"])
        props = feature.get("properties") or {}
        fid = str(props.get("id", i))
        footprints.append(
            Footprint(
                id=fid,
                polygon=geom,
                area=float(props.get("area", geom.area)),
                city=props.get("city", ""),
                country=props.get("country", ""),
            )
        )
    return footprints, crs


def load_annotations(path) -> tuple[list[DamageAnnotation], str | None]:
    doc = json.loads(Path(path).read_text())
    crs = _collection_crs(doc)
    annotations = []
    for feature in doc.get("features", []):
        geom = shape(feature["geometry"])
        props = feature.get("properties") or {}
        when = props.get("annotation_date")
        annotations.append(
            DamageAnnotation(
                point=geom,
                annotation_date=date.fromisoformat(when) if when else None,
                source=props.get("source", ""),
            )
        )
    return annotations, crs


def _collection_crs(doc) -> str | None:
    crs = doc.get("crs")
    if isinstance(crs, dict):
        return crs.get("properties", {}).get("name")
    return None


def _crs_member(crs_id: str | None) -> dict:
    return {"type": "name", "properties": {"name": crs_id}} if crs_id else None


def save_footprints(path, footprints, crs_id: str | None = None) -> None:
    features = [
        {
            "type": "Feature",
            "geometry": mapping(f.polygon),
            "properties": {"id": f.id, "area": f.area, "city": f.city, "country": f.country},
        }
        for f in footprints
    ]
    _write_collection(path, features, crs_id)


def save_annotations(path, annotations, crs_id: str | None = None) -> None:
    features = [
        {
            "type": "Feature",
            "geometry": mapping(a.point),
            "properties": {
                "annotation_date": a.annotation_date.isoformat() if a.annotation_date else None,
                "source": a.source,
            },
        }
        for a in annotations
    ]
    _write_collection(path, features, crs_id)


def save_predictions(path, predictions, footprints_by_id, labels_by_id=None, crs_id: str | None = None) -> None:
    """Predictions as GeoJSON with mean_T / predicted (and label when known)."""
    features = []
    for p in sorted(predictions, key=lambda p: p.footprint_id):
        f = footprints_by_id[p.footprint_id]
        props = {
            "id": p.footprint_id,
            "mean_T": p.mean_T,
            "predicted": p.predicted.value,
            "threshold": p.threshold,
            "area": f.area,
            "city": f.city,
        }
        if labels_by_id is not None and p.footprint_id in labels_by_id:
            props["label"] = labels_by_id[p.footprint_id].value
        features.append({"type": "Feature", "geometry": mapping(f.polygon), "properties": props})
    _write_collection(path, features, crs_id)


def save_predictions_csv(path, predictions, labels_by_id=None) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id", "mean_T", "predicted", "threshold", "label"])
        for p in sorted(predictions, key=lambda p: p.footprint_id):
            label = labels_by_id.get(p.footprint_id) if labels_by_id else None
            writer.writerow(
                [p.footprint_id, repr(p.mean_T), p.predicted.value, repr(p.threshold), label.value if label else ""]
            )


def _write_collection(path, features, crs_id) -> None:
    doc = {"type": "FeatureCollection", "features": features}
    crs = _crs_member(crs_id)
    if crs:
        doc["crs"] = crs
    Path(path).write_text(json.dumps(doc, sort_keys=True) + "\n")
