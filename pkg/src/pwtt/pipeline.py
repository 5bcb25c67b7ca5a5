"""End-to-end run driver: stack in, full artifact directory out.

One run produces the composite T GeoTIFF with its sample-count sidecar,
building predictions, validation metrics and curves, grid-cell reports,
the damage-intensity regression, the spillover report, optional population
exposure, and a machine-readable run manifest with content hashes. Given
the same config and seed, every artifact is byte-identical across runs.
"""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass
from datetime import datetime
from pathlib import Path

import numpy as np

from . import __version__
from .footprints import (
    classify_buildings,
    filter_footprints,
    label_footprints,
    load_annotations,
    load_footprints,
    save_annotations,
    save_footprints,
    save_predictions,
    save_predictions_csv,
    zonal_mean_T,
    JOIN_TOLERANCE,
    MIN_FOOTPRINT_AREA,
)
from .gridcells import (
    aggregate_cells,
    build_grid,
    fit_damage_regression,
    spillover_analysis,
    write_cells_csv,
    write_regression_report,
    write_spillover_report,
    DEFAULT_CELL_SIZE,
)
from .grids import AnalysisWindow, stack_scenes
from .io import load_manifest, parse_timestamp, read_raster, save_manifest, write_raster
from .metrics import (
    Weighting,
    balanced_sample,
    join_predictions,
    metrics_report,
    pr_curve,
    records_to_scored,
    roc_curve,
    select_threshold,
    write_city_report_csv,
    write_pr_csv,
    write_report_json,
    write_roc_csv,
)
from .population import PopulationRaster, exposure
from .sim import simulate, synthetic_city, synthetic_population
from .speckle import LeeParams
from .ttest import PwttConfig, composite_significance_threshold, run_pwtt, t_critical

log = logging.getLogger(__name__)

THRESHOLD_MODES = ("fixed", "significance", "pr-optimal")


@dataclass
class RunConfig:
    manifest: str
    footprints: str
    annotations: str
    reference: tuple[datetime, datetime]
    inference: tuple[datetime, datetime]
    output_dir: str
    threshold_mode: str = "pr-optimal"
    threshold_value: float | None = None
    alpha: float | None = None
    population: str | None = None
    events: str | None = None
    speckle_enabled: bool = True
    speckle_window_radius: int = 3
    speckle_looks: float = 4.4
    min_samples: int = 2
    variance_floor: float = 1e-6
    join_tolerance: float = JOIN_TOLERANCE
    min_footprint_area: float = MIN_FOOTPRINT_AREA
    cell_size: float = DEFAULT_CELL_SIZE
    weighting: Weighting = Weighting.AREA
    balanced_seed: int = 1
    seed: int = 0
    tile_rows: int | None = None

    def __post_init__(self):
        if self.threshold_mode not in THRESHOLD_MODES:
            raise ValueError(f"threshold mode must be one of {THRESHOLD_MODES}, got {self.threshold_mode!r}")
        if self.threshold_mode == "fixed" and self.threshold_value is None:
            raise ValueError("fixed threshold mode requires threshold_value")
        if self.threshold_mode == "significance" and self.alpha is None:
            raise ValueError("significance threshold mode requires alpha")
        self.weighting = Weighting(self.weighting)

    @classmethod
    def from_json(cls, path, **overrides) -> "RunConfig":
        doc = json.loads(Path(path).read_text())
        doc.update(overrides)
        base = Path(path).parent

        def resolve(key):
            if doc.get(key):
                p = Path(doc[key])
                doc[key] = str(p if p.is_absolute() else base / p)

        for key in ("manifest", "footprints", "annotations", "population", "events", "output_dir"):
            resolve(key)
        threshold = doc.pop("threshold", {"mode": "pr-optimal"})
        speckle = doc.pop("speckle", {})
        pwtt_keys = doc.pop("pwtt", {})
        return cls(
            manifest=doc["manifest"],
            footprints=doc["footprints"],
            annotations=doc["annotations"],
            reference=(parse_timestamp(doc["reference"][0]), parse_timestamp(doc["reference"][1])),
            inference=(parse_timestamp(doc["inference"][0]), parse_timestamp(doc["inference"][1])),
            output_dir=doc["output_dir"],
            threshold_mode=threshold.get("mode", "pr-optimal"),
            threshold_value=threshold.get("value"),
            alpha=threshold.get("alpha"),
            population=doc.get("population"),
            events=doc.get("events"),
            speckle_enabled=speckle.get("enabled", True),
            speckle_window_radius=speckle.get("window_radius", 3),
            speckle_looks=speckle.get("looks", 4.4),
            min_samples=pwtt_keys.get("min_samples", 2),
            variance_floor=pwtt_keys.get("variance_floor", 1e-6),
            join_tolerance=doc.get("join_tolerance", JOIN_TOLERANCE),
            min_footprint_area=doc.get("min_footprint_area", MIN_FOOTPRINT_AREA),
            cell_size=doc.get("cell_size", DEFAULT_CELL_SIZE),
            weighting=Weighting(doc.get("weighting", "area")),
            balanced_seed=doc.get("balanced_seed", 1),
            seed=doc.get("seed", 0),
            tile_rows=doc.get("tile_rows"),
        )

    def pwtt_config(self) -> PwttConfig:
        speckle = (
            LeeParams(window_radius=self.speckle_window_radius, looks=self.speckle_looks)
            if self.speckle_enabled
            else None
        )
        return PwttConfig(
            min_samples=self.min_samples,
            variance_floor=self.variance_floor,
            speckle=speckle,
            tile_rows=self.tile_rows,
        )

    def parameters_dict(self) -> dict:
        return {
            "reference": [t.isoformat() for t in self.reference],
            "inference": [t.isoformat() for t in self.inference],
            "threshold": {"mode": self.threshold_mode, "value": self.threshold_value, "alpha": self.alpha},
            "speckle": {
                "enabled": self.speckle_enabled,
                "window_radius": self.speckle_window_radius,
                "looks": self.speckle_looks,
            },
            "pwtt": {"min_samples": self.min_samples, "variance_floor": self.variance_floor},
            "join_tolerance": self.join_tolerance,
            "min_footprint_area": self.min_footprint_area,
            "cell_size": self.cell_size,
            "weighting": self.weighting.value,
            "balanced_seed": self.balanced_seed,
            "seed": self.seed,
            "tile_rows": self.tile_rows,
        }


def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def run_pipeline(config: RunConfig) -> Path:
    """Execute the full detection/validation pipeline; returns the artifact dir."""
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)

    scenes = load_manifest(config.manifest)
    stack = stack_scenes(scenes)
    window = AnalysisWindow(reference=config.reference, inference=config.inference)
    tmap = run_pwtt(stack, window, config.pwtt_config())

    write_raster(tmap.composite, tmap.grid, out / "tmap.tif", nodata_mask=~np.isfinite(tmap.composite))
    (out / "tmap_counts.json").write_text(
        json.dumps(
            {
                "stratum_scene_counts": {k: list(v) for k, v in sorted(tmap.stratum_counts.items())},
                "min_samples": tmap.min_samples_used,
            },
            indent=2,
            sort_keys=True,
        )
        + "\n"
    )

    footprints, fp_crs = load_footprints(config.footprints)
    annotations, ann_crs = load_annotations(config.annotations)
    footprints = filter_footprints(footprints, config.min_footprint_area)
    labeled = label_footprints(
        footprints, annotations, config.join_tolerance, footprint_crs=fp_crs, annotation_crs=ann_crs
    )
    labels_by_id = {lf.footprint.id: lf.label for lf in labeled}
    footprints_by_id = {f.id: f for f in footprints}

    zonal = zonal_mean_T(tmap, footprints)

    significance_info = None
    if config.threshold_mode == "fixed":
        threshold = float(config.threshold_value)
    elif config.threshold_mode == "significance":
        counts = list(tmap.stratum_counts.values())
        threshold = composite_significance_threshold(counts, config.alpha)
        best = max(counts, key=lambda ab: ab[0] + ab[1])
        significance_info = {
            "alpha": config.alpha,
            "per_stratum_critical": t_critical(best[0] + best[1] - 2, config.alpha),
            "composite_critical": threshold,
            "df_per_stratum": best[0] + best[1] - 2,
            "df_conservative": min(min(ab) for ab in counts) - 1,
        }
    else:
        probe = join_predictions(classify_buildings(zonal, 0.0), labeled)
        threshold = select_threshold(pr_curve(records_to_scored(probe, config.weighting)))

    predictions = classify_buildings(zonal, threshold)
    records = join_predictions(predictions, labeled)
    save_predictions(out / "predictions.geojson", predictions, footprints_by_id, labels_by_id, crs_id=fp_crs)
    save_predictions_csv(out / "predictions.csv", predictions, labels_by_id)

    reports = {}
    for weighting in Weighting:
        scored = records_to_scored(records, weighting)
        reports[f"full_{weighting.value}"] = metrics_report(records, weighting, threshold)
        balanced = balanced_sample(records, config.balanced_seed)
        reports[f"balanced_{weighting.value}"] = metrics_report(balanced, weighting, threshold)
        roc_points, _ = roc_curve(scored)
        write_roc_csv(out / f"roc_{weighting.value}.csv", roc_points)
        write_pr_csv(out / f"pr_{weighting.value}.csv", pr_curve(scored))
    write_report_json(out / "metrics.json", reports)

    cities = sorted({f.city for f in footprints})
    city_rows = []
    for city in cities:
        city_records = [r for r in records if r.city == city]
        if city_records:
            city_rows.append((city, metrics_report(city_records, config.weighting, threshold)))
    city_rows.append(("All", metrics_report(records, config.weighting, threshold)))
    write_city_report_csv(out / "metrics_by_city.csv", city_rows)

    # grid cells over the raster extent
    cells = aggregate_cells(
        build_grid(tmap.grid.bounds, config.cell_size), labeled, tmap, predictions
    )
    write_cells_csv(out / "cells.csv", cells)
    cell_report = _cell_classification_report(cells)
    (out / "cell_metrics.json").write_text(json.dumps(cell_report, indent=2, sort_keys=True) + "\n")

    try:
        regression = fit_damage_regression(cells, allow_single_city=len(cities) < 2)
        write_regression_report(out / "regression.json", out / "regression.txt", regression)
    except ValueError as exc:
        (out / "regression.json").write_text(json.dumps({"error": f"grid_analysis: {exc}"}) + "\n")

    try:
        spill = spillover_analysis(records, footprints_by_id)
        write_spillover_report(out / "spillover.json", out / "spillover_hist.csv", spill)
    except ValueError as exc:
        (out / "spillover.json").write_text(json.dumps({"error": f"grid_analysis: {exc}"}) + "\n")

    if config.population:
        values, mask, pgrid = read_raster(config.population)
        values = np.where(mask, 0.0, values)
        pop = PopulationRaster(grid=pgrid, values=values)
        people = exposure(pop, tmap, threshold)
        (out / "exposure.json").write_text(
            json.dumps({"people": people, "threshold": threshold, "total_population": pop.total},
                       indent=2, sort_keys=True) + "\n"
        )

    inputs = {"manifest": config.manifest, "footprints": config.footprints, "annotations": config.annotations}
    if config.population:
        inputs["population"] = config.population
    if config.events:
        inputs["events"] = config.events
    output_files = sorted(p.name for p in out.iterdir() if p.name != "run_manifest.json")
    manifest = {
        "version": __version__,
        "parameters": config.parameters_dict(),
        "threshold": threshold,
        "significance": significance_info,
        "n_buildings": len(records),
        "inputs": {k: {"path": v, "sha256": _sha256(v)} for k, v in sorted(inputs.items())},
        "outputs": {name: _sha256(out / name) for name in output_files},
    }
    (out / "run_manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return out


def _cell_classification_report(cells) -> dict:
    """Binary cell classification (damaged iff >= 1 damaged building), at the
    cell-level PR-optimal threshold."""
    scored = []
    for c in cells:
        if c.building_count == 0 or not np.isfinite(c.mean_T):
            continue
        scored.append((c.mean_T, c.damaged_count >= 1, 1.0))
    n_pos = sum(1 for _, pos, _ in scored if pos)
    n_neg = len(scored) - n_pos
    if n_pos == 0 or n_neg == 0:
        return {"error": "cell classification needs both damaged and undamaged cells", "n": len(scored)}
    points, auc = roc_curve(scored)
    threshold = select_threshold(pr_curve(scored))
    tp = fp = tn = fn = 0
    for score, pos, _ in scored:
        pred = score > threshold
        tp += pos and pred
        fp += (not pos) and pred
        tn += (not pos) and (not pred)
        fn += pos and (not pred)
    precision = tp / (tp + fp) if tp + fp else None
    recall = tp / (tp + fn) if tp + fn else None
    f1 = (2 * precision * recall / (precision + recall)) if precision and recall else None
    return {
        "auc": auc,
        "f1": f1,
        "precision": precision,
        "recall": recall,
        "threshold": threshold,
        "n": len(scored),
        "n_damaged_cells": n_pos,
    }


# ---------------------------------------------------------------------------
# Scenario simulation -> on-disk dataset


def simulate_to_dir(params: dict, out_dir) -> Path:
    """Materialize a synthetic scenario as an on-disk dataset the pipeline
    can consume exactly like real data: per-scene GeoTIFFs + manifest JSON,
    footprint/annotation GeoJSON, a population raster, ground truth, and a
    ready-to-run pipeline config."""
    out = Path(out_dir)
    (out / "scenes").mkdir(parents=True, exist_ok=True)

    accepted = {
        "size", "pixel_size", "seed", "damaged_fraction", "event_delta_db",
        "speckle_looks", "with_events", "city", "country", "clutter_count",
    }
    unknown = set(params) - accepted - {"war_start"}
    if unknown:
        raise ValueError(f"unknown simulation parameters: {sorted(unknown)}")
    kwargs = {k: v for k, v in params.items() if k in accepted}
    if "war_start" in params:
        kwargs["war_start"] = parse_timestamp(params["war_start"])
    scenario = synthetic_city(**kwargs)
    sim = simulate(scenario.spec, scenario.date_range)

    entries = []
    for i, scene in enumerate(sim.stack):
        name = f"scenes/scene_{i:04d}.tif"
        write_raster(scene.values, scene.grid, out / name, nodata_mask=scene.nodata_mask)
        entries.append(
            {
                "path": name,
                "acquired_at": scene.acquired_at.isoformat(),
                "orbit_pass": scene.orbit_pass.value,
                "polarization": scene.polarization.value,
            }
        )
    save_manifest(entries, out / "manifest.json")

    crs = scenario.spec.grid.crs_id
    save_footprints(out / "footprints.geojson", sim.footprints, crs_id=crs)
    save_annotations(out / "annotations.geojson", sim.annotations, crs_id=crs)
    (out / "truth.json").write_text(json.dumps(dict(sorted(sim.truth.items())), indent=2, sort_keys=True) + "\n")

    pop_values, pop_grid = synthetic_population(
        scenario.spec.grid, scenario.spec.class_map, seed=scenario.spec.seed
    )
    write_raster(pop_values, pop_grid, out / "population.tif")

    window = {
        "reference": [t.isoformat() for t in scenario.window.reference],
        "inference": [t.isoformat() for t in scenario.window.inference],
    }
    (out / "window.json").write_text(json.dumps(window, indent=2, sort_keys=True) + "\n")
    run_config = {
        "manifest": "manifest.json",
        "footprints": "footprints.geojson",
        "annotations": "annotations.geojson",
        "population": "population.tif",
        "reference": window["reference"],
        "inference": window["inference"],
        "threshold": {"mode": "pr-optimal"},
        "output_dir": "artifacts",
    }
    (out / "run_config.json").write_text(json.dumps(run_config, indent=2, sort_keys=True) + "\n")
    return out
