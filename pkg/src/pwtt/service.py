"""Read-only HTTP API over a run's artifacts.

Serves metadata, on-demand window recomputation, damage-overlay tiles,
building predictions, PR curves, population exposure, and an optional
event overlay, all under /v1. Interactive window selection stays cheap
because each stratum keeps per-scene filtered rasters reduced to prefix
sums over time: the statistics of any [start, end) window are differences
of two prefix rows, so a recompute costs a handful of elementwise array
ops rather than a pass over the stack.
"""

from __future__ import annotations

import bisect
import hashlib
import io as _io
import json
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from fastapi import FastAPI, HTTPException, Query, Response
from PIL import Image

from .footprints import classify_buildings, filter_footprints, label_footprints, load_annotations, load_footprints, zonal_mean_T
from .grids import AnalysisWindow, GeoGrid, stack_scenes
from .io import load_manifest, parse_timestamp
from .metrics import Weighting, join_predictions, pr_curve, records_to_scored, select_threshold
from .pipeline import RunConfig
from .population import PopulationRaster, exposure
from .speckle import lee_filter
from .ttest import TMap, composite_T, stratum_key, welch_t

TILE_SIZE = 256

# Precision-banded color ramp (low -> high confidence), RGBA.
_RAMP = [
    (0.00, (255, 255, 178, 170)),
    (0.45, (254, 204, 92, 185)),
    (0.60, (253, 141, 60, 200)),
    (0.75, (240, 59, 32, 215)),
    (0.83, (122, 1, 119, 230)),
]


@dataclass
class _StratumCache:
    """Per-stratum prefix aggregates over time-sorted filtered scenes."""

    times: list  # acquisition datetimes, sorted
    sum1: np.ndarray  # (n+1, H, W) cumulative sums, masked samples contribute 0
    sum2: np.ndarray  # cumulative sums of squares
    count: np.ndarray  # cumulative valid-sample counts

    def window_stats(self, start, end):
        i = bisect.bisect_left(self.times, start)
        j = bisect.bisect_left(self.times, end)
        n = (self.count[j] - self.count[i]).astype(np.float64)
        s1 = self.sum1[j] - self.sum1[i]
        s2 = self.sum2[j] - self.sum2[i]
        with np.errstate(invalid="ignore", divide="ignore"):
            mean = s1 / n
            var = np.maximum((s2 - s1 * s1 / n) / (n - 1.0), 0.0)
            std = np.sqrt(var)
        mean = np.where(n >= 1, mean, np.nan)
        std = np.where(n >= 2, std, np.nan)
        return mean, std, n, j - i


@dataclass
class _Job:
    job_id: str
    window: AnalysisWindow
    status: str = "queued"
    error: str | None = None
    tmap: TMap | None = None
    zonal: list | None = None
    pr_points: list | None = None
    optimal_threshold: float | None = None


class ArtifactService:
    """Loads a run's inputs once and answers window-recompute requests."""

    def __init__(self, artifact_dir):
        self.artifact_dir = Path(artifact_dir)
        manifest = json.loads((self.artifact_dir / "run_manifest.json").read_text())
        self.run_manifest = manifest
        params = manifest["parameters"]
        inputs = manifest["inputs"]

        self.config = RunConfig(
            manifest=inputs["manifest"]["path"],
            footprints=inputs["footprints"]["path"],
            annotations=inputs["annotations"]["path"],
            reference=(parse_timestamp(params["reference"][0]), parse_timestamp(params["reference"][1])),
            inference=(parse_timestamp(params["inference"][0]), parse_timestamp(params["inference"][1])),
            output_dir=str(self.artifact_dir),
            threshold_mode="fixed",
            threshold_value=manifest["threshold"],
            speckle_enabled=params["speckle"]["enabled"],
            speckle_window_radius=params["speckle"]["window_radius"],
            speckle_looks=params["speckle"]["looks"],
            min_samples=params["pwtt"]["min_samples"],
            variance_floor=params["pwtt"]["variance_floor"],
            join_tolerance=params["join_tolerance"],
            min_footprint_area=params["min_footprint_area"],
            weighting=Weighting(params["weighting"]),
        )
        self.run_threshold = float(manifest["threshold"])

        scenes = load_manifest(self.config.manifest)
        speckle = self.config.pwtt_config().speckle
        if speckle is not None:
            scenes = [lee_filter(s, speckle) for s in scenes]
        stack = stack_scenes(scenes)
        self.grid: GeoGrid = stack.grid
        self.date_range = (stack[0].acquired_at, stack[-1].acquired_at)

        self.strata: dict[str, _StratumCache] = {}
        groups: dict[str, list] = {}
        for s in stack:
            groups.setdefault(stratum_key(s.orbit_pass, s.polarization), []).append(s)
        for key, members in sorted(groups.items()):
            shape = (len(members) + 1,) + self.grid.shape
            sum1 = np.zeros(shape, dtype=np.float64)
            sum2 = np.zeros(shape, dtype=np.float64)
            count = np.zeros(shape, dtype=np.int32)
            for i, s in enumerate(members):
                valid = ~s.nodata_mask
                x = np.where(valid, s.values.astype(np.float64), 0.0)
                sum1[i + 1] = sum1[i] + x
                sum2[i + 1] = sum2[i] + x * x
                count[i + 1] = count[i] + valid
            self.strata[key] = _StratumCache(
                times=[s.acquired_at for s in members], sum1=sum1, sum2=sum2, count=count
            )

        footprints, fp_crs = load_footprints(self.config.footprints)
        annotations, ann_crs = load_annotations(self.config.annotations)
        self.footprints = filter_footprints(footprints, self.config.min_footprint_area)
        self.footprints_by_id = {f.id: f for f in self.footprints}
        self.labeled = label_footprints(
            self.footprints, annotations, self.config.join_tolerance,
            footprint_crs=fp_crs, annotation_crs=ann_crs,
        )
        self.labels_by_id = {lf.footprint.id: lf.label for lf in self.labeled}
        self.cities = sorted({f.city for f in self.footprints})

        self.population: PopulationRaster | None = None
        if "population" in inputs:
            from .io import read_raster

            values, mask, pgrid = read_raster(inputs["population"]["path"])
            self.population = PopulationRaster(grid=pgrid, values=np.where(mask, 0.0, values))

        self.events_geojson = None
        if "events" in inputs:
            self.events_geojson = json.loads(Path(inputs["events"]["path"]).read_text())

        self.max_zoom = max(int(np.ceil(np.log2(max(self.grid.width, self.grid.height) / TILE_SIZE))), 0)
        self.jobs: dict[str, _Job] = {}
        self._lock = threading.Lock()
        self._pool = ThreadPoolExecutor(max_workers=2)

    # -- job handling -------------------------------------------------------

    @staticmethod
    def job_id_for(window: AnalysisWindow) -> str:
        text = "|".join(
            t.isoformat() for t in (*window.reference, *window.inference)
        )
        return hashlib.sha1(text.encode()).hexdigest()[:12]

    def submit(self, window: AnalysisWindow) -> _Job:
        job_id = self.job_id_for(window)
        with self._lock:
            if job_id in self.jobs:
                return self.jobs[job_id]
            job = _Job(job_id=job_id, window=window)
            self.jobs[job_id] = job
            self._pool.submit(self._run_job, job)
        return job

    def _run_job(self, job: _Job) -> None:
        job.status = "running"
        try:
            per_stratum = {}
            counts = {}
            for key, cache in self.strata.items():
                ref_mean, ref_std, ref_n, ref_scenes = cache.window_stats(*job.window.reference)
                inf_mean, inf_std, inf_n, inf_scenes = cache.window_stats(*job.window.inference)
                if ref_scenes < self.config.min_samples or inf_scenes < self.config.min_samples:
                    continue
                per_stratum[key] = welch_t(
                    ref_mean, ref_std, ref_n, inf_mean, inf_std, inf_n,
                    min_samples=self.config.min_samples,
                    variance_floor=self.config.variance_floor,
                )
                counts[key] = (ref_scenes, inf_scenes)
            if not per_stratum:
                raise ValueError("insufficient temporal samples in the requested windows")
            composite = composite_T(list(per_stratum.values()))
            job.tmap = TMap(
                grid=self.grid,
                composite=composite,
                per_stratum_t=per_stratum,
                stratum_counts=counts,
                min_samples_used=self.config.min_samples,
            )
            job.zonal = zonal_mean_T(job.tmap, self.footprints)
            records = join_predictions(classify_buildings(job.zonal, 0.0), self.labeled)
            try:
                job.pr_points = pr_curve(records_to_scored(records, self.config.weighting))
                job.optimal_threshold = select_threshold(job.pr_points)
            except ValueError:
                job.pr_points = []
                job.optimal_threshold = None
            job.status = "done"
        except Exception as exc:  # surfaced through the job status
            job.status = "error"
            job.error = str(exc)

    def get_job(self, job_id: str) -> _Job:
        job = self.jobs.get(job_id)
        if job is None:
            raise HTTPException(status_code=404, detail=f"unknown job {job_id}")
        return job

    def done_job(self, job_id: str) -> _Job:
        job = self.get_job(job_id)
        if job.status == "error":
            raise HTTPException(status_code=500, detail=job.error)
        if job.status != "done":
            # still queued/running; 425 keeps 409 reserved for window violations
            raise HTTPException(status_code=425, detail=f"job {job_id} is {job.status}")
        return job

    # -- rendering ----------------------------------------------------------

    def precision_lookup(self, job: _Job):
        """(thresholds asc, precision at each knot) for the color legend."""
        points = [p for p in (job.pr_points or []) if np.isfinite(p.threshold)]
        points.sort(key=lambda p: p.threshold)
        return (
            np.array([p.threshold for p in points]),
            np.array([p.precision for p in points]),
        )

    def render_tile(self, job: _Job, z: int, x: int, y: int, threshold: float) -> bytes:
        scale = 2 ** (self.max_zoom - z) if z <= self.max_zoom else None
        rgba = np.zeros((TILE_SIZE, TILE_SIZE, 4), dtype=np.uint8)
        if scale is not None and x >= 0 and y >= 0:
            comp = job.tmap.composite
            r0, c0 = y * TILE_SIZE * scale, x * TILE_SIZE * scale
            r1, c1 = min(r0 + TILE_SIZE * scale, self.grid.height), min(c0 + TILE_SIZE * scale, self.grid.width)
            if r1 > r0 and c1 > c0:
                block = comp[r0:r1, c0:c1]
                # max-pool so thin damage stays visible when zoomed out
                ph = -np.inf * np.ones((TILE_SIZE * scale, TILE_SIZE * scale))
                ph[: block.shape[0], : block.shape[1]] = np.where(np.isfinite(block), block, -np.inf)
                pooled = ph.reshape(TILE_SIZE, scale, TILE_SIZE, scale).max(axis=(1, 3))
                visible = pooled > threshold
                if visible.any():
                    thresholds, precisions = self.precision_lookup(job)
                    rgba[visible] = self._colorize(pooled[visible], thresholds, precisions)
        img = Image.fromarray(rgba, mode="RGBA")
        buf = _io.BytesIO()
        img.save(buf, format="PNG")
        return buf.getvalue()

    @staticmethod
    def _colorize(values: np.ndarray, thresholds: np.ndarray, precisions: np.ndarray) -> np.ndarray:
        if thresholds.size:
            idx = np.clip(np.searchsorted(thresholds, values, side="right") - 1, 0, thresholds.size - 1)
            prec = precisions[idx]
        else:
            prec = np.full(values.shape, 0.5)
        out = np.zeros((values.size, 4), dtype=np.uint8)
        for cutoff, color in _RAMP:
            out[prec >= cutoff] = color
        return out


def _parse_window(payload: dict) -> AnalysisWindow:
    try:
        ref = [parse_timestamp(t) for t in payload["reference"]]
        inf = [parse_timestamp(t) for t in payload["inference"]]
        if len(ref) != 2 or len(inf) != 2:
            raise ValueError("windows must be [start, end] pairs")
    except (KeyError, TypeError, ValueError) as exc:
        raise HTTPException(status_code=400, detail=f"malformed windows: {exc}") from exc
    try:
        return AnalysisWindow(reference=(ref[0], ref[1]), inference=(inf[0], inf[1]))
    except ValueError as exc:
        raise HTTPException(status_code=409, detail=str(exc)) from exc


def create_app(artifact_dir) -> FastAPI:
    svc = ArtifactService(artifact_dir)
    app = FastAPI(title="damage-assessment API", version="1")
    app.state.service = svc

    @app.get("/v1/meta")
    def meta():
        xmin, ymin, xmax, ymax = svc.grid.bounds
        return {
            "extent": [xmin, ymin, xmax, ymax],
            "crs": svc.grid.crs_id,
            "pixel_size": svc.grid.pixel_size,
            "width": svc.grid.width,
            "height": svc.grid.height,
            "date_range": [svc.date_range[0].isoformat(), svc.date_range[1].isoformat()],
            "strata": sorted(svc.strata),
            "cities": svc.cities,
            "run_threshold": svc.run_threshold,
            "run_windows": {
                "reference": [t.isoformat() for t in svc.config.reference],
                "inference": [t.isoformat() for t in svc.config.inference],
            },
            "tile_size": TILE_SIZE,
            "max_zoom": svc.max_zoom,
            "population_available": svc.population is not None,
            "events_available": svc.events_geojson is not None,
            "n_buildings": len(svc.footprints),
        }

    @app.post("/v1/compute")
    def compute(payload: dict):
        window = _parse_window(payload)
        job = svc.submit(window)
        return {"job_id": job.job_id, "status": job.status}

    @app.get("/v1/jobs/{job_id}")
    def job_status(job_id: str):
        job = svc.get_job(job_id)
        body = {"job_id": job.job_id, "status": job.status}
        if job.status == "error":
            body["error"] = job.error
        if job.status == "done":
            body["max_T"] = job.tmap.max_value()
            body["optimal_threshold"] = job.optimal_threshold
            body["tiles"] = f"/v1/tiles/{{z}}/{{x}}/{{y}}?job={job.job_id}"
            body["stratum_counts"] = {k: list(v) for k, v in sorted(job.tmap.stratum_counts.items())}
        return body

    @app.get("/v1/tiles/{z}/{x}/{y}")
    def tile(z: int, x: int, y: int, job: str = Query(...), threshold: float | None = None):
        j = svc.done_job(job)
        thr = svc.run_threshold if threshold is None else threshold
        png = svc.render_tile(j, z, x, y, thr)
        return Response(content=png, media_type="image/png")

    @app.get("/v1/buildings")
    def buildings(job: str = Query(...), threshold: float | None = None, bbox: str | None = None):
        j = svc.done_job(job)
        thr = svc.run_threshold if threshold is None else threshold
        window_box = _parse_bbox(bbox)
        from shapely.geometry import mapping

        features = []
        for fid, mean_t in j.zonal:
            f = svc.footprints_by_id[fid]
            if window_box and not f.polygon.intersects(window_box):
                continue
            features.append(
                {
                    "type": "Feature",
                    "geometry": mapping(f.polygon),
                    "properties": {
                        "id": fid,
                        "mean_T": mean_t,
                        "predicted": "damaged" if mean_t > thr else "undamaged",
                        "label": svc.labels_by_id[fid].value,
                        "area": f.area,
                    },
                }
            )
        return {"type": "FeatureCollection", "features": features}

    @app.get("/v1/pr_curve")
    def pr_curve_endpoint(job: str = Query(...)):
        j = svc.done_job(job)
        return {
            # the all-positive knot has threshold -inf; JSON carries it as null
            "points": [
                {
                    "threshold": p.threshold if np.isfinite(p.threshold) else None,
                    "precision": p.precision,
                    "recall": p.recall,
                }
                for p in j.pr_points
            ],
            "optimal_threshold": j.optimal_threshold
            if j.optimal_threshold is not None and np.isfinite(j.optimal_threshold)
            else None,
            "weighting": svc.config.weighting.value,
        }

    @app.get("/v1/exposure")
    def exposure_endpoint(job: str = Query(...), threshold: float | None = None):
        if svc.population is None:
            raise HTTPException(status_code=404, detail="no population raster in this run")
        j = svc.done_job(job)
        thr = svc.run_threshold if threshold is None else threshold
        people = exposure(svc.population, j.tmap, thr)
        return {"people": people, "threshold": thr, "total_population": svc.population.total}

    @app.get("/v1/events")
    def events(bbox: str | None = None):
        if svc.events_geojson is None:
            return {"type": "FeatureCollection", "features": []}
        window_box = _parse_bbox(bbox)
        if window_box is None:
            return svc.events_geojson
        from shapely.geometry import shape as _shape

        features = [
            f for f in svc.events_geojson.get("features", [])
            if _shape(f["geometry"]).intersects(window_box)
        ]
        return {"type": "FeatureCollection", "features": features}

    return app


def _parse_bbox(bbox: str | None):
    if bbox is None:
        return None
    try:
        xmin, ymin, xmax, ymax = (float(v) for v in bbox.split(","))
    except ValueError as exc:
        raise HTTPException(status_code=400, detail=f"malformed bbox {bbox!r}") from exc
    import shapely

    return shapely.box(xmin, ymin, xmax, ymax)
