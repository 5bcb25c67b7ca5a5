"""The full artifact pipeline and the dashboard API, in one sitting.

Materializes a synthetic dataset on disk, runs the pipeline CLI-style, then
drives the HTTP API in-process: submit a recompute job for a different
inference window, pull its PR curve, a rendered tile, and the population
exposure. To explore interactively afterwards:

    pwtt serve --artifacts demo_dataset/artifacts
"""

import json
import time
from pathlib import Path

from fastapi.testclient import TestClient

from pwtt.pipeline import RunConfig, run_pipeline, simulate_to_dir
from pwtt.service import create_app

root = Path("demo_dataset")

# -- 1. dataset + pipeline ----------------------------------------------------

simulate_to_dir({"size": 128, "seed": 23}, root)
config = RunConfig.from_json(root / "run_config.json")
artifacts = run_pipeline(config)
manifest = json.loads((artifacts / "run_manifest.json").read_text())
print(f"pipeline artifacts in {artifacts}")
print(f"threshold used: {manifest['threshold']:.3f}")
print(f"files: {', '.join(sorted(manifest['outputs']))}\n")

# -- 2. the API ---------------------------------------------------------------

client = TestClient(create_app(artifacts))
meta = client.get("/v1/meta").json()
print(f"API meta: {meta['width']}x{meta['height']} px, strata {meta['strata']}")

# shift the inference window a month later and recompute on the fly
windows = meta["run_windows"]
late = {
    "reference": windows["reference"],
    "inference": ["2023-04-15T00:00:00", "2023-06-14T00:00:00"],
}
job_id = client.post("/v1/compute", json=late).json()["job_id"]
while True:
    status = client.get(f"/v1/jobs/{job_id}").json()
    if status["status"] in ("done", "error"):
        break
    time.sleep(0.05)
print(f"recompute job {job_id}: {status['status']}, max T {status['max_T']:.1f}")

pr = client.get(f"/v1/pr_curve?job={job_id}").json()
print(f"PR curve knots: {len(pr['points'])}, optimal threshold {pr['optimal_threshold']:.3f}")

tile = client.get(f"/v1/tiles/0/0/0?job={job_id}&threshold={pr['optimal_threshold']}")
Path("tile_demo.png").write_bytes(tile.content)
print(f"wrote tile_demo.png ({len(tile.content)} bytes)")

people = client.get(f"/v1/exposure?job={job_id}").json()["people"]
print(f"population exposure at the run threshold: {people:.0f} people")
