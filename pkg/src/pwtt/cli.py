"""Command-line entry points: simulate, run, evaluate, regress, serve, report."""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="pwtt", description="SAR change-detection damage assessment")
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="materialize a synthetic scenario as an on-disk dataset")
    p_sim.add_argument("--params", help="scenario JSON (see docs); defaults apply when omitted")
    p_sim.add_argument("--out", required=True, help="output dataset directory")
    p_sim.add_argument("--seed", type=int, help="override the scenario seed")

    p_run = sub.add_parser("run", help="run the full detection/validation pipeline")
    p_run.add_argument("--config", required=True, help="run config JSON")
    p_run.add_argument("--output", help="override the configured output directory")

    p_eval = sub.add_parser("evaluate", help="recompute metrics from a predictions GeoJSON")
    p_eval.add_argument("--predictions", required=True)
    p_eval.add_argument("--out", required=True, help="metrics JSON path")
    p_eval.add_argument("--weighting", choices=["area", "count"], default="area")
    p_eval.add_argument("--balanced-seed", type=int, default=None,
                        help="evaluate on a balanced sample drawn with this seed")

    p_reg = sub.add_parser("regress", help="fit the damage-intensity regression from a cells CSV")
    p_reg.add_argument("--cells", required=True)
    p_reg.add_argument("--out-json", required=True)
    p_reg.add_argument("--out-txt", required=True)
    p_reg.add_argument("--log-plus-one", action="store_true")
    p_reg.add_argument("--allow-single-city", action="store_true")

    p_serve = sub.add_parser("serve", help="serve the dashboard API over a run's artifacts")
    p_serve.add_argument("--artifacts", required=True)
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.add_argument("--port", type=int, default=8642)
    p_serve.add_argument("--static", help="directory of dashboard assets to serve at /")

    p_rep = sub.add_parser("report", help="re-emit summary tables (and curve plots when matplotlib is present)")
    p_rep.add_argument("--artifacts", required=True)
    p_rep.add_argument("--out", help="destination directory (defaults to the artifact dir)")

    args = parser.parse_args(argv)
    return _DISPATCH[args.command](args)


def _cmd_simulate(args) -> int:
    from .pipeline import simulate_to_dir

    params = json.loads(Path(args.params).read_text()) if args.params else {}
    if args.seed is not None:
        params["seed"] = args.seed
    out = simulate_to_dir(params, args.out)
    print(f"simulated dataset written to {out}")
    return 0


def _cmd_run(args) -> int:
    from .pipeline import RunConfig, run_pipeline

    overrides = {}
    if args.output:
        overrides["output_dir"] = args.output
    config = RunConfig.from_json(args.config, **overrides)
    out = run_pipeline(config)
    manifest = json.loads((out / "run_manifest.json").read_text())
    print(f"artifacts written to {out} (threshold {manifest['threshold']:.4f})")
    return 0


def _cmd_evaluate(args) -> int:
    from .footprints import BuildingPrediction, DamageLabel
    from .metrics import EvaluationRecord, Weighting, balanced_sample, metrics_report
    from shapely.geometry import shape

    doc = json.loads(Path(args.predictions).read_text())
    records = []
    for feature in doc["features"]:
        props = feature["properties"]
        if "label" not in props:
            print(f"prediction {props.get('id')} has no label; cannot evaluate", file=sys.stderr)
            return 1
        records.append(
            EvaluationRecord(
                footprint_id=str(props["id"]),
                label=DamageLabel(props["label"]),
                predicted=DamageLabel(props["predicted"]),
                mean_T=float(props["mean_T"]),
                area=float(props.get("area", shape(feature["geometry"]).area)),
                city=props.get("city", ""),
            )
        )
    if not records:
        print("no predictions to evaluate", file=sys.stderr)
        return 1
    threshold = float(doc["features"][0]["properties"]["threshold"])
    if args.balanced_seed is not None:
        records = balanced_sample(records, args.balanced_seed)
    report = metrics_report(records, Weighting(args.weighting), threshold)
    Path(args.out).write_text(json.dumps(report.as_dict(), indent=2, sort_keys=True) + "\n")
    print(json.dumps(report.as_dict(), indent=2, sort_keys=True))
    return 0


def _cmd_regress(args) -> int:
    from .gridcells import GridCell, fit_damage_regression, write_regression_report

    cells = []
    with open(args.cells, newline="") as fh:
        for row in csv.DictReader(fh):
            cells.append(
                GridCell(
                    cell_id=row["cell_id"],
                    row=int(row["row"]),
                    col=int(row["col"]),
                    x0=float(row["x0"]),
                    y0=float(row["y0"]),
                    size=float(row["size"]),
                    damaged_count=int(row["damaged_count"]),
                    building_count=int(row["building_count"]),
                    predicted_damaged_count=int(row.get("predicted_damaged_count", 0)),
                    mean_T=float(row["mean_T"]),
                    city_id=row["city_id"],
                )
            )
    result = fit_damage_regression(
        cells, log_plus_one=args.log_plus_one, allow_single_city=args.allow_single_city
    )
    write_regression_report(args.out_json, args.out_txt, result)
    print(Path(args.out_txt).read_text())
    return 0


def _cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    app = create_app(args.artifacts)
    if args.static:
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=args.static, html=True), name="dashboard")
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return 0


def _cmd_report(args) -> int:
    artifacts = Path(args.artifacts)
    out = Path(args.out) if args.out else artifacts
    out.mkdir(parents=True, exist_ok=True)

    for name in ("metrics.json", "regression.txt", "spillover.json", "cell_metrics.json"):
        path = artifacts / name
        if path.exists():
            print(f"--- {name} ---")
            print(path.read_text())

    try:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError:
        print("matplotlib not installed; skipping curve plots")
        return 0

    for weighting in ("count", "area"):
        roc_path = artifacts / f"roc_{weighting}.csv"
        pr_path = artifacts / f"pr_{weighting}.csv"
        if not roc_path.exists():
            continue
        fig, axes = plt.subplots(1, 2, figsize=(9, 4))
        with open(roc_path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        axes[0].plot([float(r["fpr"]) for r in rows], [float(r["tpr"]) for r in rows])
        axes[0].plot([0, 1], [0, 1], "k--", lw=0.6)
        axes[0].set_xlabel("false positive rate")
        axes[0].set_ylabel("true positive rate")
        axes[0].set_title(f"ROC ({weighting})")
        with open(pr_path, newline="") as fh:
            rows = [r for r in csv.DictReader(fh) if r["threshold"] not in ("inf", "-inf")]
        axes[1].plot([float(r["recall"]) for r in rows], [float(r["precision"]) for r in rows])
        axes[1].set_xlabel("recall")
        axes[1].set_ylabel("precision")
        axes[1].set_title(f"PR ({weighting})")
        fig.tight_layout()
        fig.savefig(out / f"curves_{weighting}.png", dpi=120)
        plt.close(fig)
        print(f"wrote {out / f'curves_{weighting}.png'}")
    return 0


_DISPATCH = {
    "simulate": _cmd_simulate,
    "run": _cmd_run,
    "evaluate": _cmd_evaluate,
    "regress": _cmd_regress,
    "serve": _cmd_serve,
    "report": _cmd_report,
}


if __name__ == "__main__":
    raise SystemExit(main())
