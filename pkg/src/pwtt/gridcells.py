"""Grid-cell damage aggregation, intensity regression, and spillover analysis.

A square grid (default 500 m cells, anchored at multiples of the cell size
in CRS coordinates) is drawn over a city. Per cell we count damaged and
total building centroids and average the composite T, then fit

    log(D) = b0 + b1 * mean_T + b2 * building_count + city effects + noise

by OLS with city dummy variables. The spillover analysis compares the
distance-to-nearest-damaged-building of false positives against true
negatives with the same two-sample statistic the change detector uses.
"""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import shapely
from shapely.strtree import STRtree

from .footprints import DamageLabel
from .metrics import EvaluationRecord
from .ttest import TMap, student_t_sf, welch_t

log = logging.getLogger(__name__)

DEFAULT_CELL_SIZE = 500.0


class SingularFitError(ValueError):
    """Regression design matrix is rank deficient."""


@dataclass(frozen=True)
class GridCell:
    cell_id: str
    row: int
    col: int
    x0: float  # west edge
    y0: float  # south edge
    size: float
    damaged_count: int = 0
    building_count: int = 0
    predicted_damaged_count: int = 0
    mean_T: float = float("nan")
    city_id: str = ""

    @property
    def bounds(self) -> tuple[float, float, float, float]:
        return (self.x0, self.y0, self.x0 + self.size, self.y0 + self.size)

    @property
    def geometry(self):
        return shapely.box(*self.bounds)


def build_grid(extent, cell_size: float = DEFAULT_CELL_SIZE) -> list[GridCell]:
    """Cells covering (xmin, ymin, xmax, ymax), anchored at multiples of
    ``cell_size`` in CRS coordinates. Partial cells at the fringe are kept."""
    xmin, ymin, xmax, ymax = extent
    if not (xmax > xmin and ymax > ymin):
        raise ValueError(f"degenerate extent {extent}")
    if cell_size <= 0:
        raise ValueError(f"cell_size must be positive, got {cell_size}")
    c0 = int(np.floor(xmin / cell_size))
    c1 = max(int(np.ceil(xmax / cell_size)), c0 + 1)
    r0 = int(np.floor(ymin / cell_size))
    r1 = max(int(np.ceil(ymax / cell_size)), r0 + 1)
    cells = []
    for r in range(r0, r1):
        for c in range(c0, c1):
            cells.append(
                GridCell(
                    cell_id=f"r{r}c{c}",
                    row=r,
                    col=c,
                    x0=c * cell_size,
                    y0=r * cell_size,
                    size=cell_size,
                )
            )
    return cells


def aggregate_cells(cells, labeled, tmap: TMap | None = None, predictions=None) -> list[GridCell]:
    """Fill cells with damaged/total centroid counts and the mean composite T.

    Footprints are assigned to the single cell containing their centroid so
    nothing is double counted across cell borders. ``mean_T`` averages the
    finite composite values at pixel centers inside the cell.
    """
    by_rc = {(c.row, c.col): c for c in cells}
    damaged = {}
    totals = {}
    cities = {}
    predicted = {}
    predicted_by_id = {p.footprint_id: p for p in predictions} if predictions else {}

    for lf in labeled:
        centroid = lf.footprint.polygon.centroid
        key = _cell_index(centroid.x, centroid.y, next(iter(by_rc.values())).size)
        if key not in by_rc:
            continue
        totals[key] = totals.get(key, 0) + 1
        cities.setdefault(key, []).append(lf.footprint.city)
        if lf.label == DamageLabel.DAMAGED:
            damaged[key] = damaged.get(key, 0) + 1
        p = predicted_by_id.get(lf.footprint.id)
        if p is not None and p.predicted == DamageLabel.DAMAGED:
            predicted[key] = predicted.get(key, 0) + 1

    mean_t = _cell_mean_T(cells, tmap) if tmap is not None else {}

    out = []
    for c in cells:
        key = (c.row, c.col)
        city_list = cities.get(key, [])
        out.append(
            GridCell(
                cell_id=c.cell_id,
                row=c.row,
                col=c.col,
                x0=c.x0,
                y0=c.y0,
                size=c.size,
                damaged_count=damaged.get(key, 0),
                building_count=totals.get(key, 0),
                predicted_damaged_count=predicted.get(key, 0),
                mean_T=mean_t.get(key, float("nan")),
                city_id=_majority(city_list),
            )
        )
    return out


def _cell_index(x: float, y: float, cell_size: float) -> tuple[int, int]:
    return int(np.floor(y / cell_size)), int(np.floor(x / cell_size))


def _majority(values) -> str:
    if not values:
        return ""
    counts = {}
    for v in values:
        counts[v] = counts.get(v, 0) + 1
    return max(sorted(counts), key=lambda v: counts[v])


def _cell_mean_T(cells, tmap: TMap) -> dict[tuple[int, int], float]:
    grid = tmap.grid
    xs, ys = grid.pixel_centers()
    out = {}
    for c in cells:
        xmin, ymin, xmax, ymax = c.bounds
        cols = np.nonzero((xs >= xmin) & (xs < xmax))[0]
        rows = np.nonzero((ys >= ymin) & (ys < ymax))[0]
        if cols.size == 0 or rows.size == 0:
            continue
        block = tmap.composite[rows[0] : rows[-1] + 1, cols[0] : cols[-1] + 1]
        finite = block[np.isfinite(block)]
        if finite.size:
            out[(c.row, c.col)] = float(finite.mean())
    return out


# ---------------------------------------------------------------------------
# Damage-intensity regression


@dataclass(frozen=True)
class RegressionResult:
    beta0: float
    beta1: float  # mean T
    beta2: float  # building count
    fixed_effects: dict[str, float]
    std_errors: dict[str, float]
    p_values: dict[str, float]
    r_squared: float
    n: int
    n_cells_total: int
    n_cells_with_buildings: int
    baseline_city: str
    log_plus_one: bool

    def as_dict(self) -> dict:
        return {
            "coefficients": {
                "intercept": self.beta0,
                "mean_T": self.beta1,
                "building_count": self.beta2,
                **{f"city[{c}]": v for c, v in sorted(self.fixed_effects.items())},
            },
            "std_errors": dict(sorted(self.std_errors.items())),
            "p_values": dict(sorted(self.p_values.items())),
            "r_squared": self.r_squared,
            "n": self.n,
            "n_cells_total": self.n_cells_total,
            "n_cells_with_buildings": self.n_cells_with_buildings,
            "baseline_city": self.baseline_city,
            "log_plus_one": self.log_plus_one,
        }


def fit_damage_regression(
    cells,
    log_plus_one: bool = False,
    allow_single_city: bool = False,
) -> RegressionResult:
    """OLS of log damaged-building count on mean T, building count, and city
    dummies (first city is the baseline).

    Cells without buildings are excluded; cells with zero damaged buildings
    are excluded too unless ``log_plus_one`` switches the response to
    log(D + 1). Standard errors are homoskedastic, p-values two-sided.
    """
    cells = list(cells)
    with_buildings = [c for c in cells if c.building_count >= 1 and np.isfinite(c.mean_T)]
    if log_plus_one:
        usable = with_buildings
    else:
        usable = [c for c in with_buildings if c.damaged_count >= 1]
    if len(usable) < 4:
        raise ValueError(f"need at least 4 usable cells, got {len(usable)}")

    cities = sorted({c.city_id for c in usable})
    if len(cities) < 2 and not allow_single_city:
        raise ValueError("need >= 2 cities for fixed effects (or allow_single_city=True)")
    dummy_cities = cities[1:]

    n = len(usable)
    names = ["intercept", "mean_T", "building_count"] + [f"city[{c}]" for c in dummy_cities]
    X = np.zeros((n, len(names)))
    X[:, 0] = 1.0
    X[:, 1] = [c.mean_T for c in usable]
    X[:, 2] = [c.building_count for c in usable]
    for j, city in enumerate(dummy_cities):
        X[:, 3 + j] = [1.0 if c.city_id == city else 0.0 for c in usable]
    d = np.array([c.damaged_count for c in usable], dtype=np.float64)
    y = np.log1p(d) if log_plus_one else np.log(d)

    if np.linalg.matrix_rank(X) < X.shape[1]:
        raise SingularFitError("rank-deficient design (constant regressor or collinear dummies)")

    beta, _, _, _ = np.linalg.lstsq(X, y, rcond=None)
    resid = y - X @ beta
    dof = n - X.shape[1]
    if dof <= 0:
        raise ValueError("not enough cells for the number of regressors")
    sigma2 = float(resid @ resid) / dof
    cov = sigma2 * np.linalg.inv(X.T @ X)
    se = np.sqrt(np.diag(cov))
    with np.errstate(divide="ignore", invalid="ignore"):
        tvals = beta / se
    pvals = 2.0 * student_t_sf(np.abs(tvals), dof)
    tss = float(((y - y.mean()) ** 2).sum())
    r_squared = 1.0 - float(resid @ resid) / tss if tss > 0 else float("nan")

    return RegressionResult(
        beta0=float(beta[0]),
        beta1=float(beta[1]),
        beta2=float(beta[2]),
        fixed_effects={city: float(beta[3 + j]) for j, city in enumerate(dummy_cities)},
        std_errors={name: float(s) for name, s in zip(names, se)},
        p_values={name: float(p) for name, p in zip(names, pvals)},
        r_squared=r_squared,
        n=n,
        n_cells_total=len(cells),
        n_cells_with_buildings=len(with_buildings),
        baseline_city=cities[0] if cities else "",
        log_plus_one=log_plus_one,
    )


def _stars(p: float) -> str:
    if p < 0.001:
        return "***"
    if p < 0.01:
        return "**"
    if p < 0.05:
        return "*"
    return ""


def format_regression_table(result: RegressionResult) -> str:
    """Plain-text coefficient table with significance stars
    (* p<0.05, ** p<0.01, *** p<0.001)."""
    rows = [
        ("Intercept", "intercept", result.beta0),
        ("Mean T-Value", "mean_T", result.beta1),
        ("Building Count", "building_count", result.beta2),
    ]
    rows += [(f"City {c}", f"city[{c}]", v) for c, v in sorted(result.fixed_effects.items())]
    lines = [f"{'':<18}{'coef':>12}{'(se)':>12}", "-" * 42]
    for label, name, value in rows:
        stars = _stars(result.p_values[name])
        lines.append(f"{label:<18}{value:>9.3f}{stars:<3}({result.std_errors[name]:.3f})")
    lines.append("-" * 42)
    lines.append(f"{'R-squared':<18}{result.r_squared:>12.3f}")
    lines.append(f"{'N':<18}{result.n:>12d}")
    lines.append(f"{'N (all cells)':<18}{result.n_cells_total:>12d}")
    lines.append("* p<0.05, ** p<0.01, *** p<0.001")
    return "\n".join(lines)


def write_regression_report(path_json, path_txt, result: RegressionResult) -> None:
    Path(path_json).write_text(json.dumps(result.as_dict(), indent=2, sort_keys=True) + "\n")
    Path(path_txt).write_text(format_regression_table(result) + "\n")


# ---------------------------------------------------------------------------
# Spillover distances


@dataclass(frozen=True)
class SpilloverReport:
    fp_distances: np.ndarray
    tn_distances: np.ndarray
    median_fp: float | None
    median_tn: float | None
    t_statistic: float | None
    histogram_edges: np.ndarray
    fp_histogram: np.ndarray
    tn_histogram: np.ndarray

    def as_dict(self) -> dict:
        return {
            "n_fp": int(self.fp_distances.size),
            "n_tn": int(self.tn_distances.size),
            "median_fp": self.median_fp,
            "median_tn": self.median_tn,
            "t_statistic": self.t_statistic,
        }


def spillover_analysis(records, footprints_by_id, bin_width: float = 10.0) -> SpilloverReport:
    """Distances from FP and TN footprints to the nearest damaged footprint.

    Distances are boundary-to-boundary (0 when touching). The two distance
    samples are compared with the same unpooled two-sample statistic used by
    the change detector. Histograms share ``bin_width``-meter bins.
    """
    records = list(records)
    damaged_ids = [r.footprint_id for r in records if r.label == DamageLabel.DAMAGED]
    if not damaged_ids:
        raise ValueError("spillover analysis needs at least one damaged footprint")
    damaged_polys = [footprints_by_id[i].polygon for i in damaged_ids]
    tree = STRtree(damaged_polys)

    def nearest_distance(poly) -> float:
        idx = tree.nearest(poly)
        return float(poly.distance(damaged_polys[idx]))

    fp, tn = [], []
    for r in records:
        if r.label == DamageLabel.DAMAGED:
            continue
        d = nearest_distance(footprints_by_id[r.footprint_id].polygon)
        if r.predicted == DamageLabel.DAMAGED:
            fp.append(d)
        else:
            tn.append(d)
    fp = np.asarray(fp, dtype=np.float64)
    tn = np.asarray(tn, dtype=np.float64)
    if fp.size == 0 and tn.size == 0:
        raise ValueError("no false positives or true negatives to analyze")

    t_stat = None
    if fp.size >= 2 and tn.size >= 2:
        t_stat = float(
            welch_t(fp.mean(), fp.std(ddof=1), fp.size, tn.mean(), tn.std(ddof=1), tn.size)
        )

    top = max(fp.max() if fp.size else 0.0, tn.max() if tn.size else 0.0)
    edges = np.arange(0.0, top + 2 * bin_width, bin_width)
    return SpilloverReport(
        fp_distances=fp,
        tn_distances=tn,
        median_fp=float(np.median(fp)) if fp.size else None,
        median_tn=float(np.median(tn)) if tn.size else None,
        t_statistic=t_stat,
        histogram_edges=edges,
        fp_histogram=np.histogram(fp, bins=edges)[0] if fp.size else np.zeros(len(edges) - 1, dtype=int),
        tn_histogram=np.histogram(tn, bins=edges)[0] if tn.size else np.zeros(len(edges) - 1, dtype=int),
    )


def write_spillover_report(path_json, path_csv, report: SpilloverReport) -> None:
    Path(path_json).write_text(json.dumps(report.as_dict(), indent=2, sort_keys=True) + "\n")
    with open(path_csv, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["bin_start", "bin_end", "fp_count", "tn_count"])
        for i in range(len(report.histogram_edges) - 1):
            writer.writerow(
                [
                    repr(float(report.histogram_edges[i])),
                    repr(float(report.histogram_edges[i + 1])),
                    int(report.fp_histogram[i]),
                    int(report.tn_histogram[i]),
                ]
            )


def write_cells_csv(path, cells) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["cell_id", "row", "col", "x0", "y0", "size", "damaged_count",
                         "building_count", "predicted_damaged_count", "mean_T", "city_id"])
        for c in sorted(cells, key=lambda c: (c.row, c.col)):
            writer.writerow([c.cell_id, c.row, c.col, repr(c.x0), repr(c.y0), repr(c.size),
                             c.damaged_count, c.building_count, c.predicted_damaged_count,
                             repr(c.mean_T), c.city_id])
