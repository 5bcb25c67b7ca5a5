"""Building-level validation metrics.

Confusion cells, precision/recall/F1, ROC and PR curves, threshold
selection, and balanced sampling. All statistics support two weightings:
building area (m^2) or plain counts. Curve accumulation keeps raw weighted
counts and divides only at the end, so with unit weights the trapezoidal
AUC agrees exactly with the Mann-Whitney pairwise statistic.
"""

from __future__ import annotations

import csv
import enum
import json
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .footprints import BuildingPrediction, DamageLabel, LabeledFootprint

log = logging.getLogger(__name__)


class Weighting(str, enum.Enum):
    AREA = "area"
    COUNT = "count"


@dataclass(frozen=True)
class EvaluationRecord:
    footprint_id: str
    label: DamageLabel
    predicted: DamageLabel
    mean_T: float
    area: float
    city: str = ""


def join_predictions(predictions, labeled) -> list[EvaluationRecord]:
    """Pair predictions with ground-truth labels by footprint id."""
    by_id = {lf.footprint.id: lf for lf in labeled}
    records = []
    for p in sorted(predictions, key=lambda p: p.footprint_id):
        lf = by_id.get(p.footprint_id)
        if lf is None:
            raise ValueError(f"prediction for footprint {p.footprint_id} has no ground-truth label")
        records.append(
            EvaluationRecord(
                footprint_id=p.footprint_id,
                label=lf.label,
                predicted=p.predicted,
                mean_T=p.mean_T,
                area=lf.footprint.area,
                city=lf.footprint.city,
            )
        )
    return records


@dataclass(frozen=True)
class WeightedConfusion:
    tp: float
    fp: float
    tn: float
    fn: float

    @property
    def total(self) -> float:
        return self.tp + self.fp + self.tn + self.fn


def _weight(record: EvaluationRecord, weighting: Weighting) -> float:
    return record.area if weighting == Weighting.AREA else 1.0


def confusion(records, weighting: Weighting = Weighting.AREA) -> WeightedConfusion:
    tp = fp = tn = fn = 0.0
    for r in records:
        w = _weight(r, weighting)
        truth = r.label == DamageLabel.DAMAGED
        pred = r.predicted == DamageLabel.DAMAGED
        if truth and pred:
            tp += w
        elif not truth and pred:
            fp += w
        elif not truth and not pred:
            tn += w
        else:
            fn += w
    return WeightedConfusion(tp, fp, tn, fn)


@dataclass(frozen=True)
class PRF:
    """Precision/recall/F1; a cell is None when its denominator is zero."""

    precision: float | None
    recall: float | None
    f1: float | None


def precision_recall_f1(c: WeightedConfusion) -> PRF:
    precision = c.tp / (c.tp + c.fp) if c.tp + c.fp > 0 else None
    recall = c.tp / (c.tp + c.fn) if c.tp + c.fn > 0 else None
    if precision is None or recall is None or precision + recall == 0:
        f1 = None
    else:
        f1 = 2.0 * precision * recall / (precision + recall)
    return PRF(precision, recall, f1)


# ---------------------------------------------------------------------------
# Curves


@dataclass(frozen=True)
class RocPoint:
    """Rates of the classifier {score >= threshold}."""

    threshold: float
    fpr: float
    tpr: float


@dataclass(frozen=True)
class PrPoint:
    """Precision/recall of the classifier {score > threshold}, matching the
    strict inequality used by classify_buildings."""

    threshold: float
    precision: float
    recall: float


def records_to_scored(records, weighting: Weighting = Weighting.AREA):
    """(score, is_positive, weight) triples for curve construction."""
    return [(r.mean_T, r.label == DamageLabel.DAMAGED, _weight(r, weighting)) for r in records]


def _split_scored(scored):
    scored = sorted(scored, key=lambda s: -s[0])
    pos_total = sum(w for _, is_pos, w in scored if is_pos)
    neg_total = sum(w for _, is_pos, w in scored if not is_pos)
    if pos_total == 0 or neg_total == 0:
        raise ValueError("curve construction needs at least one positive and one negative label")
    return scored, pos_total, neg_total


def roc_curve(scored) -> tuple[list[RocPoint], float]:
    """ROC vertices (ties grouped) sorted by non-decreasing FPR, plus the
    trapezoidal AUC. Weighted inputs accumulate weights instead of counts."""
    scored, pos_total, neg_total = _split_scored(scored)
    points = [RocPoint(threshold=float("inf"), fpr=0.0, tpr=0.0)]
    area2 = 0.0  # twice the area, in raw weight units
    tp = fp = 0.0
    i = 0
    while i < len(scored):
        j = i
        while j < len(scored) and scored[j][0] == scored[i][0]:
            j += 1
        prev_tp, prev_fp = tp, fp
        for _, is_pos, w in scored[i:j]:
            if is_pos:
                tp += w
            else:
                fp += w
        area2 += (fp - prev_fp) * (tp + prev_tp)
        points.append(RocPoint(threshold=scored[i][0], fpr=fp / neg_total, tpr=tp / pos_total))
        i = j
    auc = area2 / (2.0 * pos_total * neg_total)
    return points, auc


def pr_curve(scored) -> list[PrPoint]:
    """PR points at every distinct score plus a -inf everything-positive
    point. Thresholds classify strictly-greater scores as positive; the
    zero-positive vertex (threshold at the max score) is dropped because its
    precision is undefined."""
    scored, pos_total, _ = _split_scored(scored)
    points = []
    tp = pp = 0.0  # positives above the current threshold, and their predicted total
    i = 0
    while i < len(scored):
        j = i
        while j < len(scored) and scored[j][0] == scored[i][0]:
            j += 1
        threshold = scored[i][0]
        if pp > 0:
            points.append(PrPoint(threshold=threshold, precision=tp / pp, recall=tp / pos_total))
        for _, is_pos, w in scored[i:j]:
            pp += w
            if is_pos:
                tp += w
        i = j
    points.append(PrPoint(threshold=float("-inf"), precision=tp / pp, recall=1.0))
    return points


def _f1_of(point: PrPoint) -> float:
    if point.precision + point.recall == 0:
        return 0.0
    return 2.0 * point.precision * point.recall / (point.precision + point.recall)


def select_threshold(pr_points) -> float:
    """Threshold maximizing F1 along the PR curve; ties resolve to the higher
    threshold (fewer predicted positives)."""
    if not pr_points:
        raise ValueError("empty PR curve")
    best = max(pr_points, key=lambda p: (_f1_of(p), p.threshold))
    return best.threshold


def balanced_sample(labeled, seed: int):
    """All damaged items plus an equal-count random subset of undamaged ones.

    Deterministic under ``seed``; when undamaged items are scarcer than
    damaged ones, everything is kept and a warning is logged. Items need a
    ``label`` attribute (LabeledFootprint or EvaluationRecord).
    """
    labeled = list(labeled)
    damaged_idx = [i for i, x in enumerate(labeled) if x.label == DamageLabel.DAMAGED]
    undamaged_idx = [i for i, x in enumerate(labeled) if x.label != DamageLabel.DAMAGED]
    if not damaged_idx:
        raise ValueError("balanced_sample needs at least one damaged item")
    if len(undamaged_idx) < len(damaged_idx):
        log.warning(
            "balanced_sample: only %d undamaged for %d damaged; keeping all",
            len(undamaged_idx), len(damaged_idx),
        )
        return labeled
    rng = np.random.default_rng(seed)
    chosen = rng.choice(len(undamaged_idx), size=len(damaged_idx), replace=False)
    keep = set(damaged_idx) | {undamaged_idx[i] for i in chosen}
    return [labeled[i] for i in sorted(keep)]


# ---------------------------------------------------------------------------
# Reports


@dataclass(frozen=True)
class MetricsReport:
    auc: float | None
    f1: float | None
    precision: float | None
    recall: float | None
    n: int
    weighting: Weighting
    threshold_used: float

    def as_dict(self) -> dict:
        return {
            "auc": self.auc,
            "f1": self.f1,
            "precision": self.precision,
            "recall": self.recall,
            "n": self.n,
            "weighting": self.weighting.value,
            "threshold": self.threshold_used,
        }


def metrics_report(records, weighting: Weighting, threshold: float) -> MetricsReport:
    prf = precision_recall_f1(confusion(records, weighting))
    try:
        _, auc = roc_curve(records_to_scored(records, weighting))
    except ValueError:
        auc = None
    return MetricsReport(
        auc=auc,
        f1=prf.f1,
        precision=prf.precision,
        recall=prf.recall,
        n=len(records),
        weighting=weighting,
        threshold_used=threshold,
    )


def write_city_report_csv(path, rows) -> None:
    """Rows of (city, MetricsReport) in the City/AUC/F1/Precision/Recall/N layout."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["City", "AUC", "F1", "Precision", "Recall", "N"])
        for city, report in rows:
            writer.writerow(
                [
                    city,
                    _fmt(report.auc),
                    _fmt(report.f1),
                    _fmt(report.precision),
                    _fmt(report.recall),
                    report.n,
                ]
            )


def write_report_json(path, reports: dict) -> None:
    Path(path).write_text(
        json.dumps({key: r.as_dict() for key, r in reports.items()}, indent=2, sort_keys=True) + "\n"
    )


def write_roc_csv(path, points) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["threshold", "fpr", "tpr"])
        for p in points:
            writer.writerow([repr(p.threshold), repr(p.fpr), repr(p.tpr)])


def write_pr_csv(path, points) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["threshold", "precision", "recall"])
        for p in points:
            writer.writerow([repr(p.threshold), repr(p.precision), repr(p.recall)])


def _fmt(value) -> str:
    return "" if value is None else repr(value)
