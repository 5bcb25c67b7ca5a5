"""Per-pixel temporal statistics and the composite change score.

For every stratum (orbit pass x polarization) with enough scenes in both
sample periods, each pixel gets a two-sample statistic

    t = (mean_ref - mean_inf) / sqrt(s2_ref/n_ref + s2_inf/n_inf)

from the temporal mean and sample standard deviation (n-1 denominator) of
the backscatter amplitude. The composite score is the per-pixel maximum of
|t| over strata, so a backscatter gain and a loss of equal size score the
same. Summation order over a pixel's time series is fixed by stack order,
which keeps results bit-identical under any row-tile partitioning.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import betainc

from .grids import AnalysisWindow, GeoGrid, OrbitPass, Polarization, SceneStack, select_stratum
from .speckle import LeeParams, lee_filter

DEFAULT_VARIANCE_FLOOR = 1e-6
DEFAULT_MIN_SAMPLES = 2


class InsufficientSamplesError(ValueError):
    """No stratum has enough scenes in both sample periods."""


@dataclass(frozen=True, eq=False)
class StratumStats:
    """Per-pixel temporal statistics for one (orbit, polarization, period)."""

    orbit_pass: OrbitPass
    polarization: Polarization
    period: str  # "reference" | "inference"
    mean: np.ndarray
    std: np.ndarray
    count: np.ndarray


@dataclass(frozen=True, eq=False)
class TMap:
    """Composite change raster plus the per-stratum pieces it was built from.

    ``stratum_counts`` records scene counts as ``{stratum: (n_ref, n_inf)}``;
    per-pixel valid-sample counts live in the StratumStats.
    """

    grid: GeoGrid
    composite: np.ndarray
    per_stratum_t: dict[str, np.ndarray]
    stratum_counts: dict[str, tuple[int, int]]
    min_samples_used: int
    stats: dict[str, tuple[StratumStats, StratumStats]] = field(default_factory=dict)

    def max_value(self) -> float:
        finite = self.composite[np.isfinite(self.composite)]
        return float(finite.max()) if finite.size else float("nan")


def stratum_key(orbit: OrbitPass, pol: Polarization) -> str:
    return f"{OrbitPass(orbit).value}_{Polarization(pol).value}"


def temporal_count(stack: SceneStack) -> np.ndarray:
    count = np.zeros(stack.grid.shape, dtype=np.int64)
    for s in stack:
        count += ~s.nodata_mask
    return count


def temporal_mean(stack: SceneStack) -> np.ndarray:
    """Per-pixel mean over unmasked samples; NaN where no sample exists."""
    total = np.zeros(stack.grid.shape, dtype=np.float64)
    count = np.zeros(stack.grid.shape, dtype=np.int64)
    for s in stack:
        valid = ~s.nodata_mask
        total += np.where(valid, s.values.astype(np.float64), 0.0)
        count += valid
    with np.errstate(invalid="ignore", divide="ignore"):
        mean = total / count
    mean[count == 0] = np.nan
    return mean


def temporal_std(stack: SceneStack) -> np.ndarray:
    """Per-pixel sample standard deviation (n-1 denominator); NaN where n < 2."""
    return _stats_from_stack(stack)[1]


def _stats_from_stack(stack: SceneStack) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    mean = temporal_mean(stack)
    count = temporal_count(stack)
    ssd = np.zeros(stack.grid.shape, dtype=np.float64)
    safe_mean = np.where(np.isfinite(mean), mean, 0.0)
    for s in stack:
        valid = ~s.nodata_mask
        d = s.values.astype(np.float64) - safe_mean
        ssd += np.where(valid, d * d, 0.0)
    with np.errstate(invalid="ignore", divide="ignore"):
        std = np.sqrt(ssd / (count - 1))
    std[count < 2] = np.nan
    return mean, std, count


def stratum_stats(stack: SceneStack, period: str) -> StratumStats:
    mean, std, count = _stats_from_stack(stack)
    first = stack[0]
    return StratumStats(
        orbit_pass=first.orbit_pass,
        polarization=first.polarization,
        period=period,
        mean=mean,
        std=std,
        count=count,
    )


def welch_t(
    ref_mean,
    ref_std,
    ref_n,
    inf_mean,
    inf_std,
    inf_n,
    min_samples: int = DEFAULT_MIN_SAMPLES,
    variance_floor: float = DEFAULT_VARIANCE_FLOOR,
) -> np.ndarray:
    """Unpooled two-sample t, elementwise over grid-compatible arrays.

    Each period's variance-over-n term is floored at ``variance_floor`` so
    perfectly constant pixels yield a large finite t instead of dividing by
    zero. NaN where either sample count falls below ``min_samples``.
    """
    ref_mean = np.asarray(ref_mean, dtype=np.float64)
    inf_mean = np.asarray(inf_mean, dtype=np.float64)
    ref_std = np.asarray(ref_std, dtype=np.float64)
    inf_std = np.asarray(inf_std, dtype=np.float64)
    ref_n = np.asarray(ref_n, dtype=np.float64)
    inf_n = np.asarray(inf_n, dtype=np.float64)

    with np.errstate(invalid="ignore", divide="ignore"):
        term_ref = np.maximum(ref_std * ref_std / ref_n, variance_floor)
        term_inf = np.maximum(inf_std * inf_std / inf_n, variance_floor)
        t = (ref_mean - inf_mean) / np.sqrt(term_ref + term_inf)
    t = np.where((ref_n < min_samples) | (inf_n < min_samples), np.nan, t)
    return t


def composite_T(per_stratum_t) -> np.ndarray:
    """Per-pixel max of |t| over strata; strata that are NaN at a pixel are
    skipped, and the result is NaN only where every stratum is NaN."""
    rasters = list(per_stratum_t)
    if not rasters:
        raise ValueError("composite_T requires at least one stratum raster")
    out = np.full(np.asarray(rasters[0]).shape, np.nan, dtype=np.float64)
    for t in rasters:
        out = np.fmax(out, np.abs(np.asarray(t, dtype=np.float64)))
    return out


# ---------------------------------------------------------------------------
# Student-t tail machinery (shared with the regression p-values)


def student_t_sf(t, df) -> np.ndarray:
    """One-sided survival function P(T > t) of Student's t via the
    regularized incomplete beta function."""
    t = np.asarray(t, dtype=np.float64)
    df = float(df)
    x = df / (df + t * t)
    half_tail = 0.5 * betainc(df / 2.0, 0.5, x)
    return np.where(t >= 0, half_tail, 1.0 - half_tail)


def t_critical(df: float, alpha: float, tol: float = 1e-8) -> float:
    """Two-sided critical value: the c > 0 with P(|T| > c) = alpha.

    Solved by bisecting the regularized-incomplete-beta form of the t CDF
    down to ``tol``.
    """
    if not (np.isfinite(df) and df >= 1):
        raise ValueError(f"df must be finite and >= 1, got {df}")
    if not (0.0 < alpha < 1.0):
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    df = float(df)

    def two_sided_tail(c: float) -> float:
        return float(betainc(df / 2.0, 0.5, df / (df + c * c)))

    lo, hi = 0.0, 1.0
    while two_sided_tail(hi) > alpha:
        hi *= 2.0
        if hi > 1e12:
            raise ValueError(f"t_critical failed to bracket for df={df}, alpha={alpha}")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if two_sided_tail(mid) > alpha:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def composite_significance_threshold(stratum_counts, alpha: float) -> float:
    """Significance threshold for a composite (max-over-strata) T map.

    The composite takes the max of |t| over k strata, and with few inference
    scenes the per-stratum statistic is heavier-tailed than the pooled-df t.
    Both effects are handled conservatively: the Sidak-adjusted per-stratum
    level 1 - (1-alpha)^(1/k) is evaluated at df = min(n_ref, n_inf) - 1,
    the conservative two-sample bound. The unadjusted per-stratum critical
    value t_critical(n_ref + n_inf - 2, alpha) is reported alongside in run
    manifests.
    """
    counts = [(int(a), int(b)) for a, b in stratum_counts]
    if not counts:
        raise ValueError("no stratum counts supplied")
    k = len(counts)
    df = min(min(a, b) for a, b in counts) - 1
    alpha_adj = 1.0 - (1.0 - alpha) ** (1.0 / k)
    return t_critical(df, alpha_adj)


# ---------------------------------------------------------------------------
# Full map computation


@dataclass(frozen=True)
class PwttConfig:
    min_samples: int = DEFAULT_MIN_SAMPLES
    variance_floor: float = DEFAULT_VARIANCE_FLOOR
    speckle: LeeParams | None = LeeParams()
    tile_rows: int | None = None


def run_pwtt(stack: SceneStack, window: AnalysisWindow, config: PwttConfig = PwttConfig()) -> TMap:
    """Compute the composite T map for a stack and an analysis window.

    Strata with data in only one period are skipped; if no stratum clears
    ``min_samples`` scenes in both periods the whole run fails with
    :class:`InsufficientSamplesError`.
    """
    if len(stack) == 0:
        raise ValueError("empty scene stack")
    grid = stack.grid

    if config.speckle is not None:
        stack = SceneStack(tuple(lee_filter(s, config.speckle) for s in stack))

    strata = []
    for orbit, pol in itertools.product(OrbitPass, Polarization):
        ref = select_stratum(stack, orbit, pol, window.reference)
        inf = select_stratum(stack, orbit, pol, window.inference)
        if len(ref) >= config.min_samples and len(inf) >= config.min_samples:
            strata.append((orbit, pol, ref, inf))
    if not strata:
        raise InsufficientSamplesError(
            f"insufficient temporal samples: no stratum has >= {config.min_samples} "
            "scenes in both the reference and inference periods"
        )

    height = grid.height
    tile = config.tile_rows or height
    per_stratum_t: dict[str, np.ndarray] = {}
    stats: dict[str, tuple[StratumStats, StratumStats]] = {}
    counts: dict[str, tuple[int, int]] = {}

    for orbit, pol, ref, inf in strata:
        key = stratum_key(orbit, pol)
        t_full = np.empty(grid.shape, dtype=np.float64)
        ref_parts, inf_parts = [], []
        for r0 in range(0, height, tile):
            r1 = min(r0 + tile, height)
            ref_stats = _block_stats(ref, r0, r1)
            inf_stats = _block_stats(inf, r0, r1)
            t_full[r0:r1] = welch_t(
                ref_stats[0], ref_stats[1], ref_stats[2],
                inf_stats[0], inf_stats[1], inf_stats[2],
                min_samples=config.min_samples,
                variance_floor=config.variance_floor,
            )
            ref_parts.append(ref_stats)
            inf_parts.append(inf_stats)
        per_stratum_t[key] = t_full
        counts[key] = (len(ref), len(inf))
        stats[key] = (
            _assemble_stats(ref_parts, orbit, pol, "reference"),
            _assemble_stats(inf_parts, orbit, pol, "inference"),
        )

    composite = composite_T(list(per_stratum_t.values()))
    return TMap(
        grid=grid,
        composite=composite,
        per_stratum_t=per_stratum_t,
        stratum_counts=counts,
        min_samples_used=config.min_samples,
        stats=stats,
    )


def _block_stats(stack: SceneStack, r0: int, r1: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    shape = (r1 - r0, stack.grid.width)
    total = np.zeros(shape, dtype=np.float64)
    count = np.zeros(shape, dtype=np.int64)
    for s in stack:
        valid = ~s.nodata_mask[r0:r1]
        total += np.where(valid, s.values[r0:r1].astype(np.float64), 0.0)
        count += valid
    with np.errstate(invalid="ignore", divide="ignore"):
        mean = total / count
    mean[count == 0] = np.nan
    ssd = np.zeros(shape, dtype=np.float64)
    safe_mean = np.where(np.isfinite(mean), mean, 0.0)
    for s in stack:
        valid = ~s.nodata_mask[r0:r1]
        d = s.values[r0:r1].astype(np.float64) - safe_mean
        ssd += np.where(valid, d * d, 0.0)
    with np.errstate(invalid="ignore", divide="ignore"):
        std = np.sqrt(ssd / (count - 1))
    std[count < 2] = np.nan
    return mean, std, count


def _assemble_stats(parts, orbit, pol, period) -> StratumStats:
    return StratumStats(
        orbit_pass=orbit,
        polarization=pol,
        period=period,
        mean=np.concatenate([p[0] for p in parts], axis=0),
        std=np.concatenate([p[1] for p in parts], axis=0),
        count=np.concatenate([p[2] for p in parts], axis=0),
    )
