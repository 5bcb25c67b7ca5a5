import math
from datetime import datetime, timedelta

import numpy as np
import pytest
import shapely

from pwtt.footprints import footprint_from_polygon
from pwtt.grids import AnalysisWindow, OrbitPass, Polarization, select_stratum
from pwtt.sim import (
    DamageEvent,
    SimSpec,
    SurfaceClass,
    default_base_backscatter,
    simulate,
    synthetic_city,
)
from pwtt.ttest import PwttConfig, run_pwtt, temporal_mean

from conftest import make_grid


def small_spec(seed=0, looks=4.4, events=(), footprints=(), size=16, texture=0.0, seasonal=0.0):
    grid = make_grid(width=size, height=size)
    class_map = np.full((size, size), int(SurfaceClass.URBAN_DOUBLE_BOUNCE), dtype=np.uint8)
    return SimSpec(
        grid=grid,
        class_map=class_map,
        base_backscatter=default_base_backscatter(),
        footprints=tuple(footprints),
        events=tuple(events),
        seasonal_amplitude=seasonal,
        texture_std=texture,
        speckle_looks=looks,
        seed=seed,
    )


RANGE = (datetime(2023, 1, 1), datetime(2023, 4, 1))


class TestSimulate:
    def test_deterministic_under_seed(self):
        a = simulate(small_spec(seed=5), RANGE)
        b = simulate(small_spec(seed=5), RANGE)
        assert len(a.stack) == len(b.stack)
        for sa, sb in zip(a.stack, b.stack):
            assert np.array_equal(sa.values, sb.values)
        c = simulate(small_spec(seed=6), RANGE)
        assert not np.array_equal(a.stack[0].values, c.stack[0].values)

    def test_empty_date_range_rejected(self):
        with pytest.raises(ValueError):
            simulate(small_spec(), (RANGE[1], RANGE[0]))

    def test_noiseless_event_shifts_mean_exactly(self):
        grid = make_grid(width=16, height=16)
        poly = shapely.box(
            grid.origin_x + 40.0, grid.origin_y - 120.0, grid.origin_x + 120.0, grid.origin_y - 40.0
        )
        f = footprint_from_polygon("b0", poly)
        event = DamageEvent("b0", datetime(2023, 2, 15), -4.0, poly)
        spec = small_spec(looks=math.inf, events=[event], footprints=[f])
        out = simulate(spec, RANGE)
        # compare within one stratum: strata sit at different base levels
        before = select_stratum(out.stack, OrbitPass.ASCENDING, Polarization.VV,
                                (RANGE[0], datetime(2023, 2, 15)))
        after = select_stratum(out.stack, OrbitPass.ASCENDING, Polarization.VV,
                               (datetime(2023, 2, 15), RANGE[1]))
        mean_before = temporal_mean(before)
        mean_after = temporal_mean(after)
        inside = np.zeros(grid.shape, bool)
        inside[4:12, 4:12] = True
        drop = mean_before - mean_after
        assert np.allclose(drop[inside], 4.0, atol=1e-5)
        assert np.allclose(drop[~inside], 0.0, atol=1e-5)

    def test_speckle_converges_to_base_level(self):
        # law of large numbers: dB mean over many scenes approaches the clean level
        spec = small_spec(looks=4.4)
        long_range = (datetime(2020, 1, 1), datetime(2020, 1, 1) + timedelta(days=500 * 3))
        revisit = {k: 3.0 for k in spec.revisit_days}
        spec = SimSpec(
            grid=spec.grid, class_map=spec.class_map, base_backscatter=spec.base_backscatter,
            seasonal_amplitude=0.0, texture_std=0.0, speckle_looks=4.4,
            revisit_days=revisit, seed=3,
        )
        out = simulate(spec, long_range)
        stratum = select_stratum(out.stack, OrbitPass.ASCENDING, Polarization.VV)
        assert len(stratum) >= 450
        base = spec.base_backscatter[(SurfaceClass.URBAN_DOUBLE_BOUNCE, OrbitPass.ASCENDING, Polarization.VV)]
        # gamma speckle is biased in dB: E[10 log10 g] = 10 (psi(L) - ln L)/ln 10
        from scipy.special import digamma

        expected = base + 10.0 * (digamma(4.4) - math.log(4.4)) / math.log(10.0)
        got = float(temporal_mean(stratum).mean())
        assert got == pytest.approx(expected, abs=abs(expected) * 0.01)

    def test_annotations_follow_events(self):
        grid = make_grid(width=16, height=16)
        poly = shapely.box(grid.origin_x + 40, grid.origin_y - 100, grid.origin_x + 100, grid.origin_y - 40)
        f = footprint_from_polygon("b0", poly)
        g = footprint_from_polygon("b1", shapely.affinity.translate(poly, xoff=30, yoff=-10))
        event = DamageEvent("b0", datetime(2023, 2, 15), -4.0, poly)
        out = simulate(small_spec(events=[event], footprints=[f, g]), RANGE)
        assert len(out.annotations) == 1
        assert out.annotations[0].annotation_date == datetime(2023, 2, 15).date()
        assert out.truth == {"b0": True, "b1": False}

    def test_event_outside_grid_rejected(self):
        poly = shapely.box(0, 0, 50, 50)  # nowhere near the grid origin
        event = DamageEvent("x", datetime(2023, 2, 1), -4.0, poly)
        with pytest.raises(ValueError, match="outside the grid"):
            small_spec(events=[event])


class TestEventMonotonicity:
    def test_larger_delta_never_lowers_median_event_t(self):
        medians = []
        for delta in (1.0, 3.0, 6.0):
            grid = make_grid(width=24, height=24)
            poly = shapely.box(
                grid.origin_x + 60, grid.origin_y - 180, grid.origin_x + 180, grid.origin_y - 60
            )
            f = footprint_from_polygon("b0", poly)
            event = DamageEvent("b0", datetime(2023, 6, 1), -delta, poly)
            class_map = np.full(grid.shape, int(SurfaceClass.URBAN_DOUBLE_BOUNCE), dtype=np.uint8)
            spec = SimSpec(
                grid=grid, class_map=class_map, base_backscatter=default_base_backscatter(),
                footprints=(f,), events=(event,), seasonal_amplitude=0.0, texture_std=0.0,
                speckle_looks=4.4, seed=11,
            )
            out = simulate(spec, (datetime(2022, 6, 1), datetime(2023, 9, 1)))
            window = AnalysisWindow(
                (datetime(2022, 6, 1), datetime(2023, 5, 30)),
                (datetime(2023, 6, 2), datetime(2023, 8, 1)),
            )
            tmap = run_pwtt(out.stack, window, PwttConfig(speckle=None))
            inside = np.zeros(grid.shape, bool)
            inside[6:18, 6:18] = True
            medians.append(float(np.median(tmap.composite[inside])))
        assert medians[0] <= medians[1] <= medians[2]


class TestSignedDeltas:
    def test_gain_and_loss_both_score_high(self):
        grid = make_grid(width=32, height=32)
        loss_poly = shapely.box(grid.origin_x + 40, grid.origin_y - 140, grid.origin_x + 140, grid.origin_y - 40)
        gain_poly = shapely.box(grid.origin_x + 180, grid.origin_y - 280, grid.origin_x + 280, grid.origin_y - 180)
        class_map = np.full(grid.shape, int(SurfaceClass.URBAN_DOUBLE_BOUNCE), dtype=np.uint8)
        class_map[18:28, 18:28] = int(SurfaceClass.FLAT_ROOF)
        f_loss = footprint_from_polygon("loss", loss_poly)
        f_gain = footprint_from_polygon("gain", gain_poly)
        events = (
            DamageEvent("loss", datetime(2023, 6, 1), -4.0, loss_poly),
            DamageEvent("gain", datetime(2023, 6, 1), +4.0, gain_poly),
        )
        spec = SimSpec(
            grid=grid, class_map=class_map, base_backscatter=default_base_backscatter(),
            footprints=(f_loss, f_gain), events=events, seasonal_amplitude=0.0,
            texture_std=0.0, speckle_looks=4.4, seed=13,
        )
        out = simulate(spec, (datetime(2022, 6, 1), datetime(2023, 9, 1)))
        window = AnalysisWindow(
            (datetime(2022, 6, 1), datetime(2023, 5, 30)),
            (datetime(2023, 6, 2), datetime(2023, 8, 1)),
        )
        tmap = run_pwtt(out.stack, window, PwttConfig(speckle=None))
        loss_region = tmap.composite[5:13, 5:13]
        gain_region = tmap.composite[19:27, 19:27]
        stable = tmap.composite[5:13, 19:27]
        assert np.median(loss_region) > 3 * np.median(stable)
        assert np.median(gain_region) > 3 * np.median(stable)


class TestSyntheticCity:
    def test_layout_statistics(self):
        sc = synthetic_city(seed=1)
        areas = [f.area for f in sc.spec.footprints]
        assert sum(1 for a in areas if a < 50.0) >= 1  # clutter present
        assert sum(1 for a in areas if 50.0 <= a < 100.0) >= 1  # sub-pixel sheds
        evaluable = [f for f in sc.spec.footprints if f.area >= 50.0]
        damaged = {e.footprint_id for e in sc.spec.events}
        frac = len(damaged) / len(evaluable)
        assert 0.25 <= frac <= 0.35
        # both signs of delta present
        signs = {math.copysign(1, e.delta_db) for e in sc.spec.events}
        assert signs == {-1.0, 1.0}

    def test_window_matches_cadence_expectations(self):
        sc = synthetic_city(seed=1)
        out = simulate(sc.spec, sc.date_range)
        for orbit in OrbitPass:
            for pol in Polarization:
                ref = select_stratum(out.stack, orbit, pol, sc.window.reference)
                inf = select_stratum(out.stack, orbit, pol, sc.window.inference)
                assert 28 <= len(ref) <= 32  # ~one year at 12-day revisit
                assert 4 <= len(inf) <= 6  # ~two months
