import numpy as np
import pytest

from pwtt.population import PopulationRaster, damage_mask, exposure
from pwtt.ttest import TMap

from conftest import make_grid


def tmap_from(comp, grid):
    return TMap(grid=grid, composite=np.asarray(comp, float), per_stratum_t={},
                stratum_counts={}, min_samples_used=2)


def brute_force_exposure(pop, tmap, threshold):
    """Per-population-pixel rectangle intersection, plain loops."""
    mask = damage_mask(tmap, threshold)
    tg, pg = tmap.grid, pop.grid
    total = 0.0
    for pr in range(pg.height):
        for pc in range(pg.width):
            px0 = pg.origin_x + pc * pg.pixel_size
            px1 = px0 + pg.pixel_size
            py1 = pg.origin_y - pr * pg.pixel_size
            py0 = py1 - pg.pixel_size
            covered = 0.0
            for tr in range(tg.height):
                for tc in range(tg.width):
                    if not mask[tr, tc]:
                        continue
                    tx0 = tg.origin_x + tc * tg.pixel_size
                    tx1 = tx0 + tg.pixel_size
                    ty1 = tg.origin_y - tr * tg.pixel_size
                    ty0 = ty1 - tg.pixel_size
                    dx = min(px1, tx1) - max(px0, tx0)
                    dy = min(py1, ty1) - max(py0, ty0)
                    if dx > 0 and dy > 0:
                        covered += dx * dy
            if covered > 0.5 * pg.pixel_size**2:
                total += pop.values[pr, pc]
    return total


class TestPopulationRaster:
    def test_negative_values_rejected(self):
        grid = make_grid(width=2, height=2, pixel_size=90.0)
        with pytest.raises(ValueError):
            PopulationRaster(grid=grid, values=np.array([[1.0, -2.0], [0.0, 0.0]]))

    def test_total(self):
        grid = make_grid(width=2, height=2, pixel_size=90.0)
        pop = PopulationRaster(grid=grid, values=np.full((2, 2), 5.0))
        assert pop.total == 20.0


class TestExposure:
    def test_zero_population(self):
        tgrid = make_grid(width=9, height=9, pixel_size=10.0)
        pgrid = make_grid(width=1, height=1, pixel_size=90.0)
        pop = PopulationRaster(grid=pgrid, values=np.zeros((1, 1)))
        tm = tmap_from(np.full(tgrid.shape, 9.0), tgrid)
        assert exposure(pop, tm, threshold=2.0) == 0.0

    def test_exact_aligned_sum(self):
        # population grid 3x coarser and aligned; mask covers 4 of 9 pop pixels
        tgrid = make_grid(width=9, height=9, pixel_size=30.0)
        pgrid = make_grid(width=3, height=3, pixel_size=90.0)
        comp = np.zeros(tgrid.shape)
        comp[0:6, 0:6] = 9.0  # two by two pop pixels fully covered
        pop = PopulationRaster(grid=pgrid, values=np.full((3, 3), 10.0))
        assert exposure(pop, tmap_from(comp, tgrid), threshold=2.0) == 40.0

    def test_matches_brute_force_on_random_offset_grids(self):
        rng = np.random.default_rng(0)
        for trial in range(5):
            tgrid = make_grid(width=20, height=16, pixel_size=10.0,
                              origin=(1000.0, 2000.0))
            pgrid = make_grid(
                width=4, height=3, pixel_size=55.0,
                origin=(1000.0 + rng.uniform(-25, 25), 2000.0 + rng.uniform(-25, 25)),
            )
            comp = np.where(rng.random(tgrid.shape) < 0.4, 5.0, 0.0)
            comp[rng.random(tgrid.shape) < 0.1] = np.nan
            pop = PopulationRaster(grid=pgrid, values=np.round(rng.uniform(0, 20, pgrid.shape), 1))
            tm = tmap_from(comp, tgrid)
            got = exposure(pop, tm, threshold=2.0)
            expect = brute_force_exposure(pop, tm, threshold=2.0)
            assert got == pytest.approx(expect, abs=1e-9)

    def test_monotone_in_threshold(self):
        rng = np.random.default_rng(1)
        tgrid = make_grid(width=18, height=18, pixel_size=10.0)
        pgrid = make_grid(width=2, height=2, pixel_size=90.0)
        comp = rng.uniform(0, 8, tgrid.shape)
        pop = PopulationRaster(grid=pgrid, values=rng.uniform(0, 30, pgrid.shape))
        tm = tmap_from(comp, tgrid)
        exposures = [exposure(pop, tm, thr) for thr in (0.0, 2.0, 4.0, 6.0, 1e9)]
        assert all(a >= b for a, b in zip(exposures, exposures[1:]))
        assert exposures[0] <= pop.total
        assert exposures[-1] == 0.0

    def test_disjoint_extents_rejected(self):
        tgrid = make_grid(width=4, height=4, pixel_size=10.0, origin=(0.0, 40.0))
        pgrid = make_grid(width=1, height=1, pixel_size=90.0, origin=(10000.0, 10000.0))
        pop = PopulationRaster(grid=pgrid, values=np.ones((1, 1)))
        with pytest.raises(ValueError, match="disjoint"):
            exposure(pop, tmap_from(np.ones(tgrid.shape), tgrid), 0.5)

    def test_nodata_pixels_outside_mask(self):
        tgrid = make_grid(width=9, height=9, pixel_size=10.0)
        pgrid = make_grid(width=1, height=1, pixel_size=90.0)
        comp = np.full(tgrid.shape, np.nan)
        pop = PopulationRaster(grid=pgrid, values=np.full((1, 1), 50.0))
        assert exposure(pop, tmap_from(comp, tgrid), threshold=-1.0) == 0.0
