import numpy as np
import pytest

from pwtt.grids import GeoGrid, OrbitPass, Polarization, Scene
from datetime import datetime


def make_grid(width=8, height=8, pixel_size=10.0, origin=(500000.0, 4650000.0), crs="EPSG:32636"):
    return GeoGrid(width=width, height=height, origin_x=origin[0], origin_y=origin[1],
                   pixel_size=pixel_size, crs_id=crs)


def make_scene(grid, values, when, orbit=OrbitPass.ASCENDING, pol=Polarization.VV, mask=None):
    values = np.asarray(values, dtype=np.float32)
    if values.ndim == 0:
        values = np.full(grid.shape, float(values), dtype=np.float32)
    return Scene(grid=grid, acquired_at=when, orbit_pass=orbit, polarization=pol,
                 values=values, nodata_mask=mask)


def day(i: int) -> datetime:
    """The i-th day of a fixed synthetic calendar."""
    return datetime(2023, 1, 1) + __import__("datetime").timedelta(days=i)


@pytest.fixture
def grid8():
    return make_grid()
