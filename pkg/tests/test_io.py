import numpy as np
import pytest
import tifffile

from pwtt.grids import GridCompatibilityError, OrbitPass, Polarization, stack_scenes
from pwtt.io import (
    RasterFormatError,
    load_manifest,
    read_raster,
    read_scene,
    save_manifest,
    write_raster,
)

from conftest import day, make_grid


def test_round_trip_bit_exact(tmp_path, grid8):
    rng = np.random.default_rng(0)
    values = rng.normal(-12.0, 3.0, grid8.shape).astype(np.float32)
    path = tmp_path / "x.tif"
    write_raster(values, grid8, path)
    back, mask, grid = read_raster(path)
    assert np.array_equal(back, values)
    assert not mask.any()
    assert grid == grid8


def test_nodata_round_trip(tmp_path, grid8):
    values = np.full(grid8.shape, -12.0, dtype=np.float32)
    mask = np.zeros(grid8.shape, dtype=bool)
    mask[0, 0] = True
    path = tmp_path / "masked.tif"
    write_raster(values, grid8, path, nodata_mask=mask)
    back, back_mask, _ = read_raster(path)
    assert back_mask[0, 0] and back_mask.sum() == 1
    assert np.isnan(back[0, 0])
    assert np.array_equal(back[~back_mask], values[~back_mask])


def test_constant_scene_read(tmp_path):
    grid = make_grid(width=4, height=4)
    path = tmp_path / "c.tif"
    write_raster(np.full(grid.shape, -12.0), grid, path)
    scene = read_scene(path, day(0), OrbitPass.ASCENDING, Polarization.VV)
    assert np.all(scene.values == np.float32(-12.0))
    assert not scene.nodata_mask.any()


def test_numeric_nodata_sentinel(tmp_path, grid8):
    values = np.full(grid8.shape, 1.5, dtype=np.float32)
    values[0, 0] = -9999.0
    tifffile.imwrite(
        tmp_path / "s.tif",
        values,
        extratags=[
            (33550, "d", 3, (10.0, 10.0, 0.0)),
            (33922, "d", 6, (0.0, 0.0, 0.0, 500000.0, 4650000.0, 0.0)),
            (42113, "s", 0, "-9999"),
        ],
    )
    back, mask, _ = read_raster(tmp_path / "s.tif")
    assert mask[0, 0] and mask.sum() == 1


def test_one_by_one_raster(tmp_path):
    grid = make_grid(width=1, height=1)
    path = tmp_path / "tiny.tif"
    write_raster(np.array([[3.25]]), grid, path)
    back, _, g = read_raster(path)
    assert back[0, 0] == np.float32(3.25)
    assert g.shape == (1, 1)


def test_unreadable_file(tmp_path):
    path = tmp_path / "junk.tif"
    path.write_bytes(b"not a tiff at all")
    with pytest.raises(RasterFormatError, match="unreadable"):
        read_raster(path)


def test_integer_band_rejected(tmp_path):
    tifffile.imwrite(
        tmp_path / "int.tif",
        np.zeros((4, 4), dtype=np.int32),
        extratags=[
            (33550, "d", 3, (10.0, 10.0, 0.0)),
            (33922, "d", 6, (0.0, 0.0, 0.0, 0.0, 0.0, 0.0)),
        ],
    )
    with pytest.raises(RasterFormatError, match="floating point"):
        read_raster(tmp_path / "int.tif")


def test_rotated_geotransform_rejected(tmp_path):
    transform = (10.0, 2.0, 0.0, 500000.0, 0.5, -10.0, 0.0, 4650000.0, 0, 0, 0, 0, 0, 0, 0, 1)
    tifffile.imwrite(
        tmp_path / "rot.tif",
        np.zeros((4, 4), dtype=np.float32),
        extratags=[(34264, "d", 16, transform)],
    )
    with pytest.raises(RasterFormatError, match="rotated"):
        read_raster(tmp_path / "rot.tif")


def test_missing_geotransform_rejected(tmp_path):
    tifffile.imwrite(tmp_path / "plain.tif", np.zeros((4, 4), dtype=np.float32))
    with pytest.raises(RasterFormatError, match="geotransform"):
        read_raster(tmp_path / "plain.tif")


def test_mixed_pixel_sizes_rejected_at_stacking(tmp_path):
    g10 = make_grid(pixel_size=10.0)
    g20 = make_grid(pixel_size=20.0)
    write_raster(np.zeros(g10.shape), g10, tmp_path / "a.tif")
    write_raster(np.zeros(g20.shape), g20, tmp_path / "b.tif")
    a = read_scene(tmp_path / "a.tif", day(0), OrbitPass.ASCENDING, Polarization.VV)
    b = read_scene(tmp_path / "b.tif", day(1), OrbitPass.ASCENDING, Polarization.VV)
    with pytest.raises(GridCompatibilityError, match="incompatible grids"):
        stack_scenes([a, b])


def test_manifest_round_trip(tmp_path, grid8):
    write_raster(np.zeros(grid8.shape), grid8, tmp_path / "s0.tif")
    write_raster(np.ones(grid8.shape), grid8, tmp_path / "s1.tif")
    entries = [
        {"path": "s0.tif", "acquired_at": "2023-01-01T00:00:00", "orbit_pass": "ascending", "polarization": "VV"},
        {"path": "s1.tif", "acquired_at": "2023-01-13T06:30:00Z", "orbit_pass": "descending", "polarization": "VH"},
    ]
    save_manifest(entries, tmp_path / "manifest.json")
    scenes = load_manifest(tmp_path / "manifest.json")
    assert scenes[0].orbit_pass == OrbitPass.ASCENDING
    assert scenes[1].polarization == Polarization.VH
    assert scenes[1].acquired_at.hour == 6
    assert np.all(scenes[1].values == 1.0)
