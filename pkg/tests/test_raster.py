import numpy as np
import pytest

from burnscar.bands import MODIS_BANDS, S2_BANDS, BandSpec
from burnscar.errors import SchemaError
from burnscar.raster import (
    Raster,
    align_common_bands,
    read_geotiff,
    resample_nearest,
    resample_nearest_array,
    write_geotiff,
)


def _raster(data, gsd=10.0, sensor="S2", names=None, **kw):
    data = np.asarray(data, dtype=np.float32)
    if data.ndim == 2:
        data = data[None]
    c = data.shape[0]
    names = names or [f"B{i:02d}" for i in range(1, c + 1)]
    bands = [BandSpec(sensor, n, 500.0 + i) for i, n in enumerate(names)]
    return Raster(data=data, gsd_m=gsd, bands=bands, **kw)


def test_identity_at_equal_gsd():
    r = _raster(np.arange(4, dtype=np.float32).reshape(2, 2))
    out = resample_nearest(r, r.gsd_m)
    assert np.array_equal(out.data, r.data)
    assert out.gsd_m == r.gsd_m


@pytest.mark.parametrize("factor", [2, 3])
def test_upsample_replicates_blocks(factor):
    vals = np.arange(16, dtype=np.float32).reshape(4, 4)
    r = _raster(vals, gsd=30.0)
    out = resample_nearest(r, 30.0 / factor)
    assert out.data.shape == (1, 4 * factor, 4 * factor)
    # nearest-neighbor integer upsampling replicates pixels into blocks
    expected = np.kron(vals, np.ones((factor, factor), dtype=np.float32))
    assert np.array_equal(out.data[0], expected)


def test_output_dims_rounding():
    # 2560 px at 10 m -> 60 m gives round(2560/6) = 427
    r = _raster(np.zeros((4, 2560), dtype=np.float32), gsd=10.0)
    out = resample_nearest(r, 60.0)
    assert out.data.shape[-1] == 427
    assert out.data.shape[-2] == round(4 * 10 / 60)


def test_nodata_mask_follows_data():
    data = np.arange(16, dtype=np.float32).reshape(4, 4)
    mask = np.zeros((4, 4), dtype=bool)
    mask[1, 2] = True
    r = _raster(data, gsd=20.0, nodata_mask=mask)
    out = resample_nearest(r, 10.0)
    assert out.nodata_mask.shape == (8, 8)
    assert out.nodata_mask[2:4, 4:6].all()
    assert out.nodata_mask.sum() == 4


def test_idempodent_at_same_gsd():
    rng = np.random.default_rng(3)
    r = _raster(rng.random((2, 7, 5), dtype=np.float32), gsd=10.0)
    once = resample_nearest(r, 25.0)
    twice = resample_nearest(once, 25.0)
    assert np.array_equal(once.data, twice.data)


def test_degenerate_output_rejected():
    r = _raster(np.zeros((2, 2), dtype=np.float32), gsd=10.0)
    with pytest.raises(ValueError):
        resample_nearest(r, 1e6)
    with pytest.raises(ValueError):
        resample_nearest(r, -5.0)


def test_resample_array_matches_raster_path():
    rng = np.random.default_rng(0)
    arr = rng.random((6, 9)).astype(np.float32)
    r = _raster(arr, gsd=10.0)
    out_r = resample_nearest(r, 15.0)
    out_a = resample_nearest_array(arr, 10.0, 15.0)
    assert np.array_equal(out_r.data[0], out_a)


def _full_stacks():
    rng = np.random.default_rng(1)
    s2 = Raster(
        data=rng.random((13, 8, 8), dtype=np.float32),
        gsd_m=60.0,
        bands=list(S2_BANDS),
    )
    modis = Raster(
        data=rng.random((7, 8, 8), dtype=np.float32),
        gsd_m=480.0,
        bands=list(MODIS_BANDS),
    )
    return s2, modis


def test_align_common_bands_order_and_duplication():
    s2, modis = _full_stacks()
    s2_out, mod_out = align_common_bands(s2, modis)
    assert [b.band_name for b in s2_out.bands] == ["B02", "B03", "B04", "B08", "B8A", "B12"]
    assert [b.band_name for b in mod_out.bands] == ["B03", "B04", "B01", "B02", "B02", "B07"]
    # duplicated LR NIR channel: rows 3 and 4 are the same data
    assert np.array_equal(mod_out.data[4], mod_out.data[3])
    # subsetting keeps the per-band content
    assert np.array_equal(s2_out.data[0], s2.data[1])  # Blue = B02 at index 1


def test_align_missing_band_raises():
    s2, modis = _full_stacks()
    s2_missing = Raster(
        data=s2.data[:12],
        gsd_m=s2.gsd_m,
        bands=[b for b in S2_BANDS if b.band_name != "B12"],
    )
    with pytest.raises(SchemaError, match="B12"):
        align_common_bands(s2_missing, modis)


def test_raster_invariants():
    with pytest.raises(SchemaError):
        Raster(data=np.zeros((2, 4, 4)), gsd_m=10.0, bands=[S2_BANDS[0]])
    with pytest.raises(ValueError):
        Raster(data=np.zeros((1, 4, 4)), gsd_m=-1.0, bands=[S2_BANDS[0]])
    with pytest.raises(ValueError):
        Raster(
            data=np.zeros((1, 4, 4)),
            gsd_m=10.0,
            bands=[S2_BANDS[0]],
            nodata_mask=np.zeros((2, 2), dtype=bool),
        )


def test_geotiff_roundtrip(tmp_path):
    rng = np.random.default_rng(7)
    r = Raster(
        data=rng.random((13, 6, 5), dtype=np.float32),
        gsd_m=60.0,
        bands=list(S2_BANDS),
        acquisition_date="2021-08-05",
        geo_transform=(500000.0, 60.0, 0.0, 4200000.0, 0.0, -60.0),
    )
    path = tmp_path / "scene.tif"
    write_geotiff(path, r)
    back = read_geotiff(path)
    assert np.array_equal(back.data, r.data)
    assert back.gsd_m == pytest.approx(60.0)
    assert back.acquisition_date == "2021-08-05"
    assert back.geo_transform == pytest.approx(r.geo_transform)
    assert [b.band_name for b in back.bands] == [b.band_name for b in r.bands]


def test_geotiff_missing_sidecar(tmp_path):
    import tifffile

    path = tmp_path / "bare.tif"
    tifffile.imwrite(path, np.zeros((4, 4), dtype=np.float32))
    with pytest.raises(SchemaError, match="sidecar"):
        read_geotiff(path)
