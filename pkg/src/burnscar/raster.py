"""Multi-band raster container, nearest-neighbor resampling and GeoTIFF IO.

Rasters are plain ``(C, H, W)`` float32 arrays with band metadata, a
ground sampling distance in meters and a 6-term affine geotransform
(GDAL term order).  Inputs are assumed co-registered; no reprojection is
performed here.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
import tifffile

from .bands import MODIS_BANDS, S2_BANDS, BandSpec, common_band_indices
from .errors import SchemaError

# GeoTIFF tag ids for the pixel scale and tie point.
_TAG_MODEL_PIXEL_SCALE = 33550
_TAG_MODEL_TIEPOINT = 33922


@dataclass
class Raster:
    data: np.ndarray  # (C, H, W) float32
    gsd_m: float
    bands: list[BandSpec]
    nodata_mask: np.ndarray = None  # (H, W) bool, True where invalid
    acquisition_date: str = ""
    geo_transform: tuple = (0.0, 1.0, 0.0, 0.0, 0.0, -1.0)

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float32)
        if self.data.ndim != 3:
            raise ValueError(f"raster data must be (C, H, W), got {self.data.shape}")
        if self.gsd_m <= 0:
            raise ValueError("gsd_m must be > 0")
        if len(self.bands) != self.data.shape[0]:
            raise SchemaError(
                f"{len(self.bands)} band specs for {self.data.shape[0]} channels"
            )
        if self.nodata_mask is None:
            self.nodata_mask = np.zeros(self.data.shape[1:], dtype=bool)
        self.nodata_mask = np.asarray(self.nodata_mask, dtype=bool)
        if self.nodata_mask.shape != self.data.shape[1:]:
            raise ValueError(
                f"nodata_mask shape {self.nodata_mask.shape} does not match "
                f"raster grid {self.data.shape[1:]}"
            )
        if len(self.geo_transform) != 6:
            raise ValueError("geo_transform must have 6 terms")
        self.geo_transform = tuple(float(v) for v in self.geo_transform)

    @property
    def shape(self) -> tuple:
        return self.data.shape

    def band_names(self) -> list[str]:
        return [b.band_name for b in self.bands]


def _nearest_indices(n_out: int, n_in: int) -> np.ndarray:
    # Output pixel centers land at (i + 0.5) * n_in / n_out on the input
    # grid; the containing input pixel is the nearest center.
    centers = (np.arange(n_out) + 0.5) * (n_in / n_out)
    return np.clip(np.floor(centers).astype(np.int64), 0, n_in - 1)


def resample_nearest(r: Raster, target_gsd_m: float) -> Raster:
    """Resample a raster to a new ground sampling distance.

    Output dimensions are ``round(dim * gsd / target_gsd)`` and every
    output pixel copies the input pixel whose center is nearest to its
    own.  The nodata mask is resampled with the same index map.
    """
    if target_gsd_m <= 0:
        raise ValueError("target_gsd_m must be > 0")
    c, h, w = r.data.shape
    h_out = int(round(h * r.gsd_m / target_gsd_m))
    w_out = int(round(w * r.gsd_m / target_gsd_m))
    if h_out == 0 or w_out == 0:
        raise ValueError(
            f"degenerate output grid {h_out}x{w_out} for target {target_gsd_m} m"
        )
    rows = _nearest_indices(h_out, h)
    cols = _nearest_indices(w_out, w)
    data = r.data[:, rows[:, None], cols[None, :]]
    mask = r.nodata_mask[rows[:, None], cols[None, :]]
    gt = r.geo_transform
    geo = (gt[0], gt[1] * w / w_out, gt[2], gt[3], gt[4], gt[5] * h / h_out)
    return replace(
        r, data=data, gsd_m=target_gsd_m, nodata_mask=mask, geo_transform=geo
    )


def resample_nearest_array(arr: np.ndarray, gsd_m: float, target_gsd_m: float) -> np.ndarray:
    """Nearest-neighbor resample of a bare (H, W) array (labels, masks)."""
    if target_gsd_m <= 0:
        raise ValueError("target_gsd_m must be > 0")
    h, w = arr.shape
    h_out = int(round(h * gsd_m / target_gsd_m))
    w_out = int(round(w * gsd_m / target_gsd_m))
    if h_out == 0 or w_out == 0:
        raise ValueError(f"degenerate output grid {h_out}x{w_out}")
    rows = _nearest_indices(h_out, h)
    cols = _nearest_indices(w_out, w)
    return arr[rows[:, None], cols[None, :]]


def align_common_bands(s2: Raster, modis: Raster) -> tuple[Raster, Raster]:
    """Subset both rasters to the shared spectral rows, in a fixed order.

    Output channel order is (Blue, Green, Red, NIR, NIR, SWIR); the
    low-resolution NIR band is duplicated so both outputs have six
    channels.  Raises SchemaError naming any missing band.
    """
    s2_idx, mod_idx = common_band_indices(s2.bands, modis.bands)
    s2_out = replace(s2, data=s2.data[s2_idx], bands=[s2.bands[i] for i in s2_idx])
    mod_out = replace(
        modis, data=modis.data[mod_idx], bands=[modis.bands[i] for i in mod_idx]
    )
    return s2_out, mod_out


def standard_bands(sensor_id: str) -> list[BandSpec]:
    if sensor_id == "S2":
        return list(S2_BANDS)
    if sensor_id == "MODIS":
        return list(MODIS_BANDS)
    raise SchemaError(f"unknown sensor {sensor_id!r}")


def _bands_from_sidecar(meta: dict) -> list[BandSpec]:
    sensor = meta.get("sensor")
    if "bands" in meta:
        std = {b.band_name: b for b in standard_bands(sensor)}
        out = []
        for name in meta["bands"]:
            if name in std:
                out.append(std[name])
            else:
                wl = meta.get("wavelengths_nm", {}).get(name)
                if wl is None:
                    raise SchemaError(
                        f"band {name} has no known wavelength for sensor {sensor}"
                    )
                out.append(BandSpec(sensor, name, float(wl)))
        return out
    return standard_bands(sensor)


def read_geotiff(path, sidecar=None) -> Raster:
    """Read a multi-band GeoTIFF plus its JSON band-map sidecar.

    The sidecar (default ``<path>.json``) names the sensor and band
    order and may carry gsd_m, date and a nodata value.  The affine
    geotransform is taken from the GeoTIFF pixel-scale/tiepoint tags
    when present.
    """
    path = Path(path)
    sidecar = Path(sidecar) if sidecar else path.with_suffix(path.suffix + ".json")
    if not sidecar.exists():
        raise SchemaError(f"missing band-map sidecar {sidecar}")
    meta = json.loads(sidecar.read_text())

    with tifffile.TiffFile(path) as tif:
        series = tif.series[0]
        data = series.asarray()
        axes = series.axes
        page = tif.pages[0]
        scale_tag = page.tags.get(_TAG_MODEL_PIXEL_SCALE)
        tie_tag = page.tags.get(_TAG_MODEL_TIEPOINT)
        scale = tuple(scale_tag.value) if scale_tag is not None else None
        tie = tuple(tie_tag.value) if tie_tag is not None else None

    if data.ndim == 2:
        data = data[None]
    elif axes.endswith("S"):  # (H, W, C) -> (C, H, W)
        data = np.moveaxis(data, -1, 0)
    data = np.asarray(data, dtype=np.float32)

    gsd = float(meta.get("gsd_m", 0.0))
    geo = None
    if scale is not None and tie is not None:
        sx, sy = float(scale[0]), float(scale[1])
        tx, ty = float(tie[3]), float(tie[4])
        geo = (tx, sx, 0.0, ty, 0.0, -sy)
        if gsd <= 0:
            gsd = sx
    if gsd <= 0:
        raise SchemaError(f"no gsd_m in sidecar and no pixel scale tag in {path}")
    if geo is None:
        geo = (0.0, gsd, 0.0, 0.0, 0.0, -gsd)

    nodata = meta.get("nodata_value")
    mask = None
    if nodata is not None:
        mask = np.any(data == float(nodata), axis=0)

    return Raster(
        data=data,
        gsd_m=gsd,
        bands=_bands_from_sidecar(meta),
        nodata_mask=mask,
        acquisition_date=meta.get("date", ""),
        geo_transform=geo,
    )


def write_geotiff(path, raster: Raster, sidecar_extra: dict | None = None) -> None:
    """Write a raster as a multi-band GeoTIFF with a JSON sidecar."""
    path = Path(path)
    gt = raster.geo_transform
    extratags = [
        (_TAG_MODEL_PIXEL_SCALE, "d", 3, (gt[1], -gt[5], 0.0)),
        (_TAG_MODEL_TIEPOINT, "d", 6, (0.0, 0.0, 0.0, gt[0], gt[3], 0.0)),
    ]
    tifffile.imwrite(
        path, raster.data, planarconfig="separate", extratags=extratags
    )
    meta = {
        "sensor": raster.bands[0].sensor_id if raster.bands else "S2",
        "bands": raster.band_names(),
        "gsd_m": raster.gsd_m,
        "date": raster.acquisition_date,
    }
    if sidecar_extra:
        meta.update(sidecar_extra)
    path.with_suffix(path.suffix + ".json").write_text(json.dumps(meta, indent=2))
