"""Band definitions for the two sensors and the cross-sensor band pairing.

The high-resolution sensor ("S2", Sentinel-2 like, 13 bands) and the
low-resolution sensor ("MODIS", 7 bands) overlap in six spectral rows:
Blue, Green, Red, two NIR rows and one SWIR row.  The low-resolution NIR
band covers both high-resolution NIR bands, so it appears twice in the
paired ordering and the two aligned stacks end up with equal channel
counts.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import SchemaError

SENSORS = ("S2", "MODIS")


@dataclass(frozen=True)
class BandSpec:
    sensor_id: str
    band_name: str
    central_wavelength_nm: float

    def __post_init__(self):
        if self.sensor_id not in SENSORS:
            raise ValueError(f"unknown sensor_id {self.sensor_id!r}")
        if self.central_wavelength_nm <= 0:
            raise ValueError("central_wavelength_nm must be > 0")


def _s2(name: str, wl: float) -> BandSpec:
    return BandSpec("S2", name, wl)


def _modis(name: str, wl: float) -> BandSpec:
    return BandSpec("MODIS", name, wl)


# Sentinel-2A central wavelengths, nm.
S2_BANDS = (
    _s2("B01", 442.7),
    _s2("B02", 492.4),
    _s2("B03", 559.8),
    _s2("B04", 664.6),
    _s2("B05", 704.1),
    _s2("B06", 740.5),
    _s2("B07", 782.8),
    _s2("B08", 832.8),
    _s2("B8A", 864.7),
    _s2("B09", 945.1),
    _s2("B10", 1373.5),
    _s2("B11", 1613.7),
    _s2("B12", 2202.4),
)

# MODIS (Terra/Aqua) land bands 1-7, nm.
MODIS_BANDS = (
    _modis("B01", 645.0),
    _modis("B02", 858.5),
    _modis("B03", 469.0),
    _modis("B04", 555.0),
    _modis("B05", 1240.0),
    _modis("B06", 1640.0),
    _modis("B07", 2130.0),
)

# Spectral rows shared by the two sensors, in the fixed output order
# (Blue, Green, Red, NIR, NIR, SWIR).  The low-resolution NIR band pairs
# with both high-resolution NIR bands.
COMMON_BAND_ROWS = (
    ("Blue", "B02", "B03"),
    ("Green", "B03", "B04"),
    ("Red", "B04", "B01"),
    ("NIR", "B08", "B02"),
    ("NIR", "B8A", "B02"),
    ("SWIR", "B12", "B07"),
)


def band_index(bands, sensor_id: str, band_name: str) -> int:
    """Index of a named band in a band list; SchemaError if absent."""
    for i, b in enumerate(bands):
        if b.sensor_id == sensor_id and b.band_name == band_name:
            return i
    raise SchemaError(f"missing band {band_name} for sensor {sensor_id}")


def common_band_indices(s2_bands, modis_bands) -> tuple[list[int], list[int]]:
    """Channel indices realizing the shared-row pairing for both stacks."""
    s2_idx = [band_index(s2_bands, "S2", row[1]) for row in COMMON_BAND_ROWS]
    mod_idx = [band_index(modis_bands, "MODIS", row[2]) for row in COMMON_BAND_ROWS]
    return s2_idx, mod_idx
