import numpy as np
import pytest
import torch

from burnscar.model import ModelConfig
from burnscar.patches import PatchSample, downsample_label

# Keep runs reproducible and avoid oversubscribing small CI boxes.
torch.set_num_threads(min(4, torch.get_num_threads() or 1))

TINY_CONFIG = dict(c1=4, c2=3, s=8, widths=(4, 8), hr_depth=3)


@pytest.fixture
def tiny_config():
    return ModelConfig(**TINY_CONFIG)


def make_sample(
    seed: int = 0,
    c1: int = 4,
    c2: int = 3,
    hr: int = 32,
    s: int = 8,
    positive: bool = True,
    patch_id: str = "p0",
    event_id: str = "ev0",
) -> PatchSample:
    """Small random patch with a consistent cross-resolution label."""
    rng = np.random.default_rng(seed)
    label = np.zeros((hr, hr), dtype=np.float32)
    if positive:
        r0, c0 = rng.integers(0, hr // 2, size=2)
        label[r0 : r0 + hr // 2, c0 : c0 + hr // 2] = 1.0
    return PatchSample(
        patch_id=patch_id,
        event_id=event_id,
        hr_pre=rng.random((c1, hr, hr), dtype=np.float32),
        lr_pre=rng.random((c2, hr // s, hr // s), dtype=np.float32),
        lr_post=rng.random((c2, hr // s, hr // s), dtype=np.float32),
        label_hr=label,
        label_lr=downsample_label(label, s),
        is_positive=bool(label.any()),
        t1_date="2021-07-01",
        t2_date="2021-08-01",
    )


@pytest.fixture
def sample():
    return make_sample()


def write_toy_scene(
    root,
    event_id: str,
    seed: int,
    burnt: bool = True,
    size_target: str = "medium",
    hr_size: int = 128,
    area_ha: float = 120.0,
):
    """Render one synthetic scene triplet + label to GeoTIFFs.

    Returns the scene record dict the prepare command consumes.
    """
    import tifffile

    from burnscar.bands import MODIS_BANDS, S2_BANDS
    from burnscar.raster import Raster, write_geotiff
    from burnscar.synth import SceneSpec, degrade_to_lr, gen_burn_mask, render_bitemporal

    spec = SceneSpec(
        seed=seed, hr_size=hr_size, s=8, n_burns=1,
        size_class_target=size_target if burnt else "none",
        severity_range=(0.7, 1.0), noise_sigma=0.01,
    )
    mask = gen_burn_mask(spec)
    hr_pre, hr_post = render_bitemporal(spec, mask)
    rng = np.random.default_rng(seed)
    lr_pre = degrade_to_lr(hr_pre, 8, noise_sigma=0.005, rng=rng)
    lr_post = degrade_to_lr(hr_post, 8, noise_sigma=0.005, rng=rng)

    d = root / event_id
    d.mkdir()
    write_geotiff(d / "hr_pre.tif", Raster(
        data=hr_pre, gsd_m=60.0, bands=list(S2_BANDS), acquisition_date="2021-07-01"))
    write_geotiff(d / "lr_pre.tif", Raster(
        data=lr_pre, gsd_m=480.0, bands=list(MODIS_BANDS), acquisition_date="2021-07-01"))
    write_geotiff(d / "lr_post.tif", Raster(
        data=lr_post, gsd_m=480.0, bands=list(MODIS_BANDS), acquisition_date="2021-08-01"))
    tifffile.imwrite(d / "label.tif", mask.astype(np.float32))
    return {
        "event_id": event_id,
        "year": 2021,
        "burnt_area_ha": area_ha if burnt else 0.0,
        "hr_pre": f"{event_id}/hr_pre.tif",
        "lr_pre": f"{event_id}/lr_pre.tif",
        "lr_post": f"{event_id}/lr_post.tif",
        "label": f"{event_id}/label.tif",
        "label_gsd_m": 60.0,
    }
