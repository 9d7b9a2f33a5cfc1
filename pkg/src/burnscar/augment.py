"""Geometric training augmentations.

Flips are exact array reversals applied to every grid.  Rotations use
bilinear resampling with reflect padding for imagery and nearest
neighbor for the high-resolution label; the low-resolution label is
then re-derived by block averaging so the two label grids stay
consistent after resampling.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy import ndimage

from .patches import PatchSample, downsample_label, hflip_sample, vflip_sample


@dataclass
class AugmentationConfig:
    p_hflip: float = 0.5
    p_vflip: float = 0.5
    p_rot: float = 0.5
    rot_range_deg: tuple[float, float] = (-15.0, 15.0)

    def __post_init__(self):
        for name in ("p_hflip", "p_vflip", "p_rot"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name}={v} not a probability")
        lo, hi = self.rot_range_deg
        if lo != -hi or not 0.0 <= hi < 90.0:
            raise ValueError(f"rot_range_deg {self.rot_range_deg} must be symmetric within (-90, 90)")


def _rotate_image(arr: np.ndarray, angle: float) -> np.ndarray:
    return ndimage.rotate(
        arr, angle, axes=(-2, -1), reshape=False, order=1, mode="reflect"
    ).astype(np.float32)


def _rotate_label(arr: np.ndarray, angle: float) -> np.ndarray:
    rot = ndimage.rotate(
        arr, angle, axes=(-2, -1), reshape=False, order=0, mode="reflect"
    )
    return (rot > 0.5).astype(np.float32)


def rotate_sample(sample: PatchSample, angle_deg: float) -> PatchSample:
    """Rotate every grid about its center by the same angle."""
    label_hr = _rotate_label(sample.label_hr, angle_deg)
    return replace(
        sample,
        hr_pre=_rotate_image(sample.hr_pre, angle_deg),
        lr_pre=_rotate_image(sample.lr_pre, angle_deg),
        lr_post=_rotate_image(sample.lr_post, angle_deg),
        label_hr=label_hr,
        label_lr=downsample_label(label_hr, sample.scale),
        is_positive=bool(label_hr.any()),
    )


def augment(
    sample: PatchSample,
    rng: np.random.Generator,
    cfg: AugmentationConfig = AugmentationConfig(),
) -> PatchSample:
    """Randomly flip and rotate one sample.

    Three independent coin flips plus one rotation angle are always
    drawn (keeping the stream layout fixed); each transform is applied
    to every grid of the sample or to none.
    """
    u = rng.random(3)
    angle = float(rng.uniform(*cfg.rot_range_deg))
    out = sample
    if u[0] < cfg.p_hflip:
        out = hflip_sample(out)
    if u[1] < cfg.p_vflip:
        out = vflip_sample(out)
    if u[2] < cfg.p_rot and angle != 0.0:
        out = rotate_sample(out, angle)
    return out
