"""Patch extraction and filtering.

A patch sample bundles the three model inputs (high-resolution pre-fire
image, low-resolution pre- and post-fire images) with the binary burn
label at both grids.  The low-resolution label is derived from the
high-resolution one by block averaging: an LR pixel counts as burnt when
at least half of the HR pixels it covers are burnt (ties round to 1).
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Mapping

import numpy as np

from .errors import AlignmentError
from .raster import Raster


@dataclass
class PatchSample:
    patch_id: str
    event_id: str
    hr_pre: np.ndarray  # (C1, H, W)
    lr_pre: np.ndarray  # (C2, H/s, W/s)
    lr_post: np.ndarray  # (C2, H/s, W/s)
    label_hr: np.ndarray  # (H, W) of {0, 1}
    label_lr: np.ndarray  # (H/s, W/s) of {0, 1}
    is_positive: bool
    t1_date: str = ""
    t2_date: str = ""
    lr_bad_fraction: float = 0.0  # nodata/cloud fraction over the LR tiles

    def __post_init__(self):
        self.hr_pre = np.asarray(self.hr_pre, dtype=np.float32)
        self.lr_pre = np.asarray(self.lr_pre, dtype=np.float32)
        self.lr_post = np.asarray(self.lr_post, dtype=np.float32)
        self.label_hr = np.asarray(self.label_hr, dtype=np.float32)
        self.label_lr = np.asarray(self.label_lr, dtype=np.float32)
        h, w = self.label_hr.shape
        hl, wl = self.label_lr.shape
        if self.hr_pre.shape[1:] != (h, w):
            raise ValueError("hr_pre grid does not match label_hr")
        if self.lr_pre.shape != self.lr_post.shape:
            raise ValueError("lr_pre and lr_post shapes differ")
        if self.lr_pre.shape[1:] != (hl, wl):
            raise ValueError("lr grid does not match label_lr")
        if hl == 0 or wl == 0 or h % hl or w % wl or h // hl != w // wl:
            raise ValueError(f"HR grid {h}x{w} is not an integer multiple of LR {hl}x{wl}")

    @property
    def scale(self) -> int:
        return self.label_hr.shape[0] // self.label_lr.shape[0]

    @property
    def n_pos(self) -> int:
        return int(self.label_hr.sum())

    def validate(self) -> None:
        """Check the label and date invariants."""
        for name, lab in (("label_hr", self.label_hr), ("label_lr", self.label_lr)):
            if not np.isin(lab, (0.0, 1.0)).all():
                raise ValueError(f"{name} contains non-binary values")
        if self.is_positive != bool(self.label_hr.any()):
            raise ValueError("is_positive flag disagrees with label_hr content")
        if self.t1_date and self.t2_date and self.t2_date <= self.t1_date:
            raise ValueError(f"t2_date {self.t2_date} not after t1_date {self.t1_date}")


def downsample_label(label_hr: np.ndarray, s: int, soft: bool = False) -> np.ndarray:
    """Block-average a binary label down by a factor of s per axis.

    Each output pixel is the mean of its s x s block, thresholded at 0.5
    (ties round to 1).  With soft=True the fractional means are returned
    instead of the thresholded values.
    """
    label_hr = np.asarray(label_hr, dtype=np.float32)
    h, w = label_hr.shape
    if s <= 0 or h % s or w % s:
        raise ValueError(f"label grid {h}x{w} is not divisible by s={s}")
    means = label_hr.reshape(h // s, s, w // s, s).mean(axis=(1, 3))
    if soft:
        return means.astype(np.float32)
    return (means >= 0.5).astype(np.float32)


def _check_lr_alignment(hr_dim: int, lr_dim: int, s: int, axis: str) -> None:
    if abs(lr_dim - hr_dim / s) >= 1.0:
        raise AlignmentError(
            f"LR {axis} dimension {lr_dim} does not match HR {hr_dim} / s={s}"
        )


def tile_patches(
    scene_pre_hr: Raster,
    scene_pre_lr: Raster,
    scene_post_lr: Raster,
    label: np.ndarray,
    size: int = 256,
    s: int = 8,
    event_id: str = "scene",
) -> list[PatchSample]:
    """Cut a co-registered scene into non-overlapping size x size patches.

    Tiles are emitted in row-major order; any residual border smaller
    than one tile is dropped.  The per-patch LR nodata fraction (union
    of the pre/post LR masks) is recorded for quality filtering.
    """
    if size % s:
        raise ValueError(f"patch size {size} must be divisible by s={s}")
    hr = scene_pre_hr.data
    lr_pre = scene_pre_lr.data
    lr_post = scene_post_lr.data
    label = np.asarray(label, dtype=np.float32)
    if label.shape != hr.shape[1:]:
        raise AlignmentError(
            f"label grid {label.shape} does not match HR grid {hr.shape[1:]}"
        )
    h, w = hr.shape[1:]
    for lr in (lr_pre, lr_post):
        _check_lr_alignment(h, lr.shape[1], s, "row")
        _check_lr_alignment(w, lr.shape[2], s, "col")

    n_rows, n_cols = h // size, w // size
    lr_size = size // s
    lr_bad = scene_pre_lr.nodata_mask | scene_post_lr.nodata_mask

    out = []
    for i in range(n_rows):
        for j in range(n_cols):
            r0, c0 = i * size, j * size
            lr0, lc0 = i * lr_size, j * lr_size
            lab = label[r0 : r0 + size, c0 : c0 + size]
            bad = lr_bad[lr0 : lr0 + lr_size, lc0 : lc0 + lr_size]
            out.append(
                PatchSample(
                    patch_id=f"{event_id}_{i:03d}_{j:03d}",
                    event_id=event_id,
                    hr_pre=hr[:, r0 : r0 + size, c0 : c0 + size],
                    lr_pre=lr_pre[:, lr0 : lr0 + lr_size, lc0 : lc0 + lr_size],
                    lr_post=lr_post[:, lr0 : lr0 + lr_size, lc0 : lc0 + lr_size],
                    label_hr=lab,
                    label_lr=downsample_label(lab, s),
                    is_positive=bool(lab.any()),
                    t1_date=scene_pre_hr.acquisition_date,
                    t2_date=scene_post_lr.acquisition_date,
                    lr_bad_fraction=float(bad.mean()),
                )
            )
    return out


@dataclass(frozen=True)
class QualityFlags:
    max_lr_bad_fraction: float = 0.05


def filter_patches(
    patches: list[PatchSample],
    event_areas_ha: Mapping[str, float],
    min_burn_area_ha: float = 25.0,
    quality: QualityFlags = QualityFlags(),
) -> list[PatchSample]:
    """Drop sub-threshold positives and low-quality patches.

    Positive patches are dropped when their parent event is smaller
    than min_burn_area_ha (smaller than a single LR pixel by default);
    any patch is dropped when its LR nodata/cloud fraction exceeds the
    quality ceiling.
    """
    kept = []
    for p in patches:
        if p.lr_bad_fraction > quality.max_lr_bad_fraction:
            continue
        if p.is_positive:
            if p.event_id not in event_areas_ha:
                raise KeyError(f"no burnt area recorded for event {p.event_id}")
            if event_areas_ha[p.event_id] < min_burn_area_ha:
                continue
        kept.append(p)
    return kept


def sample_negatives(
    patches: list[PatchSample], ratio: float = 1.0, seed: int = 0
) -> list[PatchSample]:
    """Keep all positives plus a seeded draw of negatives.

    round(ratio * n_positive) negatives are drawn without replacement
    (all of them when fewer exist); output preserves input order.
    """
    if ratio <= 0:
        raise ValueError("ratio must be > 0")
    pos_idx = [i for i, p in enumerate(patches) if p.is_positive]
    neg_idx = [i for i, p in enumerate(patches) if not p.is_positive]
    n_keep = min(len(neg_idx), int(round(ratio * len(pos_idx))))
    rng = np.random.default_rng(seed)
    chosen = set(rng.choice(len(neg_idx), size=n_keep, replace=False).tolist()) if n_keep else set()
    keep = set(pos_idx) | {neg_idx[k] for k in chosen}
    return [p for i, p in enumerate(patches) if i in keep]


def hflip_sample(sample: PatchSample) -> PatchSample:
    """Exact horizontal (left-right) flip of every array in a sample."""
    return replace(
        sample,
        hr_pre=sample.hr_pre[:, :, ::-1].copy(),
        lr_pre=sample.lr_pre[:, :, ::-1].copy(),
        lr_post=sample.lr_post[:, :, ::-1].copy(),
        label_hr=sample.label_hr[:, ::-1].copy(),
        label_lr=sample.label_lr[:, ::-1].copy(),
    )


def vflip_sample(sample: PatchSample) -> PatchSample:
    """Exact vertical (up-down) flip of every array in a sample."""
    return replace(
        sample,
        hr_pre=sample.hr_pre[:, ::-1, :].copy(),
        lr_pre=sample.lr_pre[:, ::-1, :].copy(),
        lr_post=sample.lr_post[:, ::-1, :].copy(),
        label_hr=sample.label_hr[::-1, :].copy(),
        label_lr=sample.label_lr[::-1, :].copy(),
    )
