"""Synthetic bitemporal multi-resolution scenes with exact ground truth.

Real burn scars lack strict borders, so masks are grown from thresholded
smooth random fields (Gaussian bumps plus low-frequency noise) rather
than geometric shapes.  The post-fire image applies a severity-scaled
spectral signature inside the mask: NIR drops while Red and SWIR rise,
matching the spectral behavior of charred vegetation.  Low-resolution
imagery is derived from the high-resolution scene by exact block
averaging, which makes the cross-resolution relationships of a sample
verifiable by construction.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, replace

import numpy as np
from scipy.ndimage import gaussian_filter

from .bands import MODIS_BANDS, S2_BANDS
from .errors import GenerationError
from .metrics import size_class
from .patches import PatchSample, downsample_label

SIZE_TARGETS = ("small", "medium", "large", "none")

# LR band -> HR channel indices (standard 13-band order) whose block
# means are averaged.  Rows follow the shared-row pairing; the LR NIR
# band averages both HR NIR bands.  The two LR bands without a shared-row
# partner (B05, B06) fall back to the spectrally closest HR bands so the
# synthetic LR stack still has the full 7 channels.
DEFAULT_LR_BAND_MAP = (
    ("B01", (3,)),  # Red        <- B04
    ("B02", (7, 8)),  # NIR      <- B08, B8A
    ("B03", (1,)),  # Blue       <- B02
    ("B04", (2,)),  # Green      <- B03
    ("B05", (9, 11)),  # 1240 nm <- B09, B11
    ("B06", (11,)),  # 1640 nm   <- B11
    ("B07", (12,)),  # SWIR      <- B12
)

SYNTH_HR_BANDS = S2_BANDS
SYNTH_LR_BANDS = MODIS_BANDS

# Reflectance change at severity 1, chosen per wavelength bucket.
_NIR_DELTA = -0.25
_SWIR_DELTA = 0.18
_RED_DELTA = 0.12
_VIS_DELTA = 0.05


@dataclass
class SceneSpec:
    seed: int = 0
    hr_size: int = 256
    s: int = 8
    n_burns: int = 2
    size_class_target: str = "medium"
    severity_range: tuple[float, float] = (0.5, 1.0)
    noise_sigma: float = 0.01

    def __post_init__(self):
        if self.hr_size <= 0 or self.s <= 0 or self.hr_size % self.s:
            raise ValueError(f"hr_size {self.hr_size} must be divisible by s={self.s}")
        lo, hi = self.severity_range
        if not (0 <= lo <= hi <= 1):
            raise ValueError(f"severity_range {self.severity_range} not in [0, 1]")
        if self.size_class_target not in SIZE_TARGETS:
            raise ValueError(f"unknown size_class_target {self.size_class_target!r}")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")
        if self.n_burns < 1:
            raise ValueError("n_burns must be >= 1")


def _smooth_noise(rng, size: int, sigma: float) -> np.ndarray:
    field = gaussian_filter(rng.standard_normal((size, size)), sigma=sigma)
    std = field.std()
    return field / std if std > 0 else field


def _bump_field(rng, size: int, n_burns: int) -> np.ndarray:
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64)
    field = np.zeros((size, size))
    for _ in range(n_burns):
        cy, cx = rng.uniform(0.25 * size, 0.75 * size, size=2)
        sy, sx = rng.uniform(0.06 * size, 0.18 * size, size=2)
        theta = rng.uniform(0, np.pi)
        ct, st = np.cos(theta), np.sin(theta)
        u = (xx - cx) * ct + (yy - cy) * st
        v = -(xx - cx) * st + (yy - cy) * ct
        field += np.exp(-0.5 * ((u / sx) ** 2 + (v / sy) ** 2))
    return field


# Target burnt-area fractions per size class, kept inside the class
# boundaries (0.02 and 0.1 of the patch area) with a safety margin.
_FRACTION_RANGES = {
    "small": (0.005, 0.016),
    "medium": (0.03, 0.09),
    "large": (0.12, 0.30),
}


def gen_burn_mask(spec: SceneSpec, max_attempts: int = 100) -> np.ndarray:
    """Seeded smooth-blob burn mask in the requested size class."""
    size = spec.hr_size
    if spec.size_class_target == "none":
        return np.zeros((size, size), dtype=np.float32)
    rng = np.random.default_rng([spec.seed, 101])
    lo, hi = _FRACTION_RANGES[spec.size_class_target]
    for _ in range(max_attempts):
        field = _bump_field(rng, size, spec.n_burns)
        field += 0.4 * _smooth_noise(rng, size, sigma=size / 12)
        frac = rng.uniform(lo, hi)
        thr = np.quantile(field, 1.0 - frac)
        mask = (field > thr).astype(np.float32)
        n_pos = int(mask.sum())
        if n_pos > 0 and size_class(n_pos, size, size) == spec.size_class_target:
            return mask
    raise GenerationError(
        f"no {spec.size_class_target} mask found in {max_attempts} attempts "
        f"(seed {spec.seed}, size {size})"
    )


def _burn_delta_for_wavelength(wl_nm: float) -> float:
    if 750 <= wl_nm < 1350:
        return _NIR_DELTA
    if wl_nm >= 1350:
        return _SWIR_DELTA
    if 600 <= wl_nm < 750:
        return _RED_DELTA
    return _VIS_DELTA


def burn_signature(bands=SYNTH_HR_BANDS) -> np.ndarray:
    """Per-band reflectance delta applied at severity 1."""
    return np.array(
        [_burn_delta_for_wavelength(b.central_wavelength_nm) for b in bands],
        dtype=np.float32,
    )


def render_bitemporal(spec: SceneSpec, mask: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Render the pre-fire and post-fire high-resolution image pair.

    Both timestamps share one piecewise-smooth landcover scene and
    differ only by independent sensor noise outside the mask; inside it
    the post-fire image adds the severity-scaled burn signature.
    """
    size = spec.hr_size
    mask = np.asarray(mask, dtype=np.float32)
    if mask.shape != (size, size):
        raise ValueError(f"mask shape {mask.shape} does not match hr_size {size}")
    n_bands = len(SYNTH_HR_BANDS)
    rng = np.random.default_rng([spec.seed, 202])

    # Landcover classes from the argmax of smooth fields, one base
    # reflectance per class and band; NIR bands sit brighter.
    n_classes = 4
    class_fields = np.stack(
        [_smooth_noise(rng, size, sigma=size / 8) for _ in range(n_classes)]
    )
    landcover = class_fields.argmax(axis=0)
    base = rng.uniform(0.08, 0.40, size=(n_classes, n_bands)).astype(np.float32)
    nir = np.array(
        [750 <= b.central_wavelength_nm < 1350 for b in SYNTH_HR_BANDS]
    )
    base[:, nir] += 0.15

    clean = base[landcover].transpose(2, 0, 1).astype(np.float32)
    illum = 0.03 * _smooth_noise(rng, size, sigma=size / 6).astype(np.float32)
    clean = clean + illum[None]

    lo, hi = spec.severity_range
    sev01 = _smooth_noise(rng, size, sigma=size / 10)
    sev01 = (sev01 - sev01.min()) / max(np.ptp(sev01), 1e-12)
    severity = (lo + (hi - lo) * sev01).astype(np.float32) * mask

    delta = burn_signature()[:, None, None] * severity[None]

    noise_pre = rng.standard_normal(clean.shape).astype(np.float32) * spec.noise_sigma
    noise_post = rng.standard_normal(clean.shape).astype(np.float32) * spec.noise_sigma
    hr_pre = clean + noise_pre
    hr_post = clean + delta + noise_post
    return hr_pre.astype(np.float32), hr_post.astype(np.float32)


def _is_pow2(n: int) -> bool:
    return n > 0 and (n & (n - 1)) == 0


def block_mean(x: np.ndarray, s: int) -> np.ndarray:
    """Mean over non-overlapping s x s blocks of a (..., H, W) array.

    For power-of-two s the reduction is a balanced pairwise tree, which
    makes it exactly equivariant under horizontal/vertical flips.
    """
    h, w = x.shape[-2:]
    if s <= 0 or h % s or w % s:
        raise ValueError(f"grid {h}x{w} is not divisible by s={s}")
    if _is_pow2(s):
        y = x.astype(np.float32)
        k = s
        while k > 1:
            y = y[..., 0::2, :] + y[..., 1::2, :]
            y = y[..., :, 0::2] + y[..., :, 1::2]
            k //= 2
        return (y / (s * s)).astype(np.float32)
    shape = x.shape[:-2] + (h // s, s, w // s, s)
    return x.reshape(shape).mean(axis=(-3, -1)).astype(np.float32)


def degrade_to_lr(
    hr_image: np.ndarray,
    s: int,
    band_map=DEFAULT_LR_BAND_MAP,
    noise_sigma: float = 0.0,
    rng: np.random.Generator | None = None,
    psf_sigma: float = 0.0,
) -> np.ndarray:
    """Derive the low-resolution stack from a high-resolution image.

    Each LR band is the s x s block mean of its mapped HR band(s); bands
    mapped to several HR channels average their block means.  An
    optional Gaussian PSF can blur before aggregation (off by default so
    the kernel stays exactly invertible for tests), and seeded additive
    sensor noise is applied last.
    """
    hr_image = np.asarray(hr_image, dtype=np.float32)
    if hr_image.ndim != 3:
        raise ValueError(f"hr_image must be (C, H, W), got {hr_image.shape}")
    src = hr_image
    if psf_sigma > 0:
        src = gaussian_filter(src, sigma=(0, psf_sigma, psf_sigma))
    blocks = block_mean(src, s)
    out = np.stack(
        [blocks[list(idx)].mean(axis=0) for _, idx in band_map]
    ).astype(np.float32)
    if noise_sigma > 0:
        if rng is None:
            raise ValueError("noise_sigma > 0 requires an rng")
        out = out + rng.standard_normal(out.shape).astype(np.float32) * noise_sigma
    return out


def _child_seed(seed: int, index: int) -> int:
    return int(np.random.SeedSequence(entropy=seed, spawn_key=(index,)).generate_state(1)[0])


def make_dataset(
    n_pos: int,
    n_neg: int,
    spec_template: SceneSpec = SceneSpec(),
    seed: int = 0,
) -> tuple[list[PatchSample], list[SceneSpec]]:
    """Generate a synthetic patch set plus the per-sample scene specs.

    Every sample gets its own derived seed and synthetic event id; the
    low-resolution labels are re-derived from the masks with the same
    rule used for real data, so the cross-resolution label invariant
    holds by construction.
    """
    if n_pos < 0 or n_neg < 0:
        raise ValueError("n_pos and n_neg must be >= 0")
    samples = []
    specs = []
    lr_noise = 0.5 * spec_template.noise_sigma
    for i in range(n_pos + n_neg):
        target = spec_template.size_class_target if i < n_pos else "none"
        spec = replace(spec_template, seed=_child_seed(seed, i), size_class_target=target)
        specs.append(spec)
        mask = gen_burn_mask(spec)
        hr_pre, hr_post = render_bitemporal(spec, mask)
        rng_lr = np.random.default_rng([spec.seed, 303])
        lr_pre = degrade_to_lr(hr_pre, spec.s, noise_sigma=lr_noise, rng=rng_lr)
        lr_post = degrade_to_lr(hr_post, spec.s, noise_sigma=lr_noise, rng=rng_lr)
        samples.append(
            PatchSample(
                patch_id=f"synth-p{i:04d}",
                event_id=f"synth-ev{i:04d}",
                hr_pre=hr_pre,
                lr_pre=lr_pre,
                lr_post=lr_post,
                label_hr=mask,
                label_lr=downsample_label(mask, spec.s),
                is_positive=bool(mask.any()),
                t1_date="2021-07-10",
                t2_date="2021-08-09",
            )
        )
    return samples, specs


def spec_provenance(specs: list[SceneSpec]) -> list[dict]:
    """JSON-ready record of every scene spec used in a dataset."""
    return [asdict(s) for s in specs]
