"""Error overlays and ratio-distribution plots.

Overlays paint prediction errors over a NIR-Red-Green composite of the
pre-fire image: false negatives red, false positives green, true
positives white, true negatives left showing the background.  The
background is stretched into 1..254 so the pure overlay colors can be
counted back out of the image exactly.
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np
from PIL import Image

FN_COLOR = (255, 0, 0)
FP_COLOR = (0, 255, 0)
TP_COLOR = (255, 255, 255)

# Composite wavelengths (nm) to look up in the band list.
_COMPOSITE_TARGETS = (842.0, 665.0, 560.0)  # NIR, Red, Green


def composite_indices(bands) -> tuple[int, int, int]:
    """Channel indices nearest the NIR/Red/Green composite wavelengths."""
    wls = [b.central_wavelength_nm for b in bands]
    return tuple(
        int(np.argmin([abs(w - t) for w in wls])) for t in _COMPOSITE_TARGETS
    )


def _stretch(band: np.ndarray) -> np.ndarray:
    lo, hi = np.percentile(band, (2.0, 98.0))
    if hi <= lo:
        return np.full(band.shape, 128, dtype=np.uint8)
    scaled = np.clip((band - lo) / (hi - lo), 0.0, 1.0)
    return (1 + scaled * 253).astype(np.uint8)  # 1..254, pure colors stay unique


def render_overlay(
    hr_image: np.ndarray | None,
    pred: np.ndarray,
    label: np.ndarray,
    path,
    bands=None,
    band_indices: tuple[int, int, int] | None = None,
) -> None:
    """Write the error overlay PNG for one patch."""
    pred = np.asarray(pred).astype(bool)
    label = np.asarray(label).astype(bool)
    if pred.shape != label.shape:
        raise ValueError(f"shape mismatch {pred.shape} vs {label.shape}")
    h, w = pred.shape

    rgba = np.zeros((h, w, 4), dtype=np.uint8)
    if hr_image is not None:
        hr_image = np.asarray(hr_image)
        if hr_image.shape[1:] != (h, w):
            raise ValueError(
                f"hr_image grid {hr_image.shape[1:]} does not match masks {(h, w)}"
            )
        if band_indices is None:
            if bands is not None:
                band_indices = composite_indices(bands)
            else:
                c = hr_image.shape[0]
                band_indices = (min(7, c - 1), min(3, c - 1), min(2, c - 1))
        for ch, idx in enumerate(band_indices):
            rgba[..., ch] = _stretch(hr_image[idx])
        rgba[..., 3] = 255

    fn = label & ~pred
    fp = pred & ~label
    tp = pred & label
    for mask, color in ((fn, FN_COLOR), (fp, FP_COLOR), (tp, TP_COLOR)):
        rgba[mask, 0] = color[0]
        rgba[mask, 1] = color[1]
        rgba[mask, 2] = color[2]
        rgba[mask, 3] = 255

    Image.fromarray(rgba, mode="RGBA").save(Path(path))


def write_ratio_csv(per_event_ratios, path) -> None:
    """CSV of (event_id, fp_ratio, fn_ratio); undefined values left empty."""
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["event_id", "fp_ratio", "fn_ratio"])
        for event_id, fp_ratio, fn_ratio in per_event_ratios:
            writer.writerow(
                [
                    event_id,
                    "" if fp_ratio is None else f"{fp_ratio:.6g}",
                    "" if fn_ratio is None else f"{fn_ratio:.6g}",
                ]
            )


def plot_ratio_histograms(per_event_ratios, path, bins: int = 20) -> None:
    """Histogram of the per-event FP and FN ratio distributions."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fp_vals = [r[1] for r in per_event_ratios if r[1] is not None]
    fn_vals = [r[2] for r in per_event_ratios if r[2] is not None]
    fig, axes = plt.subplots(1, 2, figsize=(9, 3.5))
    for ax, vals, title in (
        (axes[0], fp_vals, "false positive ratio"),
        (axes[1], fn_vals, "false negative ratio"),
    ):
        if vals:
            ax.hist(vals, bins=bins, color="#c44", edgecolor="black", linewidth=0.4)
        ax.set_xlabel(title)
        ax.set_ylabel("events")
    fig.tight_layout()
    fig.savefig(Path(path), dpi=120)
    plt.close(fig)
