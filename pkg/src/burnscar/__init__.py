"""Burn scar mapping from multi-resolution bitemporal satellite imagery.

The pipeline pairs a high-resolution pre-fire image with a bitemporal
low-resolution pair, trains a two-branch change-detection network with
an auxiliary low-resolution head, and evaluates with size-stratified
IoU and event-retrieval metrics.  A synthetic scene generator provides
exact ground truth for desk-scale verification.
"""

from .archive import read_archive, write_archive
from .augment import AugmentationConfig, augment
from .bands import MODIS_BANDS, S2_BANDS, BandSpec
from .errors import (
    AlignmentError,
    BurnscarError,
    CompatibilityError,
    GenerationError,
    GradCheckError,
    IntegrityError,
    SchemaError,
    TrainingError,
)
from .evaluation import evaluate_checkpoint, evaluate_model
from .gradcheck import grad_check
from .losses import bce, compound_loss
from .metrics import (
    ConfusionCounts,
    MetricsReport,
    confusion,
    events_detected,
    fp_fn_ratios,
    multiscale_iou,
    prf_iou,
    size_class,
)
from .model import (
    CoarseChangeNet,
    FusionUNet,
    ModelConfig,
    ModelOutputs,
    MultiResChangeNet,
    build_model,
    count_params,
    init_weights,
    predict,
)
from .patches import (
    PatchSample,
    QualityFlags,
    downsample_label,
    filter_patches,
    sample_negatives,
    tile_patches,
)
from .raster import Raster, align_common_bands, read_geotiff, resample_nearest, write_geotiff
from .splits import EventRecord, SplitManifest, split_by_event
from .synth import SceneSpec, degrade_to_lr, gen_burn_mask, make_dataset, render_bitemporal
from .train import TrainConfig, linear_lr, train

__version__ = "0.1.0"

__all__ = [
    "AlignmentError",
    "AugmentationConfig",
    "BandSpec",
    "BurnscarError",
    "CoarseChangeNet",
    "CompatibilityError",
    "ConfusionCounts",
    "EventRecord",
    "FusionUNet",
    "GenerationError",
    "GradCheckError",
    "IntegrityError",
    "MetricsReport",
    "ModelConfig",
    "ModelOutputs",
    "MultiResChangeNet",
    "MODIS_BANDS",
    "PatchSample",
    "QualityFlags",
    "Raster",
    "S2_BANDS",
    "SceneSpec",
    "SchemaError",
    "SplitManifest",
    "TrainConfig",
    "TrainingError",
    "align_common_bands",
    "augment",
    "bce",
    "build_model",
    "compound_loss",
    "confusion",
    "count_params",
    "degrade_to_lr",
    "downsample_label",
    "evaluate_checkpoint",
    "evaluate_model",
    "events_detected",
    "filter_patches",
    "fp_fn_ratios",
    "gen_burn_mask",
    "grad_check",
    "init_weights",
    "linear_lr",
    "make_dataset",
    "multiscale_iou",
    "predict",
    "prf_iou",
    "read_archive",
    "read_geotiff",
    "render_bitemporal",
    "resample_nearest",
    "sample_negatives",
    "size_class",
    "split_by_event",
    "tile_patches",
    "train",
    "write_archive",
    "write_geotiff",
]
