"""Microscopy image-to-image pipeline framework.

N-dimensional image handling, intensity and stain normalization, dataset
pairing/caching/sampling, gaussian-blended sliding-window inference over
pluggable executors, and evaluation metrics. See README.md for the CLI.
"""

from .cache import BuildStats, CacheIndex, build_cache, content_key
from .dataset import Manifest, SampleRecord, discover_pairs, split
from .executors import ExecutorSpec, execute, make_executor
from .external import ExecutorSession, external_infer, external_spawn
from .formats import read_image, read_ndt, read_tiff_2d, write_ndt
from .metrics import MetricReport, dice_f1, evaluate_set, iou, pearson, ssim
from .ndimage import NDImage, ROI, crop, ensure_axes, pad
from .normalization import NormSpec, center_norm, percentile_norm, standard_norm
from .sampling import PatchPair, epoch_subset, sample_patch
from .stain import StainParams, macenko_fit, macenko_normalize
from .tiling import (
    ImportanceMap,
    TilingPlan,
    gaussian_importance,
    plan_windows,
    run_over_outer_axes,
    run_sliding,
)

__version__ = "0.1.0"

__all__ = [
    "BuildStats",
    "CacheIndex",
    "ExecutorSession",
    "ExecutorSpec",
    "ImportanceMap",
    "Manifest",
    "MetricReport",
    "NDImage",
    "NormSpec",
    "PatchPair",
    "ROI",
    "SampleRecord",
    "StainParams",
    "TilingPlan",
    "build_cache",
    "center_norm",
    "content_key",
    "crop",
    "dice_f1",
    "discover_pairs",
    "ensure_axes",
    "epoch_subset",
    "evaluate_set",
    "execute",
    "external_infer",
    "external_spawn",
    "gaussian_importance",
    "iou",
    "macenko_fit",
    "macenko_normalize",
    "make_executor",
    "pad",
    "pearson",
    "percentile_norm",
    "plan_windows",
    "read_image",
    "read_ndt",
    "read_tiff_2d",
    "run_over_outer_axes",
    "run_sliding",
    "sample_patch",
    "split",
    "ssim",
    "standard_norm",
    "write_ndt",
]
