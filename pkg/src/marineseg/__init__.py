"""Semi-supervised semantic segmentation of weakly-labeled multispectral imagery."""

from .data import (
    GROUPED_CLASS_NAMES,
    UNLABELED,
    BandStats,
    ClassScheme,
    MultispectralPatch,
    SegmentationMap,
    class_pixel_stats,
    filter_nan_patches,
    load_patch,
)
from .losses import LossConfig, supervised_loss, total_loss, unsupervised_loss
from .metrics import ConfusionMatrix, iou_per_class, miou, pixel_accuracy
from .splits import SplitAssignment, two_training_sets_split
from .synthetic import generate_synthetic_dataset
from .trainer import TrainConfig, train_fixmatch, train_supervised
from .unet import UNet, UNetConfig, budget_report

__all__ = [
    "GROUPED_CLASS_NAMES",
    "UNLABELED",
    "BandStats",
    "ClassScheme",
    "ConfusionMatrix",
    "LossConfig",
    "MultispectralPatch",
    "SegmentationMap",
    "SplitAssignment",
    "TrainConfig",
    "UNet",
    "UNetConfig",
    "budget_report",
    "class_pixel_stats",
    "filter_nan_patches",
    "generate_synthetic_dataset",
    "iou_per_class",
    "load_patch",
    "miou",
    "pixel_accuracy",
    "supervised_loss",
    "total_loss",
    "train_fixmatch",
    "train_supervised",
    "two_training_sets_split",
    "unsupervised_loss",
]
