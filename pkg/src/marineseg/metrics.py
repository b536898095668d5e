"""Confusion-matrix accumulation, IoU/mIoU/pixel-accuracy, and the
score-difference variance used to rank classes for visual inspection."""

from __future__ import annotations

import numpy as np

from .errors import (
    AllUndefinedError,
    DegenerateInputError,
    EmptyMatrixError,
    ShapeMismatchError,
)


class ConfusionMatrix:
    """C x C pixel counts; rows are ground truth, columns are predictions.
    Ground-truth pixels labeled -1 are never counted."""

    def __init__(self, num_classes: int, counts: np.ndarray | None = None):
        self.num_classes = num_classes
        if counts is None:
            counts = np.zeros((num_classes, num_classes), dtype=np.int64)
        counts = np.asarray(counts, dtype=np.int64)
        if counts.shape != (num_classes, num_classes):
            raise ShapeMismatchError(f"counts must be {num_classes}x{num_classes}")
        if (counts < 0).any():
            raise ValueError("counts must be non-negative")
        self.counts = counts

    def accumulate(self, pred, truth) -> "ConfusionMatrix":
        pred = np.asarray(pred)
        truth = np.asarray(truth)
        if pred.shape != truth.shape:
            raise ShapeMismatchError(
                f"prediction shape {pred.shape} != truth shape {truth.shape}")
        keep = truth >= 0
        t = truth[keep].astype(np.int64)
        p = pred[keep].astype(np.int64)
        flat = np.bincount(t * self.num_classes + p,
                           minlength=self.num_classes ** 2)
        self.counts += flat.reshape(self.num_classes, self.num_classes)
        return self

    def merge(self, other: "ConfusionMatrix") -> "ConfusionMatrix":
        return ConfusionMatrix(self.num_classes, self.counts + other.counts)

    def copy(self) -> "ConfusionMatrix":
        return ConfusionMatrix(self.num_classes, self.counts.copy())


def pixel_accuracy(cm: ConfusionMatrix) -> float:
    total = cm.counts.sum()
    if total == 0:
        raise EmptyMatrixError("confusion matrix holds no counts")
    return float(np.trace(cm.counts) / total)


def iou_per_class(cm: ConfusionMatrix) -> np.ndarray:
    """TP / (TP + FP + FN) per class; NaN where the union is empty."""
    tp = np.diag(cm.counts).astype(np.float64)
    union = cm.counts.sum(axis=0) + cm.counts.sum(axis=1) - np.diag(cm.counts)
    out = np.full(cm.num_classes, np.nan)
    defined = union > 0
    out[defined] = tp[defined] / union[defined]
    return out


def miou(ious) -> float:
    """Mean over the defined (non-NaN) per-class IoUs."""
    ious = np.asarray(ious, dtype=np.float64)
    defined = ~np.isnan(ious)
    if not defined.any():
        raise AllUndefinedError("every class IoU is undefined")
    return float(ious[defined].mean())


def score_difference_variance(row) -> float:
    """Zero-mean variance of signed score differences: sum(x^2) / (n - 1)."""
    row = np.asarray(row, dtype=np.float64)
    if row.size < 2:
        raise DegenerateInputError("need at least 2 differences")
    return float((row ** 2).sum() / (row.size - 1))


def format_confusion_table(cm: ConfusionMatrix, class_names) -> str:
    """Plain-text table: truth rows, prediction columns, Sum(gt)/Sum(pred)
    margins and a per-class IoU row."""
    names = list(class_names)
    ious = iou_per_class(cm)
    widths = [max(14, len(n) + 2) for n in names]
    head = "Class".ljust(24) + "".join(n.rjust(w) for n, w in zip(names, widths))
    head += "Sum (gt)".rjust(14)
    lines = [head]
    for i, name in enumerate(names):
        row = name.ljust(24)
        row += "".join(str(int(cm.counts[i, j])).rjust(w) for j, w in enumerate(widths))
        row += str(int(cm.counts[i].sum())).rjust(14)
        lines.append(row)
    pred_row = "Sum (pred)".ljust(24)
    pred_row += "".join(str(int(cm.counts[:, j].sum())).rjust(w)
                        for j, w in enumerate(widths))
    lines.append(pred_row)
    iou_row = "IoU".ljust(24)
    iou_row += "".join(("-" if np.isnan(v) else f"{v:.2f}").rjust(w)
                       for v, w in zip(ious, widths))
    lines.append(iou_row)
    return "\n".join(lines) + "\n"
