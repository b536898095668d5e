"""Loss family: cross entropy, focal loss, and the two-branch training loss.

The supervised branch averages a focal penalty over exactly the labeled pixels
of a batch. The unsupervised branch turns confident predictions on weakly
augmented views into pseudo-labels, replays the geometric part of the strong
plan onto them, and averages plain cross entropy over the retained pixels
(confidence >= threshold, not padding, not removed by Cutout). The total is
supervised + lambda * unsupervised.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import torch

from .augment import AugmentationPlan, CutoutSpec, apply_geometric_only
from .errors import NoLabeledPixelError

P_MIN = 1e-8  # probabilities are clamped to [P_MIN, 1] inside logs


@dataclass(frozen=True)
class LossConfig:
    alphas: tuple[float, ...] = (1.0, 1.0, 1.0, 1.0, 1.0)
    gamma: float = 2.0
    lambda_coeff: float = 1.0
    threshold: float = 0.9

    def __post_init__(self):
        if self.gamma < 0:
            raise ValueError("gamma must be >= 0")
        if self.lambda_coeff < 0:
            raise ValueError("lambda_coeff must be >= 0")


@dataclass(frozen=True)
class PredictionMap:
    """Per-pixel class distributions, shape (C, H, W)."""

    probs: np.ndarray

    def __post_init__(self):
        if self.probs.ndim != 3:
            raise ValueError("probs must have shape (C, H, W)")
        if (self.probs < 0).any():
            raise ValueError("probabilities must be non-negative")
        sums = self.probs.sum(axis=0)
        if not np.allclose(sums, 1.0, atol=1e-5):
            raise ValueError("per-pixel probabilities must sum to 1")


@dataclass(frozen=True)
class PseudoLabelMap:
    """Argmax classes and their confidences for one prediction map."""

    classes: np.ndarray
    confidence: np.ndarray

    @classmethod
    def from_prediction(cls, probs) -> "PseudoLabelMap":
        arr = probs.probs if isinstance(probs, PredictionMap) else np.asarray(probs)
        # np.argmax breaks ties toward the lowest class index
        return cls(classes=arr.argmax(axis=0).astype(np.int16),
                   confidence=arr.max(axis=0))


def cross_entropy_pixel(pred, target) -> float:
    """CE between a predicted distribution and a one-hot (or index) target."""
    pred = np.asarray(pred, dtype=np.float64)
    if np.ndim(target) == 0:
        t = np.zeros_like(pred)
        t[int(target)] = 1.0
    else:
        t = np.asarray(target, dtype=np.float64)
    return float(-(t * np.log(np.clip(pred, P_MIN, 1.0))).sum())


def focal_pixel(pred_true_prob: float, class_index: int, cfg: LossConfig) -> float:
    """-alpha_t * (1 - p_t)^gamma * log(p_t); gamma=0 recovers weighted CE."""
    p = min(max(pred_true_prob, P_MIN), 1.0)
    alpha = cfg.alphas[class_index]
    return float(-alpha * (1.0 - p) ** cfg.gamma * math.log(p))


def _as_tensor(x, dtype=None):
    if isinstance(x, torch.Tensor):
        return x if dtype is None else x.to(dtype)
    return torch.as_tensor(np.asarray(x), dtype=dtype)


def supervised_loss(probs, labels, cfg: LossConfig) -> torch.Tensor:
    """Mean focal loss over the labeled pixels of a batch.

    probs: (B, C, H, W) per-pixel distributions; labels: (B, H, W) with -1 for
    unlabeled. The denominator is the number of labeled pixels. Raises
    NoLabeledPixelError when the batch carries no label at all.
    """
    probs = _as_tensor(probs)
    labels = _as_tensor(labels, dtype=torch.long).to(probs.device)
    labeled = labels >= 0
    n = int(labeled.sum())
    if n == 0:
        raise NoLabeledPixelError("batch contains no labeled pixel")
    safe = labels.clamp(min=0)
    p_t = probs.gather(1, safe.unsqueeze(1)).squeeze(1)[labeled]
    alphas = torch.as_tensor(cfg.alphas, dtype=probs.dtype, device=probs.device)
    a_t = alphas[labels[labeled]]
    log_p = torch.log(p_t.clamp(min=P_MIN, max=1.0))
    return (-a_t * (1.0 - p_t) ** cfg.gamma * log_p).sum() / n


def unsupervised_loss(weak_probs, strong_probs, geo_plan: AugmentationPlan | None,
                      validity, cutouts, cfg: LossConfig):
    """Thresholded pseudo-label consistency loss.

    weak_probs: (B, C, H, W) predictions on the weakly-augmented views, in
    pre-strong-augmentation coordinates; replayed here through the geometric
    part of ``geo_plan``. strong_probs: (B, C, H, W) predictions on the
    strongly-augmented views. ``validity`` (B, H, W) flags padding introduced
    by the strong augmentation; ``cutouts`` is one CutoutSpec per image or
    None. Returns (loss, retained_count); an empty retention set yields
    (0, 0), which is legitimate early in training with a high threshold.
    """
    strong_probs = _as_tensor(strong_probs)
    weak_np = (weak_probs.detach().cpu().numpy()
               if isinstance(weak_probs, torch.Tensor) else np.asarray(weak_probs))
    b, c, h, w = weak_np.shape

    pseudo = np.empty((b, h, w), dtype=np.int64)
    conf = np.empty((b, h, w), dtype=np.float64)
    replay_ok = np.empty((b, h, w), dtype=bool)
    for i in range(b):
        moved = weak_np[i]
        mask = np.ones((h, w), dtype=bool)
        if geo_plan is not None:
            moved, mask = apply_geometric_only(geo_plan, moved, mask)
        pseudo[i] = moved.argmax(axis=0)
        conf[i] = moved.max(axis=0)
        replay_ok[i] = mask

    retained = (conf >= cfg.threshold) & replay_ok
    if validity is not None:
        retained &= np.asarray(validity, dtype=bool)
    if cutouts is not None:
        for i, spec in enumerate(cutouts):
            if isinstance(spec, CutoutSpec):
                retained[i] &= ~spec.covered_mask()

    count = int(retained.sum())
    if count == 0:
        return strong_probs.sum() * 0.0, 0

    keep = torch.as_tensor(retained, device=strong_probs.device)
    target = torch.as_tensor(pseudo, device=strong_probs.device)
    p = strong_probs.gather(1, target.unsqueeze(1)).squeeze(1)[keep]
    loss = -torch.log(p.clamp(min=P_MIN, max=1.0)).sum() / count
    return loss, count


def total_loss(sup, unsup, cfg: LossConfig):
    return sup + cfg.lambda_coeff * unsup
