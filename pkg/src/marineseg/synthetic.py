"""Desk-scale synthetic dataset: spectrally-separable class blobs on a water background.

Each patch is a Water-background tile with one elliptical blob per anomaly
class. Every class has a fixed 11-band mean signature; bands get additive
Gaussian noise. Only ``label_fraction`` of each blob's pixels (and of the
background) are labeled, the rest are -1, mimicking weak labeling. A placement
log with blob extents and exact labeled counts is persisted for oracle tests.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .data import GROUPED_CLASS_NAMES, NUM_BANDS, save_patch

NOISE_SIGMA = 0.05
WATER = GROUPED_CLASS_NAMES.index("Water")


def class_signatures(num_classes: int = len(GROUPED_CLASS_NAMES)) -> np.ndarray:
    """Fixed per-class 11-band mean reflectances, separable but overlapping in
    some bands so the segmentation task is learnable rather than trivial."""
    sig = np.zeros((num_classes, NUM_BANDS), dtype=np.float64)
    for c in range(num_classes):
        for b in range(NUM_BANDS):
            sig[c, b] = 0.15 + 0.7 * (((c + 2) * (b + 3)) % 7) / 6.0
    return sig


def _ellipse_mask(h, w, cy, cx, ry, rx):
    ys, xs = np.ogrid[:h, :w]
    return ((ys - cy) / ry) ** 2 + ((xs - cx) / rx) ** 2 <= 1.0


def generate_synthetic_dataset(root, n_patches: int, size=(64, 64),
                               label_fraction: float = 0.5, seed: int = 0,
                               n_val: int = 0, n_test: int = 0) -> dict:
    """Write a dataset under ``root`` and return the placement log.

    Patches are named ``synth_###``; the first ``n_patches`` form the training
    split, followed by optional val/test patches under the same layout.
    """
    if n_patches < 1:
        raise ValueError("n_patches must be >= 1")
    if not 0.0 < label_fraction <= 1.0:
        raise ValueError("label_fraction must be in (0, 1]")
    root = Path(root)
    rng = np.random.default_rng(seed)
    h, w = size
    sig = class_signatures()
    anomaly_classes = [c for c in range(len(GROUPED_CLASS_NAMES)) if c != WATER]

    total = n_patches + n_val + n_test
    ids = [f"synth_{i:03d}" for i in range(total)]
    log = {"seed": seed, "size": [h, w], "label_fraction": label_fraction,
           "patches": {}}

    for pid in ids:
        labels_true = np.full((h, w), WATER, dtype=np.int16)
        blobs = []
        for c in anomaly_classes:
            ry = rng.uniform(0.08, 0.18) * h
            rx = rng.uniform(0.08, 0.18) * w
            cy = rng.uniform(ry, h - ry)
            cx = rng.uniform(rx, w - rx)
            labels_true[_ellipse_mask(h, w, cy, cx, ry, rx)] = c
            blobs.append({"class": GROUPED_CLASS_NAMES[c],
                          "center": [float(cy), float(cx)],
                          "radii": [float(ry), float(rx)]})

        bands = sig[labels_true].transpose(2, 0, 1)
        bands = bands + rng.normal(0.0, NOISE_SIGMA, size=(NUM_BANDS, h, w))

        # weak labeling: keep label_fraction of each class's pixels, rest -1
        labels = np.full((h, w), -1, dtype=np.int16)
        labeled_counts = {}
        for c in range(len(GROUPED_CLASS_NAMES)):
            idx = np.flatnonzero(labels_true.ravel() == c)
            if idx.size == 0:
                continue
            keep = int(round(label_fraction * idx.size))
            if label_fraction == 1.0:
                keep = idx.size
            chosen = rng.choice(idx, size=keep, replace=False) if keep < idx.size else idx
            labels.ravel()[chosen] = c
            labeled_counts[GROUPED_CLASS_NAMES[c]] = int(keep)

        save_patch(root, pid, bands.astype(np.float32), labels)
        log["patches"][pid] = {"blobs": blobs, "labeled_counts": labeled_counts}

    (root / "label_names.json").write_text(
        json.dumps({"label_names": list(GROUPED_CLASS_NAMES)}, indent=2) + "\n"
    )
    (root / "splits.json").write_text(json.dumps({
        "train": ids[:n_patches],
        "val": ids[n_patches:n_patches + n_val],
        "test": ids[n_patches + n_val:],
    }, indent=2) + "\n")
    (root / "placement_log.json").write_text(json.dumps(log, indent=2) + "\n")
    return log
