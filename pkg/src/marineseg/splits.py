"""Two-training-sets protocol: image-level split into labeled and unlabeled subsets.

The labeled subset must hold, for every class, a share of that class's labeled
training pixels inside [m-5, m+5] percentage points of the target m. The search
is rejection sampling over shuffled image prefixes.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .data import ClassScheme, SegmentationMap
from .errors import InfeasibleSplitError

TOLERANCE_POINTS = 5.0
MAX_ATTEMPTS_PER_LENGTH = 10_000


@dataclass(frozen=True)
class SplitAssignment:
    labeled_ids: frozenset
    unlabeled_ids: frozenset
    target_fraction: float  # m, in percent
    seed: int
    per_class_fraction: dict[str, float]  # achieved share per class, percent

    def to_manifest(self) -> str:
        payload = {
            "labeled_ids": sorted(self.labeled_ids),
            "unlabeled_ids": sorted(self.unlabeled_ids),
            "m": self.target_fraction,
            "seed": self.seed,
            "per_class_fraction": {k: self.per_class_fraction[k]
                                   for k in sorted(self.per_class_fraction)},
        }
        return json.dumps(payload, indent=2) + "\n"

    @classmethod
    def from_manifest(cls, text: str) -> "SplitAssignment":
        d = json.loads(text)
        return cls(
            labeled_ids=frozenset(d["labeled_ids"]),
            unlabeled_ids=frozenset(d["unlabeled_ids"]),
            target_fraction=d["m"],
            seed=d["seed"],
            per_class_fraction=d["per_class_fraction"],
        )


def save_manifest(path, split: SplitAssignment) -> None:
    Path(path).write_text(split.to_manifest())


def load_manifest(path) -> SplitAssignment:
    return SplitAssignment.from_manifest(Path(path).read_text())


def _per_patch_class_counts(train_ids, maps, num_classes: int) -> np.ndarray:
    counts = np.zeros((len(train_ids), num_classes), dtype=np.int64)
    for row, pid in enumerate(train_ids):
        m = maps[pid]
        labels = m.labels if isinstance(m, SegmentationMap) else np.asarray(m)
        valid = labels[labels >= 0]
        counts[row] = np.bincount(valid, minlength=num_classes)[:num_classes]
    return counts


def two_training_sets_split(train_ids, maps, m: float, seed: int,
                            scheme: ClassScheme | None = None) -> SplitAssignment:
    """Randomized image-level split with the per-class pixel-share constraint.

    Shuffle the ids, take a prefix of ceil(m% * N) images, and accept it when
    every class's labeled-pixel share lies in [m-5, m+5] points. After 10,000
    rejected shuffles the prefix length is nudged by one image in either
    direction; if that fails too, the nearest-miss fractions are reported in
    an InfeasibleSplitError.
    """
    scheme = scheme or ClassScheme()
    train_ids = list(train_ids)
    n = len(train_ids)
    if n == 0:
        raise InfeasibleSplitError("empty training set")
    counts = _per_patch_class_counts(train_ids, maps, scheme.num_classes)
    totals = counts.sum(axis=0)
    active = totals > 0  # classes absent from the training set are unconstrained

    rng = np.random.default_rng(seed)
    k0 = int(np.ceil(m / 100.0 * n))
    k0 = min(max(k0, 1), n)

    lo, hi = m - TOLERANCE_POINTS, m + TOLERANCE_POINTS
    best_violation = np.inf
    best_fractions: dict[str, float] = {}

    for k in _candidate_lengths(k0, n):
        for _ in range(MAX_ATTEMPTS_PER_LENGTH):
            perm = rng.permutation(n)
            picked = counts[perm[:k]].sum(axis=0)
            with np.errstate(invalid="ignore"):
                frac = np.where(active, 100.0 * picked / np.maximum(totals, 1), m)
            violation = np.max(np.maximum(lo - frac, frac - hi))
            if violation <= 0:
                labeled = [train_ids[i] for i in perm[:k]]
                unlabeled = [train_ids[i] for i in perm[k:]]
                achieved = {
                    scheme.class_names[c]: float(frac[c])
                    for c in range(scheme.num_classes)
                    if active[c]
                }
                return SplitAssignment(
                    labeled_ids=frozenset(labeled),
                    unlabeled_ids=frozenset(unlabeled),
                    target_fraction=float(m),
                    seed=seed,
                    per_class_fraction=achieved,
                )
            if violation < best_violation:
                best_violation = violation
                best_fractions = {
                    scheme.class_names[c]: float(frac[c])
                    for c in range(scheme.num_classes)
                    if active[c]
                }
            if k == n:
                break  # the full set is deterministic; one attempt suffices
    raise InfeasibleSplitError(
        f"no split found with per-class shares in [{lo}, {hi}]% "
        f"(nearest miss: {best_fractions})",
        nearest_fractions=best_fractions,
    )


def _candidate_lengths(k0: int, n: int):
    for k in (k0, k0 - 1, k0 + 1):
        if 1 <= k <= n:
            yield k


def recount_fractions(split: SplitAssignment, maps,
                      scheme: ClassScheme | None = None) -> dict[str, float]:
    """Recompute per-class labeled-pixel shares of D^l from the raw maps."""
    scheme = scheme or ClassScheme()
    all_ids = sorted(split.labeled_ids | split.unlabeled_ids)
    counts = _per_patch_class_counts(all_ids, maps, scheme.num_classes)
    totals = counts.sum(axis=0)
    rows = [i for i, pid in enumerate(all_ids) if pid in split.labeled_ids]
    picked = counts[rows].sum(axis=0)
    return {
        scheme.class_names[c]: float(100.0 * picked[c] / totals[c])
        for c in range(scheme.num_classes)
        if totals[c] > 0
    }
