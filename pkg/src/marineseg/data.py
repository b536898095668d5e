"""Loading and preparation of weakly-labeled multispectral patches.

A dataset lives under a single root directory:

    root/
      patches/<patch_id>.npy   float32 array of shape (11, H, W), surface reflectance
      labels/<patch_id>.npy    int16 array of shape (H, W), -1 = unlabeled, else a
                               code into root/label_names.json
      label_names.json         {"label_names": [...]} mapping label codes to names
      splits.json              optional {"train": [...], "val": [...], "test": [...]}
      nan_registry.json        optional {"train": [...], "val": [...], "test": [...]}

Label arrays on disk carry dataset-native class codes; ``load_patch`` remaps them
through a :class:`ClassScheme` grouping into the 5 working classes. Unlabeled
pixels use the sentinel -1 everywhere.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    EmptyDatasetError,
    MissingBandError,
    ShapeMismatchError,
    UnknownClassError,
)

UNLABELED = -1
NUM_BANDS = 11

GROUPED_CLASS_NAMES = (
    "Marine Debris",
    "Algae/Organic Material",
    "Ship",
    "Cloud",
    "Water",
)

# 15 dataset-native categories -> 5 working classes. The grouped names map to
# themselves so that regrouping an already-grouped map is the identity.
DEFAULT_GROUPING = {
    "Marine Debris": "Marine Debris",
    "Dense Sargassum": "Algae/Organic Material",
    "Sparse Sargassum": "Algae/Organic Material",
    "Natural Organic Material": "Algae/Organic Material",
    "Ship": "Ship",
    "Clouds": "Cloud",
    "Marine Water": "Water",
    "Sediment-Laden Water": "Water",
    "Foam": "Water",
    "Turbid Water": "Water",
    "Shallow Water": "Water",
    "Waves": "Water",
    "Cloud Shadows": "Water",
    "Wakes": "Water",
    "Mixed Water": "Water",
    "Algae/Organic Material": "Algae/Organic Material",
    "Cloud": "Cloud",
    "Water": "Water",
}

# Patch ids known to contain NaN reflectance values, excluded from every run.
DEFAULT_NAN_REGISTRY = {
    "train": ["21-2-17_16PCC_0"],
    "val": ["18-9-20_16PCC_47", "18-9-20_16PCC_48", "18-9-20_16PCC_50"],
    "test": ["30-8-18_16PCC_0", "30-8-18_16PCC_1", "30-8-18_16PCC_2"],
}


@dataclass(frozen=True)
class ClassScheme:
    """Ordered working classes plus the grouping from dataset-native names."""

    class_names: tuple[str, ...] = GROUPED_CLASS_NAMES
    grouping: dict[str, str] = field(default_factory=lambda: dict(DEFAULT_GROUPING))

    @property
    def num_classes(self) -> int:
        return len(self.class_names)

    def index_of(self, name: str) -> int:
        return self.class_names.index(name)

    def remap(self, labels: np.ndarray, native_names: list[str]) -> np.ndarray:
        """Map native label codes to grouped class indices, keeping -1."""
        lut = np.full(len(native_names), UNLABELED, dtype=np.int16)
        present = np.unique(labels)
        present = present[present >= 0]
        if present.size and present.max() >= len(native_names):
            raise UnknownClassError(
                f"label code {int(present.max())} outside the {len(native_names)}-entry name table"
            )
        for code in present:
            name = native_names[int(code)]
            if name not in self.grouping:
                raise UnknownClassError(f"label name {name!r} outside grouping")
            lut[int(code)] = self.index_of(self.grouping[name])
        out = np.full(labels.shape, UNLABELED, dtype=np.int16)
        mask = labels >= 0
        out[mask] = lut[labels[mask]]
        return out


@dataclass(frozen=True)
class MultispectralPatch:
    """An 11-band reflectance tile. ``bands`` has shape (11, H, W)."""

    patch_id: str
    bands: np.ndarray

    @property
    def height(self) -> int:
        return self.bands.shape[1]

    @property
    def width(self) -> int:
        return self.bands.shape[2]

    def has_nan(self) -> bool:
        return bool(np.isnan(self.bands).any())


@dataclass(frozen=True)
class SegmentationMap:
    """Per-pixel class indices in {-1} | {0..C-1}; -1 means unlabeled."""

    labels: np.ndarray

    def __post_init__(self):
        if self.labels.ndim != 2:
            raise ShapeMismatchError(f"labels must be 2-d, got shape {self.labels.shape}")

    @property
    def shape(self) -> tuple[int, int]:
        return self.labels.shape


@dataclass(frozen=True)
class ClassPixelStats:
    counts: dict[str, int]
    fractions: dict[str, float]  # percentages of total labeled pixels


def load_label_names(root: Path) -> list[str]:
    path = Path(root) / "label_names.json"
    if path.exists():
        return json.loads(path.read_text())["label_names"]
    # Datasets written without a name table are assumed pre-grouped.
    return list(GROUPED_CLASS_NAMES)


def load_patch(path, scheme: ClassScheme | None = None):
    """Load one patch and its label map from ``root/patches/<id>.npy``.

    ``path`` points at the patch array; the label array and name table are
    resolved relative to the dataset root two levels up.
    """
    scheme = scheme or ClassScheme()
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(path)
    root = path.parent.parent
    bands = np.load(path)
    if bands.ndim != 3 or bands.shape[0] != NUM_BANDS:
        raise MissingBandError(
            f"{path.name}: expected {NUM_BANDS} bands, got array of shape {bands.shape}"
        )
    label_path = root / "labels" / path.name
    raw = np.load(label_path)
    if raw.shape != bands.shape[1:]:
        raise ShapeMismatchError(
            f"{path.name}: label shape {raw.shape} != patch shape {bands.shape[1:]}"
        )
    labels = scheme.remap(raw.astype(np.int16), load_label_names(root))
    patch = MultispectralPatch(patch_id=path.stem, bands=bands.astype(np.float32))
    return patch, SegmentationMap(labels=labels)


def save_patch(root, patch_id: str, bands: np.ndarray, labels: np.ndarray) -> None:
    root = Path(root)
    (root / "patches").mkdir(parents=True, exist_ok=True)
    (root / "labels").mkdir(parents=True, exist_ok=True)
    np.save(root / "patches" / f"{patch_id}.npy", bands.astype(np.float32))
    np.save(root / "labels" / f"{patch_id}.npy", labels.astype(np.int16))


def filter_nan_patches(ids, registry) -> list[str]:
    """Drop ids flagged in the registry, preserving order.

    ``registry`` maps patch_id -> bool (True = contains NaN). Every id must be
    covered; a missing entry is treated as a registry bug.
    """
    missing = [i for i in ids if i not in registry]
    if missing:
        raise KeyError(f"registry does not cover ids: {missing[:5]}")
    return [i for i in ids if not registry[i]]


def registry_from_lists(ids, flagged) -> dict[str, bool]:
    flagged = set(flagged)
    return {i: i in flagged for i in ids}


def scan_nan_registry(root, ids) -> dict[str, bool]:
    """Ingest-time scan: flag every patch whose bands contain a NaN."""
    root = Path(root)
    out = {}
    for pid in ids:
        bands = np.load(root / "patches" / f"{pid}.npy")
        out[pid] = bool(np.isnan(bands).any())
    return out


def load_nan_registry(path) -> dict[str, list[str]]:
    return json.loads(Path(path).read_text())


def save_nan_registry(path, registry: dict[str, list[str]]) -> None:
    Path(path).write_text(json.dumps(registry, indent=2, sort_keys=True) + "\n")


def class_pixel_stats(maps, scheme: ClassScheme | None = None) -> ClassPixelStats:
    """Count labeled pixels per class over a collection of maps.

    Fractions are percentages of the total labeled pixel count; the -1
    sentinel never contributes.
    """
    scheme = scheme or ClassScheme()
    counts = np.zeros(scheme.num_classes, dtype=np.int64)
    for m in maps:
        labels = m.labels if isinstance(m, SegmentationMap) else np.asarray(m)
        valid = labels[labels >= 0]
        counts += np.bincount(valid, minlength=scheme.num_classes)[: scheme.num_classes]
    total = int(counts.sum())
    if total == 0:
        raise EmptyDatasetError("no labeled pixel in the given maps")
    fractions = {
        name: 100.0 * counts[i] / total for i, name in enumerate(scheme.class_names)
    }
    return ClassPixelStats(
        counts={name: int(counts[i]) for i, name in enumerate(scheme.class_names)},
        fractions=fractions,
    )


@dataclass(frozen=True)
class BandStats:
    """Per-band affine normalization statistics over a training split."""

    mean: np.ndarray
    std: np.ndarray

    def normalize(self, bands: np.ndarray) -> np.ndarray:
        return (bands - self.mean[:, None, None]) / self.std[:, None, None]

    def to_json(self) -> str:
        return json.dumps(
            {"mean": self.mean.tolist(), "std": self.std.tolist()}, indent=2
        )

    @classmethod
    def from_json(cls, text: str) -> "BandStats":
        d = json.loads(text)
        return cls(mean=np.asarray(d["mean"], dtype=np.float64),
                   std=np.asarray(d["std"], dtype=np.float64))


def compute_band_stats(patches) -> BandStats:
    """Dataset-level per-band mean/std (population std, epsilon-guarded)."""
    s = np.zeros(NUM_BANDS, dtype=np.float64)
    ss = np.zeros(NUM_BANDS, dtype=np.float64)
    n = 0
    for p in patches:
        bands = p.bands if isinstance(p, MultispectralPatch) else np.asarray(p)
        flat = bands.reshape(NUM_BANDS, -1).astype(np.float64)
        s += flat.sum(axis=1)
        ss += (flat * flat).sum(axis=1)
        n += flat.shape[1]
    if n == 0:
        raise EmptyDatasetError("no patch given")
    mean = s / n
    var = np.maximum(ss / n - mean * mean, 0.0)
    std = np.sqrt(var)
    std[std < 1e-8] = 1.0
    return BandStats(mean=mean, std=std)


class DiskDataset:
    """Thin accessor over the on-disk layout described in the module docstring."""

    def __init__(self, root, scheme: ClassScheme | None = None):
        self.root = Path(root)
        self.scheme = scheme or ClassScheme()
        splits_path = self.root / "splits.json"
        if splits_path.exists():
            self._splits = json.loads(splits_path.read_text())
        else:
            ids = sorted(p.stem for p in (self.root / "patches").glob("*.npy"))
            self._splits = {"train": ids, "val": [], "test": []}

    @property
    def train_ids(self) -> list[str]:
        return list(self._splits.get("train", []))

    @property
    def val_ids(self) -> list[str]:
        return list(self._splits.get("val", []))

    @property
    def test_ids(self) -> list[str]:
        return list(self._splits.get("test", []))

    def load(self, patch_id: str):
        return load_patch(self.root / "patches" / f"{patch_id}.npy", self.scheme)


class InMemoryDataset:
    """Dict-backed dataset with the same access surface as DiskDataset."""

    def __init__(self, patches: dict, labels: dict, train_ids=None, val_ids=None,
                 test_ids=None, scheme: ClassScheme | None = None):
        self.patches = patches
        self.labels = labels
        self.scheme = scheme or ClassScheme()
        self.train_ids = list(train_ids if train_ids is not None else patches)
        self.val_ids = list(val_ids or [])
        self.test_ids = list(test_ids or [])

    def load(self, patch_id: str):
        patch = MultispectralPatch(patch_id=patch_id,
                                   bands=np.asarray(self.patches[patch_id], dtype=np.float32))
        return patch, SegmentationMap(labels=np.asarray(self.labels[patch_id], dtype=np.int16))
