"""Coordinated weak/strong/Cutout augmentation for images, label maps and masks.

Transforms come in two tags. Geometric transforms move pixels and may create
padding; padding pixels are filled with 0 in images, -1 in label maps, and
flagged False in the validity mask. Color transforms change intensities of
valid pixels only and are never applied to label or probability maps.

Images are resampled bilinearly; label and probability maps travel by
nearest-neighbor so class indices and distribution values are never blended.
Flips and +-90 degree rotations are exact array ops on every path.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy import ndimage

FILL_IMAGE = 0.0
FILL_LABEL = -1


class Kind(str, Enum):
    IDENTITY = "Identity"
    ROTATE = "Rotate"
    SHEAR_X = "ShearX"
    SHEAR_Y = "ShearY"
    TRANSLATE_X = "TranslateX"
    TRANSLATE_Y = "TranslateY"
    SOLARIZE = "Solarize"
    SHARPNESS = "Sharpness"
    HFLIP = "HFlip"
    VFLIP = "VFlip"
    ROTATE90 = "Rotate90"


COLOR_KINDS = frozenset({Kind.SOLARIZE, Kind.SHARPNESS})
# exact ops: no interpolation, no padding
EXACT_KINDS = frozenset({Kind.HFLIP, Kind.VFLIP, Kind.ROTATE90})

# strong-augmentation menu and parameter ranges
STRONG_KINDS = (Kind.IDENTITY, Kind.ROTATE, Kind.SHEAR_X, Kind.SHEAR_Y,
                Kind.TRANSLATE_X, Kind.TRANSLATE_Y, Kind.SOLARIZE, Kind.SHARPNESS)
STRONG_GEOMETRIC_KINDS = STRONG_KINDS[:6]
PARAM_RANGES = {
    Kind.ROTATE: (5.0, 30.0),        # degrees, sign drawn separately
    Kind.SHEAR_X: (5.0, 30.0),
    Kind.SHEAR_Y: (5.0, 30.0),
    Kind.TRANSLATE_X: (0.1, 0.2),    # fraction of width, sign drawn separately
    Kind.TRANSLATE_Y: (0.1, 0.2),
    Kind.SOLARIZE: (0.01, 0.99),     # threshold on the min-max normalized band
    Kind.SHARPNESS: (0.2, 0.5),      # blend factor toward the original band
}


def tag_of(kind: Kind) -> str:
    return "color" if kind in COLOR_KINDS else "geometric"


@dataclass(frozen=True)
class PlanStep:
    kind: Kind
    param: float = 0.0

    @property
    def tag(self) -> str:
        return tag_of(self.kind)


@dataclass(frozen=True)
class AugmentationPlan:
    """A sampled, replayable sequence of transform steps."""

    steps: tuple[PlanStep, ...]

    def geometric_steps(self) -> tuple[PlanStep, ...]:
        return tuple(s for s in self.steps if s.tag == "geometric")

    def to_records(self) -> str:
        return json.dumps([
            {"kind": s.kind.value, "param": s.param, "tag": s.tag}
            for s in self.steps
        ])

    @classmethod
    def from_records(cls, text: str) -> "AugmentationPlan":
        return cls(steps=tuple(PlanStep(Kind(d["kind"]), d["param"])
                               for d in json.loads(text)))


def check_strong_plan(plan: AugmentationPlan) -> None:
    """A strong plan has exactly two steps and any color step is step 1."""
    if len(plan.steps) != 2:
        raise ValueError(f"strong plan must have 2 steps, got {len(plan.steps)}")
    if plan.steps[1].tag == "color":
        raise ValueError("color transforms are only allowed as step 1")


def sample_weak_plan(rng: np.random.Generator) -> AugmentationPlan:
    """Horizontal flip and vertical flip as independent Bernoulli(0.5) events,
    then a +-90 degree rotation, itself applied with probability 0.5."""
    steps = []
    if rng.random() < 0.5:
        steps.append(PlanStep(Kind.HFLIP))
    if rng.random() < 0.5:
        steps.append(PlanStep(Kind.VFLIP))
    if rng.random() < 0.5:
        angle = 90.0 if rng.random() < 0.5 else -90.0
        steps.append(PlanStep(Kind.ROTATE90, angle))
    return AugmentationPlan(steps=tuple(steps))


def _sample_param(rng: np.random.Generator, kind: Kind) -> float:
    if kind == Kind.IDENTITY:
        return 0.0
    lo, hi = PARAM_RANGES[kind]
    value = rng.uniform(lo, hi)
    if kind in (Kind.ROTATE, Kind.SHEAR_X, Kind.SHEAR_Y,
                Kind.TRANSLATE_X, Kind.TRANSLATE_Y):
        if rng.random() < 0.5:
            value = -value
    return float(value)


def sample_strong_plan(rng: np.random.Generator) -> AugmentationPlan:
    """Step 1 uniform over the full menu, step 2 uniform over the geometric
    sublist; drawn with repetition, parameters uniform over their ranges."""
    k1 = STRONG_KINDS[rng.integers(len(STRONG_KINDS))]
    p1 = _sample_param(rng, k1)
    k2 = STRONG_GEOMETRIC_KINDS[rng.integers(len(STRONG_GEOMETRIC_KINDS))]
    p2 = _sample_param(rng, k2)
    return AugmentationPlan(steps=(PlanStep(k1, p1), PlanStep(k2, p2)))


# ---------------------------------------------------------------------------
# geometry

def _forward_matrix(step: PlanStep, h: int, w: int) -> np.ndarray:
    """3x3 forward map on homogeneous (x, y, 1) coordinates, about the center."""
    cx, cy = (w - 1) / 2.0, (h - 1) / 2.0
    m = np.eye(3)
    k, p = step.kind, step.param
    if k == Kind.ROTATE:
        t = np.deg2rad(p)
        m = np.array([[np.cos(t), -np.sin(t), 0.0],
                      [np.sin(t), np.cos(t), 0.0],
                      [0.0, 0.0, 1.0]])
    elif k == Kind.SHEAR_X:
        m = np.array([[1.0, np.tan(np.deg2rad(p)), 0.0],
                      [0.0, 1.0, 0.0],
                      [0.0, 0.0, 1.0]])
    elif k == Kind.SHEAR_Y:
        m = np.array([[1.0, 0.0, 0.0],
                      [np.tan(np.deg2rad(p)), 1.0, 0.0],
                      [0.0, 0.0, 1.0]])
    elif k == Kind.TRANSLATE_X:
        m = np.array([[1.0, 0.0, p * w], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
    elif k == Kind.TRANSLATE_Y:
        m = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, p * h], [0.0, 0.0, 1.0]])
    else:
        raise ValueError(f"{k} is not an affine step")
    center = np.array([[1, 0, cx], [0, 1, cy], [0, 0, 1]], dtype=float)
    uncenter = np.array([[1, 0, -cx], [0, 1, -cy], [0, 0, 1]], dtype=float)
    return center @ m @ uncenter


def _source_coords(step: PlanStep, h: int, w: int):
    """Source (sx, sy) for every output pixel plus the in-bounds validity set."""
    inv = np.linalg.inv(_forward_matrix(step, h, w))
    ys, xs = np.mgrid[0:h, 0:w].astype(np.float64)
    sx = inv[0, 0] * xs + inv[0, 1] * ys + inv[0, 2]
    sy = inv[1, 0] * xs + inv[1, 1] * ys + inv[1, 2]
    valid = (sx >= 0.0) & (sx <= w - 1.0) & (sy >= 0.0) & (sy <= h - 1.0)
    return sx, sy, valid


def _bilinear(channels: np.ndarray, sx, sy, valid) -> np.ndarray:
    h, w = channels.shape[1:]
    x0 = np.clip(np.floor(sx).astype(int), 0, w - 1)
    y0 = np.clip(np.floor(sy).astype(int), 0, h - 1)
    x1 = np.clip(x0 + 1, 0, w - 1)
    y1 = np.clip(y0 + 1, 0, h - 1)
    fx = np.clip(sx - x0, 0.0, 1.0)
    fy = np.clip(sy - y0, 0.0, 1.0)
    out = (channels[:, y0, x0] * (1 - fy) * (1 - fx)
           + channels[:, y0, x1] * (1 - fy) * fx
           + channels[:, y1, x0] * fy * (1 - fx)
           + channels[:, y1, x1] * fy * fx)
    out[:, ~valid] = FILL_IMAGE
    return out.astype(channels.dtype)


def _nearest_indices(sx, sy, h, w):
    xi = np.clip(np.rint(sx).astype(int), 0, w - 1)
    yi = np.clip(np.rint(sy).astype(int), 0, h - 1)
    return yi, xi


def _apply_exact(step: PlanStep, arr: np.ndarray) -> np.ndarray:
    axes = (arr.ndim - 2, arr.ndim - 1)
    if step.kind == Kind.HFLIP:
        return np.flip(arr, axis=axes[1]).copy()
    if step.kind == Kind.VFLIP:
        return np.flip(arr, axis=axes[0]).copy()
    k = 1 if step.param > 0 else 3  # +90 = counter-clockwise quarter turn
    return np.rot90(arr, k=k, axes=axes).copy()


def _solarize(image: np.ndarray, mask: np.ndarray, threshold: float) -> np.ndarray:
    out = image.copy()
    for b in range(image.shape[0]):
        band = image[b]
        vals = band[mask]
        if vals.size == 0:
            continue
        lo, hi = float(vals.min()), float(vals.max())
        span = hi - lo
        if span < 1e-12:
            continue
        norm = (band - lo) / span
        inverted = np.where(norm > threshold, 1.0 - norm, norm)
        out[b][mask] = (lo + inverted * span)[mask]
    return out


def _sharpness(image: np.ndarray, mask: np.ndarray, factor: float) -> np.ndarray:
    out = image.copy()
    for b in range(image.shape[0]):
        blurred = ndimage.uniform_filter(image[b].astype(np.float64), size=3,
                                         mode="nearest")
        blended = (1.0 - factor) * blurred + factor * image[b]
        out[b][mask] = blended.astype(image.dtype)[mask]
    return out


def apply_plan(plan: AugmentationPlan, image: np.ndarray, mask: np.ndarray):
    """Apply every step to an image of shape (C, H, W) and its validity mask."""
    image = np.asarray(image)
    mask = np.asarray(mask, dtype=bool)
    for step in plan.steps:
        if step.kind == Kind.IDENTITY:
            continue
        if step.tag == "color":
            if step.kind == Kind.SOLARIZE:
                image = _solarize(image, mask, step.param)
            else:
                image = _sharpness(image, mask, step.param)
            continue
        if step.kind in EXACT_KINDS:
            image = _apply_exact(step, image)
            mask = _apply_exact(step, mask)
            continue
        h, w = image.shape[1:]
        sx, sy, valid = _source_coords(step, h, w)
        yi, xi = _nearest_indices(sx, sy, h, w)
        image = _bilinear(image, sx, sy, valid)
        mask = valid & mask[yi, xi]
        image[:, ~mask] = FILL_IMAGE
    return image, mask


def apply_geometric_only(plan: AugmentationPlan, maps: np.ndarray, mask: np.ndarray):
    """Replay only the geometric steps onto a label map (H, W) or a probability
    map (C, H, W) with nearest-neighbor transport. Padding becomes -1 on label
    maps, an all-zero column on probability maps, and False on the mask."""
    maps = np.asarray(maps)
    mask = np.asarray(mask, dtype=bool)
    is_labels = maps.ndim == 2
    fill = FILL_LABEL if is_labels else 0.0
    for step in plan.steps:
        if step.kind == Kind.IDENTITY or step.tag == "color":
            continue
        if step.kind in EXACT_KINDS:
            maps = _apply_exact(step, maps)
            mask = _apply_exact(step, mask)
            continue
        h, w = maps.shape if is_labels else maps.shape[1:]
        sx, sy, valid = _source_coords(step, h, w)
        yi, xi = _nearest_indices(sx, sy, h, w)
        moved = maps[yi, xi] if is_labels else maps[:, yi, xi]
        mask = valid & mask[yi, xi]
        if is_labels:
            moved = moved.copy()
            moved[~mask] = fill
        else:
            moved = moved.copy()
            moved[:, ~mask] = fill
        maps = moved
    return maps, mask


# ---------------------------------------------------------------------------
# Cutout

@dataclass(frozen=True)
class CutoutSpec:
    """Three rectangles (center_x, center_y, w, h) in 1-based pixel coordinates."""

    rectangles: tuple[tuple[float, float, float, float], ...]
    height: int
    width: int

    def __post_init__(self):
        if len(self.rectangles) != 3:
            raise ValueError("a Cutout spec has exactly 3 rectangles")
        for cx, cy, w, h in self.rectangles:
            if not (0.05 * self.width <= w <= 0.15 * self.width + 1e-9):
                raise ValueError(f"rectangle width {w} outside [0.05, 0.15]*W")
            if not (0.05 * self.height <= h <= 0.15 * self.height + 1e-9):
                raise ValueError(f"rectangle height {h} outside [0.05, 0.15]*H")
            if not (1.0 <= cx <= self.width and 1.0 <= cy <= self.height):
                raise ValueError("rectangle center outside the image")

    def covered_mask(self) -> np.ndarray:
        covered = np.zeros((self.height, self.width), dtype=bool)
        for cx, cy, w, h in self.rectangles:
            # 0-based integer coverage; borders clip
            x0 = max(0, int(np.ceil(cx - 1 - w / 2)))
            x1 = min(self.width - 1, int(np.floor(cx - 1 + w / 2)))
            y0 = max(0, int(np.ceil(cy - 1 - h / 2)))
            y1 = min(self.height - 1, int(np.floor(cy - 1 + h / 2)))
            if x0 <= x1 and y0 <= y1:
                covered[y0:y1 + 1, x0:x1 + 1] = True
        return covered


def sample_cutout(rng: np.random.Generator, h: int, w: int) -> CutoutSpec:
    if h < 8 or w < 8:
        raise ValueError("Cutout needs images of at least 8x8")
    rects = []
    for _ in range(3):
        rh = rng.uniform(0.05, 0.15) * h
        rw = rng.uniform(0.05, 0.15) * w
        cx = rng.uniform(1.0, float(w))
        cy = rng.uniform(1.0, float(h))
        rects.append((float(cx), float(cy), float(rw), float(rh)))
    return CutoutSpec(rectangles=tuple(rects), height=h, width=w)


def apply_cutout(spec: CutoutSpec, image: np.ndarray, mask: np.ndarray):
    covered = spec.covered_mask()
    image = image.copy()
    mask = mask.copy()
    image[:, covered] = 0.0
    mask[covered] = False
    return image, mask
