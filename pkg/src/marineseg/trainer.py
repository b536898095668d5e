"""Training loops for the fully-supervised and semi-supervised modes.

Both modes share the epoch definition (one full cycle over the labeled subset,
shuffled, last incomplete batch dropped) so their step counts match at equal
labeled percentage. The semi-supervised loop additionally draws mu * batch_size
unlabeled images per step from an independently cycling iterator, builds
pseudo-labels from weakly-augmented views, and scores them against predictions
on strongly-augmented + Cutout views.

Model selection: after every epoch the validation mIoU is computed from a
pooled confusion matrix; the checkpoint with the highest value is retained
(earliest epoch wins ties). Validation loss is logged as well.

Every random draw flows from named substreams of cfg.seed, so a run is
reproducible and the labeled-branch draws of both modes line up exactly.
"""

from __future__ import annotations

import csv
import json
import tempfile
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import torch

from .augment import (
    apply_cutout,
    apply_geometric_only,
    apply_plan,
    sample_cutout,
    sample_strong_plan,
    sample_weak_plan,
)
from .data import BandStats, compute_band_stats
from .errors import ConfigError, NoCheckpointError, NoLabeledPixelError
from .losses import LossConfig, supervised_loss, total_loss, unsupervised_loss
from .metrics import ConfusionMatrix, format_confusion_table, iou_per_class, miou
from .splits import SplitAssignment
from .unet import UNet, load_checkpoint, save_checkpoint

FULLY_SUPERVISED = "fully_supervised"
SEMI_SUPERVISED = "semi_supervised"


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 2000
    lr: float = 2e-4
    batch_size: int = 5
    alphas: tuple[float, ...] = (1.0, 1.0, 1.0, 1.0, 1.0)
    gamma: float = 2.0
    threshold: float = 0.9
    lambda_coeff: float = 1.0
    mu: int = 5
    mode: str = SEMI_SUPERVISED
    seed: int = 0
    labeled_percentage: int = 100

    def __post_init__(self):
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")
        if self.mu < 1:
            raise ConfigError("mu must be >= 1")
        if self.mode not in (FULLY_SUPERVISED, SEMI_SUPERVISED):
            raise ConfigError(f"unknown mode {self.mode!r}")
        if self.threshold < 0:
            raise ConfigError("threshold must be >= 0 (values > 1 exclude all)")

    def loss_config(self) -> LossConfig:
        return LossConfig(alphas=self.alphas, gamma=self.gamma,
                          lambda_coeff=self.lambda_coeff, threshold=self.threshold)


@dataclass
class EpochStats:
    epoch: int  # 1-based
    loss_sup: float
    loss_unsup: float
    loss_total: float
    retained_mean: float
    val_miou: float
    val_loss: float


@dataclass
class TrainReport:
    config: TrainConfig
    epochs: list[EpochStats] = field(default_factory=list)
    best_epoch: int | None = None
    best_val_miou: float | None = None
    best_checkpoint: str | None = None
    run_dir: str | None = None
    band_stats: BandStats | None = None
    skipped_steps: int = 0
    test_miou: float | None = None
    test_ious: dict | None = None
    test_confusion: list | None = None
    test_table: str | None = None

    def to_json(self) -> str:
        d = {
            "config": asdict(self.config),
            "epochs": [asdict(e) for e in self.epochs],
            "best_epoch": self.best_epoch,
            "best_val_miou": self.best_val_miou,
            "best_checkpoint": self.best_checkpoint,
            "skipped_steps": self.skipped_steps,
            "test_miou": self.test_miou,
            "test_ious": self.test_ious,
            "test_confusion": self.test_confusion,
        }
        return json.dumps(d, indent=2) + "\n"


# preset hyperparameter tables; "main" switches the pseudo-label threshold at
# 20% labeled data
PRESETS = {
    "threshold-sweep": dict(epochs=500, lr=2e-4, batch_size=5,
                            alphas=(1.0,) * 5, gamma=2.0, threshold=0.9,
                            lambda_coeff=1.0, mu=5),
    "ce-vs-focal": dict(epochs=2000, lr=2e-4, batch_size=5,
                        alphas=(1.0,) * 5, gamma=2.0, threshold=0.9,
                        lambda_coeff=1.0, mu=5),
    "main": dict(epochs=2000, lr=2e-4, batch_size=5,
                 alphas=(1.0,) * 5, gamma=2.0, threshold=0.9,
                 lambda_coeff=1.0, mu=5),
}
MAIN_THRESHOLD_LOW = 0.9     # labeled percentage below 20
MAIN_THRESHOLD_HIGH = 0.999  # 20% and above


def preset_configs() -> dict[str, TrainConfig]:
    return {name: TrainConfig(**values) for name, values in PRESETS.items()}


def resolve_preset(name: str, m: int | None = None, mode: str = SEMI_SUPERVISED,
                   seed: int = 0, **overrides) -> TrainConfig:
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    values = dict(PRESETS[name])
    if name == "main" and m is not None and "threshold" not in overrides:
        values["threshold"] = MAIN_THRESHOLD_HIGH if m >= 20 else MAIN_THRESHOLD_LOW
    values.update(overrides)
    if m is not None:
        values["labeled_percentage"] = m
    return TrainConfig(mode=mode, seed=seed, **values)


# ---------------------------------------------------------------------------
# loop internals

class _Cycler:
    """Endless shuffled iterator over ids; reshuffles on exhaustion."""

    def __init__(self, ids, rng):
        self.ids = list(ids)
        self.rng = rng
        self.order = []
        self.pos = 0

    def take(self, n):
        out = []
        while len(out) < n:
            if self.pos >= len(self.order):
                self.order = [self.ids[i] for i in self.rng.permutation(len(self.ids))]
                self.pos = 0
            out.append(self.order[self.pos])
            self.pos += 1
        return out


class _Cache:
    """Loads each patch once; the unlabeled view never touches label arrays."""

    def __init__(self, data, stats: BandStats):
        self.data = data
        self.stats = stats
        self._bands = {}
        self._labels = {}

    def bands(self, pid):
        if pid not in self._bands:
            self._bands[pid] = self.stats.normalize(
                _load_bands(self.data, pid)).astype(np.float32)
        return self._bands[pid]

    def pair(self, pid):
        if pid not in self._labels:
            _, seg = self.data.load(pid)
            self._labels[pid] = seg.labels
        return self.bands(pid), self._labels[pid]


def _load_bands(data, pid):
    if hasattr(data, "load_bands"):
        return data.load_bands(pid)
    if hasattr(data, "patches"):
        return np.asarray(data.patches[pid], dtype=np.float32)
    return np.load(Path(data.root) / "patches" / f"{pid}.npy")


def _evaluate(model, cache, ids, num_classes, loss_cfg):
    """Pooled confusion matrix, mIoU and supervised loss over a set of ids."""
    cm = ConfusionMatrix(num_classes)
    device = next(model.parameters()).device
    loss_sum, labeled = 0.0, 0
    model.eval()
    with torch.no_grad():
        for pid in ids:
            bands, labels = cache.pair(pid)
            x = torch.from_numpy(bands).unsqueeze(0).to(device)
            probs = model.predict_probs(x)
            pred = probs.argmax(dim=1).squeeze(0).cpu().numpy()
            cm.accumulate(pred, labels)
            n = int((labels >= 0).sum())
            if n:
                loss = supervised_loss(probs, labels[None], loss_cfg)
                loss_sum += float(loss) * n
                labeled += n
    model.train()
    val_loss = loss_sum / labeled if labeled else float("nan")
    try:
        score = miou(iou_per_class(cm))
    except Exception:
        score = float("nan")
    return cm, score, val_loss


def _weak_augment_pair(rng, bands, labels):
    plan = sample_weak_plan(rng)
    h, w = bands.shape[1:]
    img, _ = apply_plan(plan, bands, np.ones((h, w), dtype=bool))
    labs, _ = apply_geometric_only(plan, labels, np.ones((h, w), dtype=bool))
    return img, labs


def _run_loop(cfg: TrainConfig, split: SplitAssignment, data, model: UNet,
              out_dir, use_unlabeled: bool) -> TrainReport:
    labeled_ids = sorted(split.labeled_ids)
    unlabeled_ids = sorted(split.unlabeled_ids)
    if not labeled_ids:
        raise ConfigError("split has no labeled images")

    run_dir = Path(out_dir) if out_dir else Path(tempfile.mkdtemp(prefix="marineseg-run-"))
    run_dir.mkdir(parents=True, exist_ok=True)

    # named substreams; the labeled branch draws identically in both modes
    rng_shuffle = np.random.default_rng([cfg.seed, 1])
    rng_weak = np.random.default_rng([cfg.seed, 2])
    rng_unlab = np.random.default_rng([cfg.seed, 3])
    rng_weak_u = np.random.default_rng([cfg.seed, 4])
    rng_strong = np.random.default_rng([cfg.seed, 5])
    rng_cutout = np.random.default_rng([cfg.seed, 6])

    train_pool = labeled_ids + unlabeled_ids
    stats = compute_band_stats(_load_bands(data, pid) for pid in train_pool)
    (run_dir / "bandstats.json").write_text(stats.to_json() + "\n")
    (run_dir / "split_manifest.json").write_text(split.to_manifest())
    (run_dir / "config.json").write_text(json.dumps(asdict(cfg), indent=2) + "\n")

    cache = _Cache(data, stats)
    loss_cfg = cfg.loss_config()
    num_classes = model.cfg.num_classes
    device = next(model.parameters()).device
    val_ids = data.val_ids or labeled_ids  # fall back to the labeled train set

    opt = torch.optim.Adam(model.parameters(), lr=cfg.lr, betas=(0.9, 0.999), eps=1e-8)
    unlabeled_iter = _Cycler(unlabeled_ids, rng_unlab) if unlabeled_ids else None
    draw_unlabeled = use_unlabeled and unlabeled_iter is not None

    report = TrainReport(config=cfg, run_dir=str(run_dir), band_stats=stats)
    step_rows = []
    best_path = run_dir / "best.pt"
    steps_per_epoch = len(labeled_ids) // cfg.batch_size
    global_step = 0
    model.train()

    for epoch in range(1, cfg.epochs + 1):
        order = rng_shuffle.permutation(len(labeled_ids))
        sums = np.zeros(4)  # loss_sup, loss_unsup, loss_total, retained
        counted = 0
        for s in range(steps_per_epoch):
            batch_ids = [labeled_ids[i] for i in order[s * cfg.batch_size:(s + 1) * cfg.batch_size]]
            imgs, labs = [], []
            for pid in batch_ids:
                bands, labels = cache.pair(pid)
                img, lab = _weak_augment_pair(rng_weak, bands, labels)
                imgs.append(img)
                labs.append(lab)
            x = torch.from_numpy(np.stack(imgs)).to(device)
            y = np.stack(labs)

            probs = model.predict_probs(x)
            try:
                loss_sup = supervised_loss(probs, y, loss_cfg)
            except NoLabeledPixelError:
                report.skipped_steps += 1
                global_step += 1
                continue

            loss_unsup = torch.zeros(())
            retained = 0
            if draw_unlabeled:
                u_ids = unlabeled_iter.take(cfg.mu * cfg.batch_size)
                weak_imgs = []
                for pid in u_ids:
                    plan = sample_weak_plan(rng_weak_u)
                    h, w = cache.bands(pid).shape[1:]
                    img, _ = apply_plan(plan, cache.bands(pid), np.ones((h, w), bool))
                    weak_imgs.append(img)
                xu = torch.from_numpy(np.stack(weak_imgs)).to(device)
                with torch.no_grad():
                    weak_probs = model.predict_probs(xu)

                strong_plan = sample_strong_plan(rng_strong)  # one per step
                strong_imgs, masks, cutouts = [], [], []
                for img in weak_imgs:
                    h, w = img.shape[1:]
                    s_img, s_mask = apply_plan(strong_plan, img, np.ones((h, w), bool))
                    spec = sample_cutout(rng_cutout, h, w)
                    s_img, s_mask = apply_cutout(spec, s_img, s_mask)
                    strong_imgs.append(s_img.astype(np.float32))
                    masks.append(s_mask)
                    cutouts.append(spec)
                xs = torch.from_numpy(np.stack(strong_imgs)).to(device)
                strong_probs = model.predict_probs(xs)
                loss_unsup, retained = unsupervised_loss(
                    weak_probs, strong_probs, strong_plan, np.stack(masks),
                    cutouts, loss_cfg)

            loss = total_loss(loss_sup, loss_unsup, loss_cfg)
            opt.zero_grad()
            loss.backward()
            opt.step()

            row = (float(loss_sup.detach()), float(loss_unsup.detach()),
                   float(loss.detach()), retained)
            sums += row
            counted += 1
            step_rows.append((global_step, epoch) + row)
            global_step += 1

        denom = max(counted, 1)
        cm, val_score, val_loss = _evaluate(model, cache, val_ids, num_classes, loss_cfg)
        report.epochs.append(EpochStats(
            epoch=epoch,
            loss_sup=sums[0] / denom, loss_unsup=sums[1] / denom,
            loss_total=sums[2] / denom, retained_mean=sums[3] / denom,
            val_miou=val_score, val_loss=val_loss,
        ))
        if report.best_val_miou is None or val_score > report.best_val_miou:
            report.best_val_miou = val_score
            report.best_epoch = epoch
            save_checkpoint(best_path, model, epoch, val_score)
            report.best_checkpoint = str(best_path)

    _write_logs(run_dir, report, step_rows)
    return report


def _write_logs(run_dir: Path, report: TrainReport, step_rows) -> None:
    with open(run_dir / "metrics.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["step", "epoch", "loss_sup", "loss_unsup", "loss_total",
                         "retained_count"])
        writer.writerows(step_rows)
    with open(run_dir / "epochs.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "loss_sup", "loss_unsup", "loss_total",
                         "retained_mean", "val_miou", "val_loss"])
        for e in report.epochs:
            writer.writerow([e.epoch, e.loss_sup, e.loss_unsup, e.loss_total,
                             e.retained_mean, e.val_miou, e.val_loss])
    (run_dir / "report.json").write_text(report.to_json())


def train_fixmatch(cfg: TrainConfig, split: SplitAssignment, data, model: UNet,
                   out_dir=None) -> TrainReport:
    """Semi-supervised loop: labeled focal branch plus the thresholded
    pseudo-label consistency branch over mu * batch_size unlabeled images."""
    if cfg.mode != SEMI_SUPERVISED:
        raise ConfigError(f"train_fixmatch needs mode={SEMI_SUPERVISED!r}")
    return _run_loop(cfg, split, data, model, out_dir, use_unlabeled=True)


def train_supervised(cfg: TrainConfig, split: SplitAssignment, data, model: UNet,
                     out_dir=None) -> TrainReport:
    """Fully-supervised loop over the labeled subset only."""
    if cfg.mode != FULLY_SUPERVISED:
        raise ConfigError(f"train_supervised needs mode={FULLY_SUPERVISED!r}")
    return _run_loop(cfg, split, data, model, out_dir, use_unlabeled=False)


def select_and_evaluate(report: TrainReport, val_data, test_data,
                        model: UNet | None = None,
                        class_names=None) -> TrainReport:
    """Load the best-validation-mIoU checkpoint and evaluate it on the test set.

    ``val_data`` and ``test_data`` are (data, ids) pairs; pass ids=None to use
    the dataset's own val/test id lists.
    """
    if not report.epochs:
        raise NoCheckpointError("no completed epoch")
    if not report.best_checkpoint or not Path(report.best_checkpoint).exists():
        raise NoCheckpointError("no checkpoint was written")
    model, meta = load_checkpoint(report.best_checkpoint)
    loss_cfg = report.config.loss_config()

    def _resolve(pair, default_attr):
        data, ids = pair if isinstance(pair, tuple) else (pair, None)
        return data, (ids if ids is not None else getattr(data, default_attr))

    if val_data is not None:
        vdata, vids = _resolve(val_data, "val_ids")
        if vids:
            cache = _Cache(vdata, report.band_stats)
            _, recheck, _ = _evaluate(model, cache, vids, model.cfg.num_classes, loss_cfg)
            both_nan = np.isnan(recheck) and np.isnan(meta["val_miou"])
            if not both_nan and recheck != meta["val_miou"]:
                raise AssertionError(
                    f"checkpoint round-trip mismatch: {recheck} != {meta['val_miou']}")

    tdata, tids = _resolve(test_data, "test_ids")
    cache = _Cache(tdata, report.band_stats)
    cm, test_score, _ = _evaluate(model, cache, tids, model.cfg.num_classes, loss_cfg)
    ious = iou_per_class(cm)
    names = list(class_names) if class_names else [f"class_{i}" for i in range(cm.num_classes)]
    report.test_miou = test_score
    report.test_ious = {names[i]: (None if np.isnan(v) else float(v))
                        for i, v in enumerate(ious)}
    report.test_confusion = cm.counts.tolist()
    report.test_table = format_confusion_table(cm, names)
    if report.run_dir:
        (Path(report.run_dir) / "test_confusion.txt").write_text(report.test_table)
        (Path(report.run_dir) / "report.json").write_text(report.to_json())
    return report
