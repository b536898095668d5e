"""Command-line surface: split creation, synthetic data, training, evaluation,
analysis and plotting.

Exit codes: 0 success, 2 usage error, 3 data error, 4 infeasible split.
Config precedence for training: flag > config file > preset > built-in default.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import splits as splits_mod
from .data import (
    DEFAULT_NAN_REGISTRY,
    BandStats,
    ClassScheme,
    DiskDataset,
    compute_band_stats,
    registry_from_lists,
)
from .errors import ConfigError, InfeasibleSplitError, MarinesegError
from .metrics import (
    ConfusionMatrix,
    format_confusion_table,
    iou_per_class,
    miou,
    score_difference_variance,
)
from .synthetic import generate_synthetic_dataset
from .trainer import (
    FULLY_SUPERVISED,
    SEMI_SUPERVISED,
    TrainConfig,
    resolve_preset,
    select_and_evaluate,
    train_fixmatch,
    train_supervised,
)
from .unet import (
    REFERENCE_GFLOP_TARGET,
    REFERENCE_PARAM_TARGET,
    UNet,
    UNetConfig,
    budget_report,
    load_checkpoint,
)

DATA_ENV = "FIXSEG_DATA_ROOT"

# flags sharing names with TrainConfig fields
_TRAIN_FIELDS = ("epochs", "lr", "batch_size", "alphas", "gamma", "threshold",
                 "lambda_coeff", "mu")


def _add_train_flags(p):
    p.add_argument("--preset", choices=["threshold-sweep", "ce-vs-focal", "main"])
    p.add_argument("--config", help="JSON config file with the standard field names")
    p.add_argument("--epochs", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--batch-size", dest="batch_size", type=int)
    p.add_argument("--alphas", help="comma-separated per-class focal weights")
    p.add_argument("--gamma", type=float)
    p.add_argument("--threshold", type=float)
    p.add_argument("--lambda", dest="lambda_coeff", type=float)
    p.add_argument("--mu", type=int)
    p.add_argument("--device", default="cpu")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="marineseg")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("split", help="create a labeled/unlabeled split manifest")
    p.add_argument("--data", default=os.environ.get(DATA_ENV))
    p.add_argument("--percent", type=float, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="manifest path (default <data>/split_m<percent>.json)")

    p = sub.add_parser("synth", help="generate a synthetic dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--n-patches", type=int, default=40)
    p.add_argument("--n-val", type=int, default=0)
    p.add_argument("--n-test", type=int, default=0)
    p.add_argument("--size", type=int, default=64)
    p.add_argument("--label-fraction", type=float, default=0.5)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("train", help="train a model")
    p.add_argument("--data", default=os.environ.get(DATA_ENV))
    p.add_argument("--mode", choices=["fs", "ssl"], default="ssl")
    p.add_argument("--percent", type=int)
    p.add_argument("--split", help="existing split manifest to reuse")
    p.add_argument("--out", help="run directory")
    p.add_argument("--seed", type=int, default=0)
    _add_train_flags(p)

    p = sub.add_parser("eval", help="evaluate a checkpoint on the test split")
    p.add_argument("--data", default=os.environ.get(DATA_ENV))
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--bandstats", help="bandstats.json (default: next to checkpoint)")
    p.add_argument("--device", default="cpu")

    p = sub.add_parser("analyze", help="analysis utilities")
    asub = p.add_subparsers(dest="analysis", required=True)
    pv = asub.add_parser("variance", help="zero-mean variance of IoU-difference rows")
    pv.add_argument("--table", required=True,
                    help="CSV: class name followed by signed differences")

    p = sub.add_parser("plot", help="render loss and mIoU curves from a run")
    p.add_argument("--run", required=True)
    p.add_argument("--out", help="output image (default <run>/curves.png)")

    p = sub.add_parser("budget", help="report model parameter/FLOP budget")
    p.add_argument("--config", default="ref",
                   help="'ref' or comma-separated channel widths")
    return parser


def _fail(code: int, msg: str) -> int:
    print(f"error: {msg}", file=sys.stderr)
    return code


def _cmd_split(args) -> int:
    if not args.data:
        return _fail(2, f"--data or ${DATA_ENV} required")
    ds = DiskDataset(args.data)
    registry_path = Path(args.data) / "nan_registry.json"
    flagged = []
    if registry_path.exists():
        flagged = json.loads(registry_path.read_text()).get("train", [])
    else:
        flagged = [i for i in DEFAULT_NAN_REGISTRY["train"] if i in ds.train_ids]
    ids = [i for i in ds.train_ids
           if not registry_from_lists(ds.train_ids, flagged)[i]]
    maps = {pid: ds.load(pid)[1] for pid in ids}
    split = splits_mod.two_training_sets_split(ids, maps, args.percent, args.seed)
    out = Path(args.out) if args.out else Path(args.data) / f"split_m{int(args.percent)}.json"
    splits_mod.save_manifest(out, split)
    stats = compute_band_stats(ds.load(pid)[0] for pid in ids)
    out.with_name(out.stem + "_bandstats.json").write_text(stats.to_json() + "\n")
    print(f"wrote {out}")
    for name, frac in sorted(split.per_class_fraction.items()):
        print(f"  {name}: {frac:.2f}%")
    return 0


def _cmd_synth(args) -> int:
    generate_synthetic_dataset(args.out, n_patches=args.n_patches,
                               size=(args.size, args.size),
                               label_fraction=args.label_fraction,
                               seed=args.seed, n_val=args.n_val,
                               n_test=args.n_test)
    print(f"wrote synthetic dataset under {args.out}")
    return 0


def _load_config_file(path) -> dict:
    values = json.loads(Path(path).read_text())
    unknown = set(values) - set(_TRAIN_FIELDS)
    if unknown:
        raise ConfigError(f"unknown config fields: {sorted(unknown)}")
    return values


def _build_train_config(args) -> TrainConfig:
    mode = FULLY_SUPERVISED if args.mode == "fs" else SEMI_SUPERVISED
    if args.preset:
        cfg = resolve_preset(args.preset, m=args.percent, mode=mode, seed=args.seed)
        values = {f: getattr(cfg, f) for f in _TRAIN_FIELDS}
    else:
        defaults = TrainConfig(mode=mode)
        values = {f: getattr(defaults, f) for f in _TRAIN_FIELDS}
    if args.config:
        values.update(_load_config_file(args.config))
    for f in _TRAIN_FIELDS:
        flag = getattr(args, f, None)
        if flag is not None:
            values[f] = flag
    if isinstance(values.get("alphas"), str):
        values["alphas"] = tuple(float(v) for v in values["alphas"].split(","))
    elif isinstance(values.get("alphas"), list):
        values["alphas"] = tuple(values["alphas"])
    return TrainConfig(mode=mode, seed=args.seed,
                       labeled_percentage=args.percent or 100, **values)


def _cmd_train(args) -> int:
    if not args.data:
        return _fail(2, f"--data or ${DATA_ENV} required")
    cfg = _build_train_config(args)
    ds = DiskDataset(args.data)
    if args.split:
        split = splits_mod.load_manifest(args.split)
    elif args.percent is not None and args.percent < 100:
        maps = {pid: ds.load(pid)[1] for pid in ds.train_ids}
        split = splits_mod.two_training_sets_split(ds.train_ids, maps,
                                                   args.percent, args.seed)
    else:
        split = splits_mod.SplitAssignment(
            labeled_ids=frozenset(ds.train_ids), unlabeled_ids=frozenset(),
            target_fraction=100.0, seed=args.seed, per_class_fraction={})
    model = UNet(seed=cfg.seed).to(args.device)
    if cfg.mode == SEMI_SUPERVISED:
        report = train_fixmatch(cfg, split, ds, model, out_dir=args.out)
    else:
        report = train_supervised(cfg, split, ds, model, out_dir=args.out)
    if ds.test_ids and report.best_checkpoint:
        report = select_and_evaluate(report, (ds, None), (ds, None),
                                     class_names=ds.scheme.class_names)
        print(report.test_table)
        print(f"test mIoU: {report.test_miou:.4f}")
    print(f"run directory: {report.run_dir}")
    if report.best_epoch is not None:
        print(f"best epoch: {report.best_epoch} (val mIoU {report.best_val_miou:.4f})")
    return 0


def _cmd_eval(args) -> int:
    if not args.data:
        return _fail(2, f"--data or ${DATA_ENV} required")
    import torch

    model, meta = load_checkpoint(args.checkpoint)
    model = model.to(args.device)
    stats_path = (Path(args.bandstats) if args.bandstats
                  else Path(args.checkpoint).parent / "bandstats.json")
    stats = BandStats.from_json(stats_path.read_text())
    ds = DiskDataset(args.data)
    ids = ds.test_ids or ds.train_ids
    cm = ConfusionMatrix(model.cfg.num_classes)
    with torch.no_grad():
        for pid in ids:
            patch, seg = ds.load(pid)
            x = torch.from_numpy(stats.normalize(patch.bands).astype(np.float32))
            probs = model.predict_probs(x.unsqueeze(0).to(args.device))
            cm.accumulate(probs.argmax(dim=1).squeeze(0).cpu().numpy(), seg.labels)
    print(format_confusion_table(cm, ds.scheme.class_names))
    print(f"mIoU: {miou(iou_per_class(cm)):.4f} "
          f"(checkpoint epoch {meta['epoch']}, val mIoU {meta['val_miou']:.4f})")
    return 0


def _cmd_analyze(args) -> int:
    rows = []
    for line in Path(args.table).read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = [p.strip() for p in line.split(",")]
        rows.append((parts[0], [float(v) for v in parts[1:]]))
    results = [(name, score_difference_variance(vals)) for name, vals in rows]
    results.sort(key=lambda nv: -nv[1])
    for name, var in results:
        print(f"{name}: {var:.2f}")
    return 0


def _cmd_plot(args) -> int:
    import csv

    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    run = Path(args.run)
    with open(run / "epochs.csv") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        return _fail(3, "run has no completed epochs")
    epochs = [int(r["epoch"]) for r in rows]
    fig, axes = plt.subplots(1, 2, figsize=(11, 4))
    for key, label in (("loss_sup", "supervised"), ("loss_unsup", "unsupervised"),
                       ("loss_total", "total")):
        axes[0].plot(epochs, [float(r[key]) for r in rows], label=label)
    axes[0].set_xlabel("epoch")
    axes[0].set_ylabel("training loss")
    axes[0].legend()
    axes[1].plot(epochs, [float(r["val_miou"]) for r in rows], label="val mIoU")
    axes[1].set_xlabel("epoch")
    axes[1].set_ylabel("validation mIoU")
    axes[1].legend()
    out = Path(args.out) if args.out else run / "curves.png"
    fig.tight_layout()
    fig.savefig(out)
    print(f"wrote {out}")
    return 0


def _cmd_budget(args) -> int:
    if args.config == "ref":
        cfg = UNetConfig()
    else:
        widths = tuple(int(v) for v in args.config.split(","))
        cfg = UNetConfig(channel_widths=widths)
    rep = budget_report(cfg)
    dev = 100.0 * (rep.param_count - REFERENCE_PARAM_TARGET) / REFERENCE_PARAM_TARGET
    print(f"channel widths: {cfg.channel_widths} (bottleneck {cfg.channel_widths[-1] * 2})")
    print(f"parameters: {rep.param_count} (target {REFERENCE_PARAM_TARGET}, "
          f"deviation {dev:+.2f}%)")
    print(f"analytic GFLOPs at (11, 256, 256): {rep.gflops:.2f} "
          f"(target {REFERENCE_GFLOP_TARGET})")
    print(f"serialized float32 size: {rep.serialized_size} bytes "
          f"({rep.serialized_size / 2**20:.2f} MiB)")
    return 0


_HANDLERS = {
    "split": _cmd_split,
    "synth": _cmd_synth,
    "train": _cmd_train,
    "eval": _cmd_eval,
    "analyze": _cmd_analyze,
    "plot": _cmd_plot,
    "budget": _cmd_budget,
}


def run(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _HANDLERS[args.command](args)
    except InfeasibleSplitError as exc:
        return _fail(4, str(exc))
    except (MarinesegError, FileNotFoundError, ValueError) as exc:
        return _fail(3, str(exc))


def main() -> None:
    sys.exit(run())
