"""Compact U-Net sized for an onboard deployment budget.

Encoder levels are two 3x3 convs plus 2x2 max pooling; the decoder mirrors
them with bilinear x2 upsampling and concatenated (not summed) skip features;
a final 1x1 conv maps to class scores. The reference width ladder (21, 42, 84)
with a 168-wide bottleneck lands at 840,572 parameters, within 0.1% of the
841,099 target.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
from torch import nn
from torch.nn import functional as F

from .errors import ShapeError

REFERENCE_PARAM_TARGET = 841_099
REFERENCE_GFLOP_TARGET = 2.07


@dataclass(frozen=True)
class UNetConfig:
    in_bands: int = 11
    num_classes: int = 5
    channel_widths: tuple[int, ...] = (21, 42, 84)  # bottleneck is 2x the last

    @property
    def depth(self) -> int:
        return len(self.channel_widths)


@dataclass(frozen=True)
class ModelBudgetReport:
    param_count: int
    flops: float  # for one inference on (in_bands, 256, 256)
    serialized_size: int  # bytes, 32-bit weights

    @property
    def gflops(self) -> float:
        return self.flops / 1e9


def _block(cin, cout):
    return nn.Sequential(
        nn.Conv2d(cin, cout, kernel_size=3, padding=1),
        nn.ReLU(inplace=True),
        nn.Conv2d(cout, cout, kernel_size=3, padding=1),
        nn.ReLU(inplace=True),
    )


class UNet(nn.Module):
    def __init__(self, cfg: UNetConfig | None = None, seed: int | None = None):
        if seed is not None:
            torch.manual_seed(seed)
        super().__init__()
        self.cfg = cfg or UNetConfig()
        widths = self.cfg.channel_widths
        prev = self.cfg.in_bands
        self.encoders = nn.ModuleList()
        for w in widths:
            self.encoders.append(_block(prev, w))
            prev = w
        bott = widths[-1] * 2
        self.bottleneck = _block(prev, bott)
        prev = bott
        self.decoders = nn.ModuleList()
        for w in reversed(widths):
            self.decoders.append(_block(prev + w, w))
            prev = w
        self.head = nn.Conv2d(prev, self.cfg.num_classes, kernel_size=1)
        self.pool = nn.MaxPool2d(2)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        h, w = x.shape[-2:]
        div = 2 ** self.cfg.depth
        if h % div or w % div:
            raise ShapeError(f"input {h}x{w} not divisible by 2^{self.cfg.depth}")
        skips = []
        for enc in self.encoders:
            x = enc(x)
            skips.append(x)
            x = self.pool(x)
        x = self.bottleneck(x)
        for dec, skip in zip(self.decoders, reversed(skips)):
            x = F.interpolate(x, scale_factor=2, mode="bilinear", align_corners=False)
            x = dec(torch.cat([x, skip], dim=1))
        return self.head(x)

    def predict_probs(self, x: torch.Tensor) -> torch.Tensor:
        return torch.softmax(self.forward(x), dim=1)


def _conv_layers(cfg: UNetConfig):
    """(cin, cout, kernel, resolution_divisor) for every conv, in forward order."""
    layers = []
    prev, div = cfg.in_bands, 1
    for w in cfg.channel_widths:
        layers += [(prev, w, 3, div), (w, w, 3, div)]
        prev, div = w, div * 2
    bott = cfg.channel_widths[-1] * 2
    layers += [(prev, bott, 3, div), (bott, bott, 3, div)]
    prev = bott
    for w in reversed(cfg.channel_widths):
        div //= 2
        layers += [(prev + w, w, 3, div), (w, w, 3, div)]
        prev = w
    layers.append((prev, cfg.num_classes, 1, 1))
    return layers


def budget_report(cfg: UNetConfig | None = None, input_hw=(256, 256)) -> ModelBudgetReport:
    """Closed-form parameter and FLOP count; never instantiates the network.

    FLOPs use 2 * k^2 * C_in * C_out * H_out * W_out per conv layer at the
    given input resolution.
    """
    cfg = cfg or UNetConfig()
    h, w = input_hw
    params = 0
    flops = 0.0
    for cin, cout, k, div in _conv_layers(cfg):
        params += k * k * cin * cout + cout
        flops += 2.0 * k * k * cin * cout * (h // div) * (w // div)
    return ModelBudgetReport(param_count=params, flops=flops,
                             serialized_size=4 * params)


CHECKPOINT_VERSION = 1


def save_checkpoint(path, model: UNet, epoch: int, val_miou: float) -> None:
    torch.save({
        "version": CHECKPOINT_VERSION,
        "config": {
            "in_bands": model.cfg.in_bands,
            "num_classes": model.cfg.num_classes,
            "channel_widths": list(model.cfg.channel_widths),
        },
        "epoch": epoch,
        "val_miou": val_miou,
        "state_dict": model.state_dict(),
    }, path)


def load_checkpoint(path):
    payload = torch.load(path, map_location="cpu", weights_only=True)
    if payload.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {payload.get('version')}")
    cfg = UNetConfig(in_bands=payload["config"]["in_bands"],
                     num_classes=payload["config"]["num_classes"],
                     channel_widths=tuple(payload["config"]["channel_widths"]))
    model = UNet(cfg)
    model.load_state_dict(payload["state_dict"])
    return model, {"epoch": payload["epoch"], "val_miou": payload["val_miou"]}
