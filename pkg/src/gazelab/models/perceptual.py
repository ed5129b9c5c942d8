"""Frozen convolutional feature extractor for perceptual losses.

The architecture is the classic 13-conv 5-block stack (64-64 / 128-128 /
256-256-256 / 512-512-512 / 512-512-512 with 2x2 max pooling between
blocks).  Taps 1..5 expose the post-activation output of the last
convolution of each block; for 64x64 input their spatial sizes are
64, 32, 16, 8 and 4.

Weights come from a user-supplied serialized file in the standard
``features.N.weight`` layout when available.  Without one, a seeded
random initialization is used: feature distances computed on fixed random
projections are still deterministic, differentiable training signals, so
the whole stack runs offline.
"""

from __future__ import annotations

import math
from pathlib import Path
from typing import Iterable, Sequence

import torch
from torch import nn

from ..errors import ConfigError

BLOCK_CHANNELS = ((64, 64), (128, 128), (256, 256, 256), (512, 512, 512), (512, 512, 512))

# Channel statistics the published weights were trained with, applied
# after mapping network inputs from [-1, 1] back to [0, 1].
INPUT_MEAN = (0.485, 0.456, 0.406)
INPUT_STD = (0.229, 0.224, 0.225)


class PerceptualBackbone(nn.Module):
    def __init__(
        self,
        width_multiplier: float = 1.0,
        weights_path: str | Path | None = None,
        seed: int = 0,
        in_channels: int = 3,
    ):
        super().__init__()
        self.width_multiplier = width_multiplier
        self.weight_source = str(weights_path) if weights_path else f"seeded-random:{seed}"

        self.blocks = nn.ModuleList()
        prev = in_channels
        for block in BLOCK_CHANNELS:
            layers = []
            for c in block:
                c = max(1, int(round(c * width_multiplier)))
                layers += [nn.Conv2d(prev, c, 3, 1, 1), nn.ReLU(inplace=True)]
                prev = c
            self.blocks.append(nn.Sequential(*layers))
        self.pool = nn.MaxPool2d(2, 2)

        if weights_path is not None:
            self._load_pretrained(Path(weights_path))
        else:
            self._seeded_init(seed)

        for p in self.parameters():
            p.requires_grad_(False)
        self.eval()

        mean = torch.tensor(INPUT_MEAN).view(1, 3, 1, 1)
        std = torch.tensor(INPUT_STD).view(1, 3, 1, 1)
        self.register_buffer("input_mean", mean)
        self.register_buffer("input_std", std)

    def _seeded_init(self, seed: int) -> None:
        gen = torch.Generator().manual_seed(seed)
        for conv in self._convs():
            fan_in = conv.in_channels * conv.kernel_size[0] * conv.kernel_size[1]
            conv.weight.data.normal_(0.0, math.sqrt(2.0 / fan_in), generator=gen)
            conv.bias.data.zero_()

    def _convs(self) -> Iterable[nn.Conv2d]:
        for block in self.blocks:
            for layer in block:
                if isinstance(layer, nn.Conv2d):
                    yield layer

    def _load_pretrained(self, path: Path) -> None:
        if self.width_multiplier != 1.0:
            raise ConfigError("pretrained weights require width_multiplier=1.0")
        if not path.exists():
            raise ConfigError(f"backbone weights file not found: {path}")
        state = torch.load(path, map_location="cpu", weights_only=True)
        # Accept the standard sequential layout: conv weights live at
        # features.{0,2,5,7,10,12,14,17,19,21,24,26,28}.
        conv_keys = sorted(
            {
                int(k.split(".")[1])
                for k in state
                if k.startswith("features.") and k.endswith(".weight")
            }
        )
        convs = list(self._convs())
        if len(conv_keys) != len(convs):
            raise ConfigError(
                f"weights file has {len(conv_keys)} conv layers, expected {len(convs)}"
            )
        for idx, conv in zip(conv_keys, convs):
            conv.weight.data.copy_(state[f"features.{idx}.weight"])
            conv.bias.data.copy_(state[f"features.{idx}.bias"])

    def normalize_input(self, x: torch.Tensor) -> torch.Tensor:
        """Map a [-1, 1] image batch to the backbone's input statistics."""
        x01 = (x + 1.0) / 2.0
        return (x01 - self.input_mean.to(x.dtype)) / self.input_std.to(x.dtype)

    def forward(
        self, x: torch.Tensor, taps: Sequence[int] = (1, 2, 3, 4, 5)
    ) -> dict[int, torch.Tensor]:
        """Activations at the requested block taps for a [-1, 1] input batch."""
        bad = [t for t in taps if t not in (1, 2, 3, 4, 5)]
        if bad:
            raise ValueError(f"unknown taps {bad}; available taps are 1..5")
        h = self.normalize_input(x)
        out: dict[int, torch.Tensor] = {}
        deepest = max(taps)
        for i, block in enumerate(self.blocks, start=1):
            h = block(h)
            if i in taps:
                out[i] = h
            if i == deepest:
                break
            h = self.pool(h)
        return out

    def architecture_descriptor(self) -> dict:
        return {
            "class": "PerceptualBackbone",
            "width_multiplier": self.width_multiplier,
        }


class PerceptualRegressor(nn.Module):
    """Perceptual-backbone feature stack with a fresh 2-output regression head.

    Used as the trainable gaze estimator in the data-augmentation study;
    unlike :class:`PerceptualBackbone`, all parameters are trainable.
    """

    def __init__(self, width_multiplier: float = 1.0, seed: int = 0):
        super().__init__()
        self.width_multiplier = width_multiplier
        backbone = PerceptualBackbone(width_multiplier=width_multiplier, seed=seed)
        for p in backbone.parameters():
            p.requires_grad_(True)
        backbone.train()
        self.features = backbone
        feat_dim = max(1, int(round(512 * width_multiplier)))
        self.head = nn.Linear(feat_dim, 2)
        gen = torch.Generator().manual_seed(seed + 1)
        self.head.weight.data.normal_(0.0, 1.0 / math.sqrt(feat_dim), generator=gen)
        self.head.bias.data.zero_()

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        deepest = self.features(x, taps=(5,))[5]
        pooled = deepest.mean(dim=(2, 3))
        return self.head(pooled)

    def architecture_descriptor(self) -> dict:
        return {
            "class": "PerceptualRegressor",
            "width_multiplier": self.width_multiplier,
        }
