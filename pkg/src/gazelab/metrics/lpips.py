"""Learned perceptual image patch similarity.

The score is a per-tap weighted squared distance between channel-wise
unit-normalized deep features, averaged over spatial positions and summed
over taps.  Two backbone modes:

- ``alexnet``: the standard 5-conv feature stack.  Published linear
  weights and conv weights load from user-supplied files; otherwise a
  seeded random initialization keeps the metric deterministic offline.
- ``toy``: identity features with unit weights, for closed-form tests.
"""

from __future__ import annotations

import math
from pathlib import Path
from typing import Optional

import numpy as np
import torch
from torch import nn

from ..errors import ConfigError

_EPS = 1e-10

# Input scaling used by the published metric weights, applied to [-1, 1] RGB.
_SHIFT = (-0.030, -0.088, -0.188)
_SCALE = (0.458, 0.448, 0.450)


def normalize_channels(features: torch.Tensor) -> torch.Tensor:
    """Scale every (h, w) feature vector of an NCHW tensor to unit norm."""
    norms = features.pow(2).sum(dim=1, keepdim=True).sqrt()
    return features / (norms + _EPS)


class IdentityFeatures(nn.Module):
    """Single tap exposing the input itself."""

    def __init__(self, channels: int = 3):
        super().__init__()
        self.tap_channels = {1: channels}

    def forward(self, x: torch.Tensor) -> dict[int, torch.Tensor]:
        return {1: x}


class AlexNetFeatures(nn.Module):
    """Conv stack with taps after each of the five ReLU stages."""

    def __init__(self, weights_path: Optional[Path] = None, seed: int = 0):
        super().__init__()
        self.stage1 = nn.Sequential(nn.Conv2d(3, 64, 11, 4, 2), nn.ReLU())
        self.stage2 = nn.Sequential(nn.MaxPool2d(3, 2), nn.Conv2d(64, 192, 5, 1, 2), nn.ReLU())
        self.stage3 = nn.Sequential(nn.MaxPool2d(3, 2), nn.Conv2d(192, 384, 3, 1, 1), nn.ReLU())
        self.stage4 = nn.Sequential(nn.Conv2d(384, 256, 3, 1, 1), nn.ReLU())
        self.stage5 = nn.Sequential(nn.Conv2d(256, 256, 3, 1, 1), nn.ReLU())
        self.tap_channels = {1: 64, 2: 192, 3: 384, 4: 256, 5: 256}

        if weights_path is not None:
            self._load(Path(weights_path))
        else:
            gen = torch.Generator().manual_seed(seed)
            for module in self.modules():
                if isinstance(module, nn.Conv2d):
                    fan_in = module.in_channels * module.kernel_size[0] * module.kernel_size[1]
                    module.weight.data.normal_(0.0, math.sqrt(2.0 / fan_in), generator=gen)
                    module.bias.data.zero_()
        for p in self.parameters():
            p.requires_grad_(False)
        self.eval()

    def _load(self, path: Path) -> None:
        if not path.exists():
            raise ConfigError(f"backbone weights file not found: {path}")
        state = torch.load(path, map_location="cpu", weights_only=True)
        convs = [m for m in self.modules() if isinstance(m, nn.Conv2d)]
        keys = sorted(
            {
                int(k.split(".")[1])
                for k in state
                if k.startswith("features.") and k.endswith(".weight")
            }
        )
        if len(keys) != len(convs):
            raise ConfigError(
                f"weights file has {len(keys)} conv layers, expected {len(convs)}"
            )
        for idx, conv in zip(keys, convs):
            conv.weight.data.copy_(state[f"features.{idx}.weight"])
            conv.bias.data.copy_(state[f"features.{idx}.bias"])

    def forward(self, x: torch.Tensor) -> dict[int, torch.Tensor]:
        shift = x.new_tensor(_SHIFT).view(1, 3, 1, 1)
        scale = x.new_tensor(_SCALE).view(1, 3, 1, 1)
        h = (x - shift) / scale
        out = {}
        for i, stage in enumerate(
            (self.stage1, self.stage2, self.stage3, self.stage4, self.stage5), start=1
        ):
            h = stage(h)
            out[i] = h
        return out


class LpipsModel:
    """Feature extractor plus per-tap non-negative channel weights."""

    def __init__(self, extractor: nn.Module, weights: Optional[dict[int, np.ndarray]] = None):
        self.extractor = extractor
        self.taps = sorted(extractor.tap_channels)
        if weights is None:
            weights = {
                t: np.ones(extractor.tap_channels[t], dtype=np.float32) for t in self.taps
            }
        for tap, w in weights.items():
            if np.any(np.asarray(w) < 0):
                raise ValueError(f"tap {tap} has negative channel weights")
        self.weights = {
            t: torch.from_numpy(np.asarray(weights[t], dtype=np.float32))
            for t in self.taps
        }
        self.weight_source = getattr(extractor, "weight_source", "unit")

    @classmethod
    def toy(cls, channels: int = 3) -> "LpipsModel":
        """Identity features with unit weights; exact and dependency-free."""
        return cls(IdentityFeatures(channels))

    @classmethod
    def alexnet(
        cls,
        backbone_weights: Optional[Path] = None,
        linear_weights: Optional[Path] = None,
        seed: int = 0,
    ) -> "LpipsModel":
        extractor = AlexNetFeatures(weights_path=backbone_weights, seed=seed)
        weights = None
        if linear_weights is not None:
            weights = _load_linear_weights(Path(linear_weights), extractor.tap_channels)
        return cls(extractor, weights)

    def distance_batch(self, x: np.ndarray, x0: np.ndarray) -> np.ndarray:
        """LPIPS per pair for (N, H, W, 3) unit-range image batches."""
        x = np.asarray(x, dtype=np.float32)
        x0 = np.asarray(x0, dtype=np.float32)
        if x.shape != x0.shape:
            raise ValueError(f"image batches differ in shape: {x.shape} vs {x0.shape}")
        with torch.no_grad():
            tx = torch.from_numpy(x).permute(0, 3, 1, 2)
            tx0 = torch.from_numpy(x0).permute(0, 3, 1, 2)
            feats = self.extractor(tx)
            feats0 = self.extractor(tx0)
            total = torch.zeros(x.shape[0])
            for tap in self.taps:
                diff = normalize_channels(feats[tap]) - normalize_channels(feats0[tap])
                w = self.weights[tap].view(1, -1, 1, 1)
                total += (w * diff).pow(2).sum(dim=1).mean(dim=(1, 2))
        return total.numpy()

    def distance(self, x: np.ndarray, x0: np.ndarray) -> float:
        return float(self.distance_batch(x[None], x0[None])[0])


def _load_linear_weights(path: Path, tap_channels: dict[int, int]) -> dict[int, np.ndarray]:
    """Read published per-channel linear weights (lin0..linN 1x1 convs)."""
    if not path.exists():
        raise ConfigError(f"linear weights file not found: {path}")
    state = torch.load(path, map_location="cpu", weights_only=True)
    out = {}
    for i, tap in enumerate(sorted(tap_channels)):
        key_new = f"lin{i}.model.1.weight"
        key_old = f"lins.{i}.model.1.weight"
        if key_new in state:
            w = state[key_new]
        elif key_old in state:
            w = state[key_old]
        else:
            raise ConfigError(f"no linear weights for tap {tap} in {path}")
        out[tap] = np.clip(w.reshape(-1).numpy(), 0.0, None)
        if out[tap].shape[0] != tap_channels[tap]:
            raise ConfigError(
                f"tap {tap} weight length {out[tap].shape[0]} != {tap_channels[tap]}"
            )
    return out
