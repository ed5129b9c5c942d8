"""Dual-headed critic: realness score map plus gaze regression.

Both heads share one strided convolutional backbone (64x64 input down to
a 2x2 feature map).  The critic head emits a 3x3 score map whose mean is
the scalar realness score; the gaze head emits a normalized (yaw, pitch)
estimate.  No normalization layers anywhere: the critic is trained under
a gradient penalty, which interacts badly with batch statistics.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
from torch import nn

LEAKY_SLOPE = 0.01


@dataclass
class DualCriticOutput:
    critic_map: torch.Tensor  # (N, 1, 3, 3)
    critic_scalar: torch.Tensor  # (N,)
    gaze_estimate: torch.Tensor  # (N, 2) normalized units


class DiscriminatorBackbone(nn.Module):
    """Five stride-2 4x4 convolutions with leaky ReLU."""

    def __init__(self, base_channels: int = 64, in_channels: int = 3):
        super().__init__()
        chans = [base_channels * 2**i for i in range(5)]
        layers = []
        prev = in_channels
        for c in chans:
            layers += [nn.Conv2d(prev, c, 4, 2, 1), nn.LeakyReLU(LEAKY_SLOPE)]
            prev = c
        self.layers = nn.Sequential(*layers)
        self.out_channels = prev

    def forward(self, x):
        return self.layers(x)


class DualDiscriminatorNet(nn.Module):
    def __init__(self, base_channels: int = 64, in_channels: int = 3):
        super().__init__()
        self.base_channels = base_channels
        self.backbone = DiscriminatorBackbone(base_channels, in_channels)
        # 2x2 kernel with padding 1 maps the 2x2 backbone output to a 3x3
        # score map; the gaze head's unpadded 2x2 kernel maps it to 1x1x2.
        self.critic_head = nn.Conv2d(self.backbone.out_channels, 1, 2, 1, 1)
        self.gaze_head = nn.Conv2d(self.backbone.out_channels, 2, 2, 1, 0)

    def forward(self, x: torch.Tensor) -> DualCriticOutput:
        if x.dim() != 4 or x.shape[1] != 3:
            raise ValueError(f"expected (N, 3, H, W) input, got {tuple(x.shape)}")
        features = self.backbone(x)
        critic_map = self.critic_head(features)
        gaze = self.gaze_head(features).flatten(1)
        return DualCriticOutput(
            critic_map=critic_map,
            critic_scalar=critic_map.mean(dim=(1, 2, 3)),
            gaze_estimate=gaze,
        )

    def critic_score(self, x: torch.Tensor) -> torch.Tensor:
        """Scalar realness score per sample (mean of the score map)."""
        return self.critic_head(self.backbone(x)).mean(dim=(1, 2, 3))

    def gaze_parameters(self):
        return list(self.gaze_head.parameters())

    def architecture_descriptor(self) -> dict:
        return {"class": "DualDiscriminatorNet", "base_channels": self.base_channels}


class GazeEstimatorNet(nn.Module):
    """Standalone gaze regressor with the same backbone + gaze head layout."""

    def __init__(self, base_channels: int = 64, in_channels: int = 3):
        super().__init__()
        self.base_channels = base_channels
        self.backbone = DiscriminatorBackbone(base_channels, in_channels)
        self.gaze_head = nn.Conv2d(self.backbone.out_channels, 2, 2, 1, 0)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.gaze_head(self.backbone(x)).flatten(1)

    def architecture_descriptor(self) -> dict:
        return {"class": "GazeEstimatorNet", "base_channels": self.base_channels}
