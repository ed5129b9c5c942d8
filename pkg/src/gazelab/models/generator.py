"""Residual encoder-decoder generator conditioned on a target gaze."""

from __future__ import annotations

import torch
from torch import nn


class ResidualBlock(nn.Module):
    """Conv-IN-ReLU-Conv-IN with an additive skip connection."""

    def __init__(self, channels: int):
        super().__init__()
        self.block = nn.Sequential(
            nn.Conv2d(channels, channels, kernel_size=3, stride=1, padding=1),
            nn.InstanceNorm2d(channels, affine=True),
            nn.ReLU(inplace=True),
            nn.Conv2d(channels, channels, kernel_size=3, stride=1, padding=1),
            nn.InstanceNorm2d(channels, affine=True),
        )

    def forward(self, x):
        return x + self.block(x)


def broadcast_condition(x: torch.Tensor, cond: torch.Tensor) -> torch.Tensor:
    """Expand an (N, 2) condition to constant planes and concat depth-wise."""
    if x.dim() != 4:
        raise ValueError(f"expected NCHW image batch, got shape {tuple(x.shape)}")
    if cond.dim() != 2 or cond.shape[0] != x.shape[0]:
        raise ValueError(
            f"condition shape {tuple(cond.shape)} does not match batch {x.shape[0]}"
        )
    planes = cond[:, :, None, None].expand(-1, -1, x.shape[2], x.shape[3])
    return torch.cat([x, planes.to(x.dtype)], dim=1)


class GeneratorNet(nn.Module):
    """64x64 image-to-image generator.

    7x7 stem, two stride-2 downsampling convolutions, a stack of residual
    blocks at 1/4 resolution, two stride-2 transposed convolutions and a
    7x7 tanh head.  Instance norm everywhere except the output layer.
    The gaze condition enters as two constant input planes.
    """

    def __init__(
        self,
        base_channels: int = 64,
        n_residual_blocks: int = 6,
        in_channels: int = 3,
        condition_dim: int = 2,
    ):
        super().__init__()
        self.base_channels = base_channels
        self.n_residual_blocks = n_residual_blocks
        self.condition_dim = condition_dim
        c = base_channels

        self.stem = nn.Sequential(
            nn.Conv2d(in_channels + condition_dim, c, 7, 1, 3),
            nn.InstanceNorm2d(c, affine=True),
            nn.ReLU(inplace=True),
        )
        self.down = nn.Sequential(
            nn.Conv2d(c, 2 * c, 4, 2, 1),
            nn.InstanceNorm2d(2 * c, affine=True),
            nn.ReLU(inplace=True),
            nn.Conv2d(2 * c, 4 * c, 4, 2, 1),
            nn.InstanceNorm2d(4 * c, affine=True),
            nn.ReLU(inplace=True),
        )
        self.blocks = nn.Sequential(
            *[ResidualBlock(4 * c) for _ in range(n_residual_blocks)]
        )
        self.up = nn.Sequential(
            nn.ConvTranspose2d(4 * c, 2 * c, 4, 2, 1),
            nn.InstanceNorm2d(2 * c, affine=True),
            nn.ReLU(inplace=True),
            nn.ConvTranspose2d(2 * c, c, 4, 2, 1),
            nn.InstanceNorm2d(c, affine=True),
            nn.ReLU(inplace=True),
        )
        self.head = nn.Sequential(nn.Conv2d(c, in_channels, 7, 1, 3), nn.Tanh())

    def forward(self, x: torch.Tensor, cond: torch.Tensor) -> torch.Tensor:
        h = broadcast_condition(x, cond)
        h = self.stem(h)
        h = self.down(h)
        h = self.blocks(h)
        h = self.up(h)
        return self.head(h)

    def architecture_descriptor(self) -> dict:
        return {
            "class": "GeneratorNet",
            "base_channels": self.base_channels,
            "n_residual_blocks": self.n_residual_blocks,
            "condition_dim": self.condition_dim,
        }
