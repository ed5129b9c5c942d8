"""Parameter initialization and versioned checkpoint files."""

from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Optional

import torch
from torch import nn

from ..errors import CheckpointError

FORMAT_VERSION = 1


def init_parameters(net: nn.Module, seed: int, scheme: str = "normal") -> nn.Module:
    """Deterministically initialize a network in place.

    ``normal``: zero-mean gaussian with sigma 0.02 for conv and linear
    kernels, zero biases, identity affine parameters for normalization
    layers.
    """
    if scheme != "normal":
        raise ValueError(f"unknown init scheme {scheme!r}")
    gen = torch.Generator().manual_seed(seed & 0x7FFFFFFF)
    for module in net.modules():
        if isinstance(module, (nn.Conv2d, nn.ConvTranspose2d, nn.Linear)):
            module.weight.data.normal_(0.0, 0.02, generator=gen)
            if module.bias is not None:
                module.bias.data.zero_()
        elif isinstance(module, nn.InstanceNorm2d) and module.affine:
            module.weight.data.fill_(1.0)
            module.bias.data.zero_()
    return net


def architecture_hash(descriptor: dict) -> str:
    canonical = json.dumps(descriptor, sort_keys=True)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]


def save_checkpoint(
    path: Path,
    nets: dict[str, nn.Module],
    optimizers: Optional[dict[str, torch.optim.Optimizer]] = None,
    **extra,
) -> Path:
    """Write a versioned checkpoint containing nets, optimizers and metadata."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    arch = {name: net.architecture_descriptor() for name, net in nets.items()}
    payload = {
        "format_version": FORMAT_VERSION,
        "arch": arch,
        "arch_hash": architecture_hash(arch),
        "state": {name: net.state_dict() for name, net in nets.items()},
        "optimizers": {
            name: opt.state_dict() for name, opt in (optimizers or {}).items()
        },
        "extra": extra,
    }
    torch.save(payload, path)
    return path


def load_checkpoint(path: Path, expected_arch: Optional[dict] = None) -> dict:
    """Read and validate a checkpoint payload.

    When ``expected_arch`` is given (a {name: descriptor} map), the stored
    architecture hash must match it exactly.
    """
    path = Path(path)
    if not path.exists():
        raise CheckpointError(f"checkpoint not found: {path}")
    try:
        payload = torch.load(path, map_location="cpu", weights_only=False)
    except Exception as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from exc
    if not isinstance(payload, dict) or "format_version" not in payload:
        raise CheckpointError(f"{path} is not a recognized checkpoint file")
    if payload["format_version"] != FORMAT_VERSION:
        raise CheckpointError(
            f"{path} has format version {payload['format_version']}, "
            f"this build reads version {FORMAT_VERSION}"
        )
    if payload["arch_hash"] != architecture_hash(payload["arch"]):
        raise CheckpointError(f"{path} architecture hash does not match contents")
    if expected_arch is not None:
        expected_hash = architecture_hash(expected_arch)
        if payload["arch_hash"] != expected_hash:
            raise CheckpointError(
                f"{path} was written for architecture {payload['arch']}, "
                f"expected {expected_arch}"
            )
    return payload


def restore_net(net: nn.Module, payload: dict, name: str) -> nn.Module:
    if name not in payload["state"]:
        raise CheckpointError(f"checkpoint holds no parameters for {name!r}")
    net.load_state_dict(payload["state"][name])
    return net
