"""Evaluation metrics and the binned redirection protocol."""

from __future__ import annotations

from pathlib import Path
from typing import Callable

import numpy as np
import torch

from ..errors import ConfigError
from ..geometry import GazeDirection, angular_error
from .blur import LAPLACIAN_KERNELS, blurriness, laplacian_filtered, to_grayscale
from .evaluate import (
    BinSpec,
    EvaluationReport,
    GenerateFn,
    METRIC_NAMES,
    evaluate_model,
)
from .lpips import AlexNetFeatures, IdentityFeatures, LpipsModel, normalize_channels
from .report import format_text_table, write_report


def gaze_redirection_error(
    generated_unit: np.ndarray, d_g: GazeDirection, estimator_fn
) -> float:
    """Angular error in degrees between target gaze and estimated gaze."""
    if estimator_fn is None:
        raise ConfigError("gaze_redirection_error requires an estimator plugin")
    est = np.asarray(estimator_fn(generated_unit[None]), dtype=np.float64)[0]
    return angular_error(d_g, GazeDirection(float(est[0]), float(est[1])))


def estimator_from_net(
    net: torch.nn.Module, yaw_max: float = 15.0, pitch_max: float = 10.0
) -> Callable[[np.ndarray], np.ndarray]:
    """Wrap a normalized-output gaze net as a degrees-out estimator plugin."""

    def estimate(images_unit: np.ndarray) -> np.ndarray:
        with torch.no_grad():
            x = torch.from_numpy(
                np.ascontiguousarray(images_unit.astype(np.float32))
            ).permute(0, 3, 1, 2)
            norm = net(x).numpy().astype(np.float64)
        return norm * np.array([yaw_max, pitch_max])

    return estimate


def estimator_from_checkpoint(path: Path) -> Callable[[np.ndarray], np.ndarray]:
    """Load an estimator plugin from a checkpoint.

    Accepts either a dedicated estimator checkpoint (from the augmentation
    study) or a training checkpoint, whose discriminator gaze head then
    serves as the estimator.
    """
    from ..models import (
        DualDiscriminatorNet,
        GazeEstimatorNet,
        PerceptualRegressor,
        load_checkpoint,
        restore_net,
    )

    payload = load_checkpoint(path)
    state = payload["state"]
    if "estimator" in state:
        desc = payload["arch"]["estimator"]
        if desc["class"] == "PerceptualRegressor":
            net = PerceptualRegressor(width_multiplier=desc["width_multiplier"])
        elif desc["class"] == "GazeEstimatorNet":
            net = GazeEstimatorNet(base_channels=desc["base_channels"])
        else:
            raise ConfigError(f"unknown estimator class {desc['class']!r}")
        restore_net(net, payload, "estimator")
    elif "discriminator" in state:
        desc = payload["arch"]["discriminator"]
        net = DualDiscriminatorNet(base_channels=desc["base_channels"])
        restore_net(net, payload, "discriminator")
        disc = net

        class _GazeOnly(torch.nn.Module):
            def forward(self, x):
                return disc(x).gaze_estimate

        net = _GazeOnly()
    else:
        raise ConfigError(f"checkpoint {path} holds neither estimator nor discriminator")
    net.eval()
    return estimator_from_net(net)


__all__ = [
    "AlexNetFeatures",
    "BinSpec",
    "EvaluationReport",
    "GenerateFn",
    "IdentityFeatures",
    "LAPLACIAN_KERNELS",
    "LpipsModel",
    "METRIC_NAMES",
    "blurriness",
    "estimator_from_checkpoint",
    "estimator_from_net",
    "evaluate_model",
    "format_text_table",
    "gaze_redirection_error",
    "laplacian_filtered",
    "normalize_channels",
    "to_grayscale",
    "write_report",
]
