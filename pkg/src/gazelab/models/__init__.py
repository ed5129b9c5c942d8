"""Networks: generator, dual-headed critic, frozen feature extractor."""

from .checkpoint import (
    FORMAT_VERSION,
    architecture_hash,
    init_parameters,
    load_checkpoint,
    restore_net,
    save_checkpoint,
)
from .discriminator import (
    DiscriminatorBackbone,
    DualCriticOutput,
    DualDiscriminatorNet,
    GazeEstimatorNet,
)
from .generator import GeneratorNet, ResidualBlock, broadcast_condition
from .perceptual import PerceptualBackbone, PerceptualRegressor

__all__ = [
    "FORMAT_VERSION",
    "DiscriminatorBackbone",
    "DualCriticOutput",
    "DualDiscriminatorNet",
    "GazeEstimatorNet",
    "GeneratorNet",
    "PerceptualBackbone",
    "PerceptualRegressor",
    "ResidualBlock",
    "architecture_hash",
    "broadcast_condition",
    "init_parameters",
    "load_checkpoint",
    "restore_net",
    "save_checkpoint",
]
