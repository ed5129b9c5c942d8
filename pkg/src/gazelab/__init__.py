"""gazelab: photo-realistic gaze redirection for 64x64 eye patches.

A conditional adversarial model rewrites the gaze of a monocular eye
image to an arbitrary target yaw/pitch, with the full metric suite
(perceptual similarity, blurriness, angular error) and experiment
harnesses (loss ablation, estimator data augmentation).
"""

__version__ = "0.1.0"

from .geometry import (
    GazeDirection,
    GazeVector,
    NormalizedGaze,
    angular_error,
    correction_angle,
    denormalize_gaze,
    normalize_gaze,
    to_cartesian,
)
from .losses import LossReport, LossWeights

__all__ = [
    "GazeDirection",
    "GazeVector",
    "LossReport",
    "LossWeights",
    "NormalizedGaze",
    "angular_error",
    "correction_angle",
    "denormalize_gaze",
    "normalize_gaze",
    "to_cartesian",
    "__version__",
]
