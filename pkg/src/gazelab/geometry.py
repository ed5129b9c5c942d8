"""Gaze angle representations and conversions.

All public interfaces speak degrees (dataset annotations are in degrees);
trigonometry runs in radians internally.  A gaze direction is a yaw/pitch
pair; comparisons between directions go through 3-D unit vectors so that
angular distances are well defined across the whole sphere.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

COLUMBIA_YAWS = (-15.0, -10.0, -5.0, 0.0, 5.0, 10.0, 15.0)
COLUMBIA_PITCHES = (-10.0, 0.0, 10.0)
COLUMBIA_HEAD_POSES = (-30.0, -15.0, 0.0, 15.0, 30.0)

DEFAULT_YAW_MAX = 15.0
DEFAULT_PITCH_MAX = 10.0


def _require_finite(name: str, *values: float) -> None:
    for v in values:
        if not math.isfinite(v):
            raise ValueError(f"{name} must be finite, got {v!r}")


@dataclass(frozen=True)
class GazeDirection:
    """A gaze direction as a (yaw, pitch) pair in degrees."""

    yaw: float
    pitch: float

    def __post_init__(self):
        _require_finite("gaze angle", self.yaw, self.pitch)

    @classmethod
    def range_checked(
        cls,
        yaw: float,
        pitch: float,
        yaw_max: float = DEFAULT_YAW_MAX,
        pitch_max: float = DEFAULT_PITCH_MAX,
    ) -> "GazeDirection":
        """Constructor that additionally enforces dataset angle ranges."""
        if abs(yaw) > yaw_max or abs(pitch) > pitch_max:
            raise ValueError(
                f"gaze ({yaw}, {pitch}) outside +-({yaw_max}, {pitch_max}) degrees"
            )
        return cls(yaw, pitch)


@dataclass(frozen=True)
class GazeVector:
    """Unit-norm 3-D direction corresponding to a gaze angle pair."""

    x: float
    y: float
    z: float

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z], dtype=np.float64)


@dataclass(frozen=True)
class NormalizedGaze:
    """Gaze scaled componentwise into [-1, 1] by the axis maxima."""

    yaw_n: float
    pitch_n: float

    def __post_init__(self):
        _require_finite("normalized gaze", self.yaw_n, self.pitch_n)

    def as_array(self) -> np.ndarray:
        return np.array([self.yaw_n, self.pitch_n], dtype=np.float64)


def to_cartesian(d: GazeDirection) -> GazeVector:
    """Convert yaw/pitch in degrees to a unit 3-D direction.

    The mapping is v = [cos(yaw) cos(pitch), -sin(yaw), cos(yaw) sin(pitch)].
    """
    phi = math.radians(d.yaw)
    theta = math.radians(d.pitch)
    return GazeVector(
        math.cos(phi) * math.cos(theta),
        -math.sin(phi),
        math.cos(phi) * math.sin(theta),
    )


def angular_error(d_g: GazeDirection, d_hat: GazeDirection) -> float:
    """Angle in degrees between two gaze directions.

    Both directions are mapped to unit vectors and the arccos of their dot
    product is returned.  The dot product is clamped to [-1, 1] so that
    rounding can never push it outside the arccos domain.
    """
    v_a = to_cartesian(d_g).as_array()
    v_b = to_cartesian(d_hat).as_array()
    denom = float(np.linalg.norm(v_a) * np.linalg.norm(v_b))
    dot = float(np.dot(v_a, v_b)) / denom
    return math.degrees(math.acos(max(-1.0, min(1.0, dot))))


def correction_angle(d_g: GazeDirection, d_r: GazeDirection) -> float:
    """Angular distance in degrees between target and source gaze.

    Same math as :func:`angular_error`; kept separate because it measures
    task difficulty (how far the gaze must move) rather than accuracy.
    """
    return angular_error(d_g, d_r)


def normalize_gaze(
    d: GazeDirection,
    yaw_max: float = DEFAULT_YAW_MAX,
    pitch_max: float = DEFAULT_PITCH_MAX,
) -> NormalizedGaze:
    """Scale a gaze direction componentwise into [-1, 1]."""
    if yaw_max <= 0 or pitch_max <= 0:
        raise ValueError("axis maxima must be positive")
    if abs(d.yaw) > yaw_max or abs(d.pitch) > pitch_max:
        raise ValueError(
            f"gaze ({d.yaw}, {d.pitch}) out of range for maxima ({yaw_max}, {pitch_max})"
        )
    return NormalizedGaze(d.yaw / yaw_max, d.pitch / pitch_max)


def denormalize_gaze(
    n: NormalizedGaze,
    yaw_max: float = DEFAULT_YAW_MAX,
    pitch_max: float = DEFAULT_PITCH_MAX,
) -> GazeDirection:
    """Inverse of :func:`normalize_gaze`."""
    if yaw_max <= 0 or pitch_max <= 0:
        raise ValueError("axis maxima must be positive")
    return GazeDirection(n.yaw_n * yaw_max, n.pitch_n * pitch_max)


def columbia_grid() -> tuple[GazeDirection, ...]:
    """The 21 gaze directions of the dataset grid (3 pitches x 7 yaws)."""
    return tuple(
        GazeDirection(yaw, pitch) for pitch in COLUMBIA_PITCHES for yaw in COLUMBIA_YAWS
    )


# Vectorized variants used by the evaluation pipeline; rows are (yaw, pitch)
# in degrees.

def to_cartesian_array(angles_deg: np.ndarray) -> np.ndarray:
    angles = np.asarray(angles_deg, dtype=np.float64)
    phi = np.radians(angles[..., 0])
    theta = np.radians(angles[..., 1])
    return np.stack(
        [np.cos(phi) * np.cos(theta), -np.sin(phi), np.cos(phi) * np.sin(theta)],
        axis=-1,
    )


def angular_error_array(a_deg: np.ndarray, b_deg: np.ndarray) -> np.ndarray:
    v_a = to_cartesian_array(a_deg)
    v_b = to_cartesian_array(b_deg)
    dot = np.sum(v_a * v_b, axis=-1)
    dot /= np.linalg.norm(v_a, axis=-1) * np.linalg.norm(v_b, axis=-1)
    return np.degrees(np.arccos(np.clip(dot, -1.0, 1.0)))
