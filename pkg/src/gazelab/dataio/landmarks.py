"""Facial landmark acquisition.

The pipeline only needs the 6 contour points of each eye out of the
standard 68-point face annotation.  Landmarks come from a provider so the
core never depends on a particular detector: the default provider reads
precomputed sidecar files (one text file of 68 ``x y`` rows per image),
and a detector adapter is available as optional glue for environments
that have dlib installed.
"""

from __future__ import annotations

from pathlib import Path
from typing import Optional, Protocol

import numpy as np

from ..errors import DataError

# Index ranges of the 68-point annotation; "left"/"right" are the
# subject's own left and right eye.
RIGHT_EYE_SLICE = slice(36, 42)
LEFT_EYE_SLICE = slice(42, 48)

SIDECAR_SUFFIX = ".landmarks.txt"


def eye_points(landmarks: np.ndarray, side: str) -> np.ndarray:
    """The 6 contour points of one eye from a 68-point landmark set."""
    landmarks = np.asarray(landmarks, dtype=np.float64)
    if landmarks.shape != (68, 2):
        raise ValueError(f"expected (68, 2) landmarks, got {landmarks.shape}")
    if side == "left":
        return landmarks[LEFT_EYE_SLICE]
    if side == "right":
        return landmarks[RIGHT_EYE_SLICE]
    raise ValueError(f"eye side must be 'left' or 'right', got {side!r}")


def sidecar_path(image_path: Path) -> Path:
    return Path(str(image_path) + SIDECAR_SUFFIX)


def write_landmark_sidecar(image_path: Path, landmarks: np.ndarray) -> Path:
    landmarks = np.asarray(landmarks, dtype=np.float64)
    if landmarks.shape != (68, 2):
        raise ValueError(f"expected (68, 2) landmarks, got {landmarks.shape}")
    path = sidecar_path(image_path)
    lines = [f"{x:.6f} {y:.6f}" for x, y in landmarks]
    path.write_text("\n".join(lines) + "\n")
    return path


def read_landmark_sidecar(image_path: Path) -> np.ndarray:
    path = sidecar_path(image_path)
    if not path.exists():
        raise DataError(f"no landmark sidecar at {path}")
    rows = [line.split() for line in path.read_text().split("\n") if line.strip()]
    if len(rows) != 68:
        raise DataError(f"landmark sidecar {path} has {len(rows)} rows, expected 68")
    return np.array([[float(x), float(y)] for x, y in rows], dtype=np.float64)


class LandmarkProvider(Protocol):
    def landmarks_for(self, image_path: Path) -> Optional[np.ndarray]:
        """Return (68, 2) pixel landmarks for the image, or None if unknown."""
        ...


class SidecarLandmarkProvider:
    """Reads per-image sidecar files written by :func:`write_landmark_sidecar`."""

    def landmarks_for(self, image_path: Path) -> Optional[np.ndarray]:
        if not sidecar_path(image_path).exists():
            return None
        return read_landmark_sidecar(image_path)


class DlibLandmarkProvider:
    """Optional adapter around a dlib 68-point shape predictor.

    Imports dlib lazily; constructing the provider raises ConfigError with
    installation guidance when dlib is unavailable.
    """

    def __init__(self, predictor_path: str):
        try:
            import dlib  # type: ignore
        except ImportError as exc:
            from ..errors import ConfigError

            raise ConfigError(
                "dlib is not installed; install it or prepare landmark "
                "sidecar files instead"
            ) from exc
        self._detector = dlib.get_frontal_face_detector()
        self._predictor = dlib.shape_predictor(predictor_path)

    def landmarks_for(self, image_path: Path) -> Optional[np.ndarray]:
        from PIL import Image

        frame = np.asarray(Image.open(image_path).convert("RGB"))
        faces = self._detector(frame, 1)
        if not faces:
            return None
        shape = self._predictor(frame, faces[0])
        return np.array(
            [[shape.part(i).x, shape.part(i).y] for i in range(68)],
            dtype=np.float64,
        )
