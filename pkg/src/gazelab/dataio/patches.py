"""Eye-patch extraction and pixel normalization.

A patch is an axis-aligned square crop around the eye: the 6 eye contour
landmarks define a minimum enclosing circle with center (x, y) and radius
R, and the crop is the square of side 3.4 R centered there.  Regions that
fall outside the frame are zero-padded.  Crops are resampled bilinearly
to 64 x 64 and pixel values scaled to [-1, 1].
"""

from __future__ import annotations

import numpy as np
from PIL import Image

from ..errors import ExtractionError
from .circle import min_enclosing_circle

PATCH_SIZE = 64
CROP_SCALE = 3.4


def eye_crop_box(eye_landmarks: np.ndarray) -> tuple[float, float, float]:
    """Crop-box geometry for one eye: (center_x, center_y, side).

    side = 3.4 R where R is the radius of the minimum enclosing circle of
    the 6 eye landmarks.
    """
    pts = np.asarray(eye_landmarks, dtype=np.float64)
    (cx, cy), radius = min_enclosing_circle(pts)
    if radius <= 1e-9:
        raise ExtractionError("degenerate eye landmarks: enclosing radius is zero")
    return cx, cy, CROP_SCALE * radius


def crop_square(image: np.ndarray, cx: float, cy: float, side: float) -> np.ndarray:
    """Square crop centered at (cx, cy), zero-padded where out of frame."""
    if side <= 0:
        raise ExtractionError(f"crop side must be positive, got {side}")
    size = max(1, int(round(side)))
    x0 = int(round(cx - side / 2.0))
    y0 = int(round(cy - side / 2.0))

    h, w = image.shape[:2]
    out_shape = (size, size) + image.shape[2:]
    out = np.zeros(out_shape, dtype=image.dtype)

    sx0, sy0 = max(x0, 0), max(y0, 0)
    sx1, sy1 = min(x0 + size, w), min(y0 + size, h)
    if sx1 > sx0 and sy1 > sy0:
        out[sy0 - y0 : sy1 - y0, sx0 - x0 : sx1 - x0] = image[sy0:sy1, sx0:sx1]
    return out


def resize_patch(patch: np.ndarray, size: int = PATCH_SIZE) -> np.ndarray:
    """Bilinear resize of an HxWx3 uint8 patch to size x size."""
    return np.asarray(
        Image.fromarray(patch).resize((size, size), Image.BILINEAR), dtype=np.uint8
    )


def crop_eye_patch(
    image: np.ndarray, eye_landmarks: np.ndarray, size: int = PATCH_SIZE
) -> np.ndarray:
    """Extract the 64x64 uint8 eye patch around the given 6 landmarks."""
    cx, cy, side = eye_crop_box(eye_landmarks)
    return resize_patch(crop_square(image, cx, cy, side), size)


def to_unit_range(image_uint8: np.ndarray) -> np.ndarray:
    """Map uint8 pixel levels {0..255} to 256 evenly spaced values in [-1, 1]."""
    return image_uint8.astype(np.float32) / 127.5 - 1.0


def from_unit_range(image_unit: np.ndarray) -> np.ndarray:
    """Inverse of :func:`to_unit_range` with clipping for generated images."""
    levels = np.clip((np.asarray(image_unit, np.float64) + 1.0) * 127.5, 0, 255)
    return np.round(levels).astype(np.uint8)
