"""Image blurriness: reciprocal variance of the Laplacian-filtered image.

Lower values mean sharper images.  The filter runs on the grayscale
image (ITU-R 601 luma), valid-region only, so padding never contaminates
the variance.  ``kernel="paper"`` selects a variant whose bottom-right
entry is 1 instead of 0; the symmetric Laplacian is the default.
"""

from __future__ import annotations

import numpy as np
from scipy.signal import convolve2d

from ..errors import DegenerateInputError

LAPLACIAN_KERNELS = {
    "standard": np.array([[0, 1, 0], [1, -4, 1], [0, 1, 0]], dtype=np.float64),
    "paper": np.array([[0, 1, 0], [1, -4, 1], [0, 1, 1]], dtype=np.float64),
}

_LUMA = np.array([0.299, 0.587, 0.114], dtype=np.float64)


def to_grayscale(image: np.ndarray) -> np.ndarray:
    """ITU-R 601 luma for HxWx3 arrays; 2-D arrays pass through."""
    arr = np.asarray(image, dtype=np.float64)
    if arr.ndim == 2:
        return arr
    if arr.ndim == 3 and arr.shape[2] == 3:
        return arr @ _LUMA
    raise ValueError(f"cannot convert shape {arr.shape} to grayscale")


def laplacian_filtered(image: np.ndarray, kernel: str = "standard") -> np.ndarray:
    """Valid-region convolution of the grayscale image with the Laplacian."""
    if kernel not in LAPLACIAN_KERNELS:
        raise ValueError(f"kernel must be one of {sorted(LAPLACIAN_KERNELS)}")
    gray = to_grayscale(image)
    if gray.shape[0] < 3 or gray.shape[1] < 3:
        raise DegenerateInputError("image too small for a 3x3 filter")
    return convolve2d(gray, LAPLACIAN_KERNELS[kernel], mode="valid")


def blurriness(image: np.ndarray, kernel: str = "standard") -> float:
    """1 / Var[k * gray(image)]; raises on constant (zero-variance) input."""
    filtered = laplacian_filtered(image, kernel)
    var = float(filtered.var())
    if var < 1e-20:
        raise DegenerateInputError(
            "Laplacian response has zero variance (constant image)"
        )
    return 1.0 / var
