"""Synthetic eye-image dataset in the Columbia directory layout.

Renders simple but learnable face frames: a skin-toned background, two
eyes with white sclera ellipses, and an iris disk whose offset inside the
eye encodes the gaze label (positive yaw moves the iris toward +x in the
frame, positive pitch moves it up).  Frames are written with Columbia
filenames plus 68-point landmark sidecars, so the full preparation,
training and evaluation stack runs offline end to end.

Because the iris offset is analytic, :func:`readout_gaze` can recover the
gaze of a rendered (or generated) patch independently of any trained
network, which the test-suite uses as a measurement instrument.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from ..geometry import (
    COLUMBIA_PITCHES,
    COLUMBIA_YAWS,
    DEFAULT_PITCH_MAX,
    DEFAULT_YAW_MAX,
    GazeDirection,
)
from ..seeding import rng
from .columbia import FrameName, format_columbia_filename
from .landmarks import write_landmark_sidecar


@dataclass(frozen=True)
class SyntheticStyle:
    """Geometry constants shared by the renderer and the readout oracle.

    The enclosing-circle radius of 20 makes the crop side 3.4 R = 68 an
    even integer, and the half-integer eye centers align the crop box
    exactly on the pixel grid, so patch coordinates map back to frame
    coordinates without sub-pixel bias.
    """

    frame_size: int = 200
    eye_half_width: float = 20.0  # enclosing-circle radius of the 6 landmarks
    sclera_rx: float = 18.5
    sclera_ry: float = 10.5
    iris_radius: float = 6.0
    pupil_radius: float = 2.4
    iris_offset_x: float = 7.5  # frame px at yaw_n = 1
    iris_offset_y: float = 4.0  # frame px at pitch_n = 1
    eye_centers: tuple[tuple[float, float], tuple[float, float]] = (
        (65.5, 95.5),  # subject's right eye (image left)
        (135.5, 95.5),  # subject's left eye (image right)
    )


STYLE = SyntheticStyle()


def _subject_palette(subject: int) -> dict:
    gen = rng("synthetic-subject", subject)
    skin = np.array([195, 160, 135], dtype=np.float64) + gen.uniform(-20, 20, 3)
    iris = np.array([70, 45, 30], dtype=np.float64) + gen.uniform(-20, 20, 3)
    texture_phase = gen.uniform(0, 2 * np.pi, 2)
    texture_amp = gen.uniform(2.0, 4.0)
    return {
        "skin": np.clip(skin, 0, 255),
        "iris": np.clip(iris, 0, 255),
        "texture_phase": texture_phase,
        "texture_amp": texture_amp,
    }


def _disk_alpha(dist: np.ndarray, radius: float, soft: float = 1.0) -> np.ndarray:
    return np.clip((radius + soft - dist) / (2 * soft), 0.0, 1.0)


def render_frame(
    subject: int,
    gaze: GazeDirection,
    head_pose: float = 0.0,
    style: SyntheticStyle = STYLE,
    yaw_max: float = DEFAULT_YAW_MAX,
    pitch_max: float = DEFAULT_PITCH_MAX,
) -> tuple[np.ndarray, np.ndarray]:
    """Render one frame; returns (HxWx3 uint8 image, (68, 2) landmarks)."""
    size = style.frame_size
    palette = _subject_palette(subject)
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64)

    # Skin background with smooth per-subject vertical shading (vertical
    # only, so horizontally mirrored eye patches see the same pattern).
    img = np.tile(palette["skin"], (size, size, 1))
    tex = palette["texture_amp"] * np.sin(yy / 17.0 + palette["texture_phase"][1])
    img += tex[..., None]

    pose_shift = head_pose / 5.0  # non-frontal poses shift the eye region
    yaw_n = gaze.yaw / yaw_max
    pitch_n = gaze.pitch / pitch_max

    landmarks = np.zeros((68, 2), dtype=np.float64)
    # Face outline and inner-face points: a deterministic oval, unused by
    # the eye pipeline but required for a complete 68-point annotation.
    t = np.linspace(0, np.pi, 17)
    landmarks[0:17, 0] = 100 + pose_shift + 70 * np.cos(np.pi - t)
    landmarks[0:17, 1] = 100 + 70 * np.sin(t)
    fill = rng("synthetic-landmarks", subject).uniform(60, 140, (19, 2))
    landmarks[17:36] = fill

    for eye_idx, (ex, ey) in enumerate(style.eye_centers):
        ex = ex + pose_shift
        dx = xx - ex
        dy = yy - ey

        # Sclera ellipse.
        ell = np.sqrt((dx / style.sclera_rx) ** 2 + (dy / style.sclera_ry) ** 2)
        sclera_alpha = np.clip((1.06 - ell) / 0.12, 0.0, 1.0)
        img = img * (1 - sclera_alpha[..., None]) + sclera_alpha[..., None] * np.array(
            [246.0, 246.0, 244.0]
        )

        # Iris and pupil, offset by the gaze label.
        ix = ex + style.iris_offset_x * yaw_n
        iy = ey - style.iris_offset_y * pitch_n
        dist = np.sqrt((xx - ix) ** 2 + (yy - iy) ** 2)
        iris_alpha = _disk_alpha(dist, style.iris_radius) * np.clip(
            (1.02 - ell) / 0.05, 0.0, 1.0
        )
        img = img * (1 - iris_alpha[..., None]) + iris_alpha[..., None] * palette["iris"]
        pupil_alpha = _disk_alpha(dist, style.pupil_radius, soft=0.8) * np.clip(
            (1.02 - ell) / 0.05, 0.0, 1.0
        )
        img = img * (1 - pupil_alpha[..., None]) + pupil_alpha[..., None] * np.array(
            [12.0, 10.0, 10.0]
        )

        # Eyelid rim.
        rim = np.clip(1.0 - np.abs(ell - 1.02) / 0.10, 0.0, 1.0) * 0.40
        img = img * (1 - rim[..., None]) + rim[..., None] * np.array([105.0, 80.0, 70.0])

        # 6 eye landmarks: two corners, two upper, two lower.  The corner
        # pair is the diameter of the enclosing circle.
        w = style.eye_half_width
        pts = np.array(
            [
                [ex - w, ey],
                [ex - w * 0.375, ey - 9.0],
                [ex + w * 0.375, ey - 9.0],
                [ex + w, ey],
                [ex + w * 0.375, ey + 9.0],
                [ex - w * 0.375, ey + 9.0],
            ]
        )
        base = 36 if eye_idx == 0 else 42
        landmarks[base : base + 6] = pts

    landmarks[48:68] = rng("synthetic-mouth", subject).uniform(75, 125, (20, 2)) + [
        0,
        60,
    ]
    # Mild smoothing: camera-like softness, and a rendering that small
    # desk-scale models can actually reproduce.
    from scipy.ndimage import gaussian_filter

    img = gaussian_filter(img, sigma=(2.0, 2.0, 0.0))
    return np.clip(img, 0, 255).astype(np.uint8), landmarks


def write_synthetic_dataset(
    out_dir: Path,
    n_subjects: int = 8,
    head_poses: tuple[float, ...] = (0.0,),
    yaws: tuple[float, ...] = COLUMBIA_YAWS,
    pitches: tuple[float, ...] = COLUMBIA_PITCHES,
    distance: str = "2m",
    style: SyntheticStyle = STYLE,
) -> list[Path]:
    """Write frames + landmark sidecars for the full gaze grid per subject."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for subject in range(1, n_subjects + 1):
        for pose in head_poses:
            for pitch in pitches:
                for yaw in yaws:
                    frame, lms = render_frame(
                        subject, GazeDirection(yaw, pitch), pose, style
                    )
                    name = format_columbia_filename(
                        FrameName(subject, distance, pose, pitch, yaw, ext="png")
                    )
                    path = out_dir / name
                    Image.fromarray(frame).save(path)
                    write_landmark_sidecar(path, lms)
                    written.append(path)
    return written


def readout_gaze(
    patch_unit: np.ndarray,
    style: SyntheticStyle = STYLE,
    yaw_max: float = DEFAULT_YAW_MAX,
    pitch_max: float = DEFAULT_PITCH_MAX,
) -> GazeDirection:
    """Recover the apparent gaze of a 64x64 synthetic patch.

    Measures the darkness-weighted centroid of the iris region and inverts
    the renderer's offset mapping.  Valid for images rendered (or imitated)
    in the synthetic style; returns stored-label angles in degrees.
    """
    img = np.asarray(patch_unit, dtype=np.float64)
    luma = 0.299 * img[..., 0] + 0.587 * img[..., 1] + 0.114 * img[..., 2]
    # Keep only decidedly dark pixels (iris and pupil); the threshold
    # rejects the eyelid rim, which would otherwise bias the centroid.
    weight = np.clip(-luma - 0.40, 0.0, None) ** 2
    total = weight.sum()
    if total <= 1e-9:
        return GazeDirection(0.0, 0.0)
    yy, xx = np.mgrid[0 : img.shape[0], 0 : img.shape[1]].astype(np.float64)
    cx = float((weight * xx).sum() / total)
    cy = float((weight * yy).sum() / total)

    center = (img.shape[0] - 1) / 2.0
    scale = img.shape[0] / (3.4 * style.eye_half_width)  # frame px -> patch px
    yaw_n = (cx - center) / (style.iris_offset_x * scale)
    pitch_n = -(cy - center) / (style.iris_offset_y * scale)
    return GazeDirection(
        float(np.clip(yaw_n, -1, 1)) * yaw_max,
        float(np.clip(pitch_n, -1, 1)) * pitch_max,
    )
