"""Dataset manifest: provenance rows, splits and ground-truth pairing.

A manifest row describes one 64x64 eye patch.  Labels are stored in
degrees in *stored-label* space: right-eye patches are horizontally
mirrored at extraction time and their yaw annotation sign-negated, so the
(image, label) pairs in the manifest are self-consistent regardless of
eye side.

CSV format (header required):
    path,subject,head_pose,pitch,yaw,eye_side,split[,synthetic]

The optional ``synthetic`` column marks rows produced by a redirection
model rather than the camera; absent means real.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from PIL import Image

from ..errors import DataError, GroundTruthNotFound, ManifestParseError
from ..geometry import (
    DEFAULT_PITCH_MAX,
    DEFAULT_YAW_MAX,
    GazeDirection,
    NormalizedGaze,
    normalize_gaze,
)
from ..seeding import rng
from .landmarks import eye_points
from .patches import crop_eye_patch, to_unit_range

EYE_SIDES = ("left", "right")
CSV_HEADER = ["path", "subject", "head_pose", "pitch", "yaw", "eye_side", "split"]


@dataclass(frozen=True)
class FaceRecord:
    """One raw dataset frame before eye extraction."""

    path: Path
    subject: str
    head_pose: float
    gaze: GazeDirection
    landmarks: Optional[np.ndarray] = None  # (68, 2) pixel coords or None

    def __post_init__(self):
        if self.landmarks is not None and np.asarray(self.landmarks).shape != (68, 2):
            raise ValueError("landmark set must have exactly 68 points")


@dataclass(frozen=True)
class EyeSample:
    """A normalized 64x64 eye patch with its training label."""

    image: np.ndarray  # (64, 64, 3) float32 in [-1, 1]
    gaze_n: NormalizedGaze
    subject: str
    head_pose: float
    eye_side: str

    def __post_init__(self):
        if self.image.shape != (64, 64, 3):
            raise ValueError(f"eye patch must be 64x64x3, got {self.image.shape}")
        if self.eye_side not in EYE_SIDES:
            raise ValueError(f"eye_side must be one of {EYE_SIDES}")


@dataclass(frozen=True)
class ManifestRow:
    """Provenance of one stored eye patch; angles in stored-label degrees."""

    path: Path
    subject: str
    head_pose: float
    pitch: float
    yaw: float
    eye_side: str
    split: str = "train"
    synthetic: bool = False

    @property
    def gaze(self) -> GazeDirection:
        return GazeDirection(self.yaw, self.pitch)


@dataclass
class DatasetManifest:
    rows: list[ManifestRow] = field(default_factory=list)
    yaw_max: float = DEFAULT_YAW_MAX
    pitch_max: float = DEFAULT_PITCH_MAX

    def subjects(self) -> list[str]:
        return sorted({r.subject for r in self.rows})

    def split_rows(self, split: str) -> list[ManifestRow]:
        return [r for r in self.rows if r.split == split]

    def __len__(self) -> int:
        return len(self.rows)


def prepare_sample(
    record: FaceRecord,
    side: str,
    yaw_max: float = DEFAULT_YAW_MAX,
    pitch_max: float = DEFAULT_PITCH_MAX,
) -> EyeSample:
    """Extract one eye of a frame as a normalized training sample.

    Right-eye patches are mirrored horizontally and their yaw label
    negated, so that mirrored appearance and label stay consistent.
    """
    if record.landmarks is None:
        raise DataError(f"record {record.path} has no landmarks")
    if side not in EYE_SIDES:
        raise ValueError(f"eye side must be one of {EYE_SIDES}, got {side!r}")

    frame = np.asarray(Image.open(record.path).convert("RGB"))
    patch = crop_eye_patch(frame, eye_points(record.landmarks, side))

    yaw = record.gaze.yaw
    if side == "right":
        patch = patch[:, ::-1]
        yaw = -yaw

    gaze_n = normalize_gaze(GazeDirection(yaw, record.gaze.pitch), yaw_max, pitch_max)
    return EyeSample(
        image=to_unit_range(np.ascontiguousarray(patch)),
        gaze_n=gaze_n,
        subject=record.subject,
        head_pose=record.head_pose,
        eye_side=side,
    )


def split_subjects(
    manifest: DatasetManifest, n_test: int, seed: int
) -> DatasetManifest:
    """Assign each subject to train or test, deterministically in the seed."""
    subjects = manifest.subjects()
    if n_test < 0 or n_test >= len(subjects):
        raise ValueError(
            f"n_test must be in [0, {len(subjects)}), got {n_test}"
        )
    order = rng("subject-split", seed).permutation(len(subjects))
    test_subjects = {subjects[i] for i in order[:n_test]}
    rows = [
        replace(r, split="test" if r.subject in test_subjects else "train")
        for r in manifest.rows
    ]
    return DatasetManifest(rows, manifest.yaw_max, manifest.pitch_max)


def find_ground_truth(
    manifest: DatasetManifest,
    subject: str,
    head_pose: float,
    eye_side: str,
    d_g: GazeDirection,
    tol: float = 1e-6,
) -> ManifestRow:
    """The real sample of (subject, pose, side) whose stored label equals d_g."""
    candidates = [
        r
        for r in manifest.rows
        if r.subject == subject
        and r.head_pose == head_pose
        and r.eye_side == eye_side
        and not r.synthetic
    ]
    if not candidates:
        raise GroundTruthNotFound(
            f"no samples for subject {subject!r} pose {head_pose} side {eye_side}"
        )
    for r in candidates:
        if abs(r.yaw - d_g.yaw) <= tol and abs(r.pitch - d_g.pitch) <= tol:
            return r
    nearest = min(
        candidates, key=lambda r: (r.yaw - d_g.yaw) ** 2 + (r.pitch - d_g.pitch) ** 2
    )
    raise GroundTruthNotFound(
        f"no sample with gaze ({d_g.yaw}, {d_g.pitch}) for subject {subject!r} "
        f"pose {head_pose} side {eye_side}; nearest available is "
        f"({nearest.yaw}, {nearest.pitch})"
    )


def save_manifest(manifest: DatasetManifest, path: Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    include_synth = any(r.synthetic for r in manifest.rows)
    header = CSV_HEADER + (["synthetic"] if include_synth else [])
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for r in manifest.rows:
            row = [
                str(r.path),
                r.subject,
                _fmt(r.head_pose),
                _fmt(r.pitch),
                _fmt(r.yaw),
                r.eye_side,
                r.split,
            ]
            if include_synth:
                row.append("true" if r.synthetic else "false")
            writer.writerow(row)


def load_manifest(path: Path) -> DatasetManifest:
    path = Path(path)
    if not path.exists():
        raise DataError(f"manifest not found: {path}")
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ManifestParseError(f"manifest {path} is empty") from None
        if header[: len(CSV_HEADER)] != CSV_HEADER:
            raise ManifestParseError(
                f"manifest {path} header {header!r} does not start with {CSV_HEADER!r}"
            )
        has_synth = len(header) > len(CSV_HEADER) and header[len(CSV_HEADER)] == "synthetic"
        rows = []
        for lineno, raw in enumerate(reader, start=2):
            if not raw:
                continue
            try:
                rows.append(
                    ManifestRow(
                        path=Path(raw[0]),
                        subject=raw[1],
                        head_pose=float(raw[2]),
                        pitch=float(raw[3]),
                        yaw=float(raw[4]),
                        eye_side=raw[5],
                        split=raw[6],
                        synthetic=has_synth and raw[7].strip().lower() == "true",
                    )
                )
            except (IndexError, ValueError) as exc:
                raise ManifestParseError(
                    f"manifest {path} line {lineno}: {exc}"
                ) from exc
    return DatasetManifest(rows)


def _fmt(value: float) -> str:
    return str(int(value)) if float(value).is_integer() else repr(float(value))


class EyeDataset:
    """Manifest rows loaded into memory as aligned arrays.

    images: (N, 64, 64, 3) float32 in [-1, 1]; gaze_n: (N, 2) float32
    normalized (yaw, pitch).  Row order follows the manifest.
    """

    def __init__(self, manifest: DatasetManifest, rows: Optional[Sequence[ManifestRow]] = None):
        self.manifest = manifest
        self.rows = list(rows) if rows is not None else list(manifest.rows)
        if not self.rows:
            raise DataError("dataset has no rows")
        images, labels = [], []
        for r in self.rows:
            arr = np.asarray(Image.open(r.path).convert("RGB"), dtype=np.uint8)
            if arr.shape != (64, 64, 3):
                raise DataError(f"patch {r.path} has shape {arr.shape}, expected 64x64x3")
            images.append(to_unit_range(arr))
            labels.append(
                normalize_gaze(r.gaze, manifest.yaw_max, manifest.pitch_max).as_array()
            )
        self.images = np.stack(images).astype(np.float32)
        self.gaze_n = np.stack(labels).astype(np.float32)
        self._index = {
            (r.subject, r.head_pose, r.eye_side, round(r.yaw, 6), round(r.pitch, 6)): i
            for i, r in enumerate(self.rows)
            if not r.synthetic
        }
        self._groups: dict[tuple, list[int]] = {}
        for i, r in enumerate(self.rows):
            if not r.synthetic:
                self._groups.setdefault((r.subject, r.head_pose, r.eye_side), []).append(i)

    def __len__(self) -> int:
        return len(self.rows)

    def candidate_targets(self, i: int) -> list[int]:
        """Real same-subject/pose/side rows whose gaze differs from row i's."""
        r = self.rows[i]
        group = self._groups.get((r.subject, r.head_pose, r.eye_side), [])
        return [
            j
            for j in group
            if abs(self.rows[j].yaw - r.yaw) > 1e-9
            or abs(self.rows[j].pitch - r.pitch) > 1e-9
        ]

    def grid_directions(self, subject: str, head_pose: float, eye_side: str) -> list[GazeDirection]:
        """Stored-label gaze directions available for one subject/pose/side."""
        return [
            r.gaze
            for r in self.rows
            if r.subject == subject
            and r.head_pose == head_pose
            and r.eye_side == eye_side
            and not r.synthetic
        ]

    def lookup(
        self, subject: str, head_pose: float, eye_side: str, d_g: GazeDirection
    ) -> int:
        """Index of the real sample matching the stored-label gaze d_g."""
        key = (subject, head_pose, eye_side, round(d_g.yaw, 6), round(d_g.pitch, 6))
        idx = self._index.get(key)
        if idx is None:
            find_ground_truth(
                DatasetManifest(self.rows, self.manifest.yaw_max, self.manifest.pitch_max),
                subject,
                head_pose,
                eye_side,
                d_g,
            )  # raises with the nearest-available message
            raise GroundTruthNotFound(f"no sample for {key}")  # pragma: no cover
        return idx
