"""End-to-end dataset preparation: scan, split, extract, cache."""

from __future__ import annotations

import logging
from pathlib import Path
from typing import Optional

from PIL import Image

from ..errors import DataError, ExtractionError, ManifestParseError
from ..geometry import GazeDirection
from .columbia import parse_columbia_filename
from .landmarks import LandmarkProvider, SidecarLandmarkProvider
from .manifest import (
    DatasetManifest,
    EYE_SIDES,
    FaceRecord,
    ManifestRow,
    prepare_sample,
    save_manifest,
    split_subjects,
)
from .patches import from_unit_range

log = logging.getLogger(__name__)

IMAGE_EXTENSIONS = {".png", ".jpg", ".jpeg", ".bmp"}


def scan_input_dir(
    input_dir: Path,
    provider: Optional[LandmarkProvider] = None,
    frontal_only: bool = False,
) -> tuple[list[FaceRecord], dict[str, int]]:
    """Collect FaceRecords from a Columbia-layout directory.

    Returns the records plus a counter of skipped files by reason.  Only
    hard-fails when no file at all can be used.
    """
    input_dir = Path(input_dir)
    if not input_dir.is_dir():
        raise DataError(f"input directory not found: {input_dir}")
    provider = provider or SidecarLandmarkProvider()

    records: list[FaceRecord] = []
    skipped = {"unparsable_name": 0, "missing_landmarks": 0, "non_frontal": 0}
    for path in sorted(input_dir.iterdir()):
        if path.suffix.lower() not in IMAGE_EXTENSIONS:
            continue
        try:
            frame = parse_columbia_filename(path.name)
        except ManifestParseError:
            skipped["unparsable_name"] += 1
            continue
        if frontal_only and frame.head_pose != 0.0:
            skipped["non_frontal"] += 1
            continue
        landmarks = provider.landmarks_for(path)
        if landmarks is None:
            skipped["missing_landmarks"] += 1
            continue
        records.append(
            FaceRecord(
                path=path,
                subject=f"{frame.subject:04d}",
                head_pose=frame.head_pose,
                gaze=GazeDirection(frame.yaw, frame.pitch),
                landmarks=landmarks,
            )
        )
    if not records:
        raise DataError(
            f"no usable frames in {input_dir} (skipped: {skipped})"
        )
    return records, skipped


def prepare_dataset(
    input_dir: Path,
    manifest_out: Path,
    cache_dir: Optional[Path] = None,
    n_test: int = 6,
    seed: int = 0,
    provider: Optional[LandmarkProvider] = None,
    frontal_only: bool = False,
) -> DatasetManifest:
    """Extract all eye patches, cache them as PNG and write the manifest.

    Left and right eyes of one frame become independent samples; the
    cached patch of a right eye is already mirrored and its yaw label
    negated.
    """
    records, skipped = scan_input_dir(input_dir, provider, frontal_only)
    for reason, count in skipped.items():
        if count:
            log.warning("prepare-data skipped %d files (%s)", count, reason)

    manifest_out = Path(manifest_out)
    cache_dir = Path(cache_dir) if cache_dir else manifest_out.parent / "patches"
    cache_dir.mkdir(parents=True, exist_ok=True)

    rows = []
    for record in records:
        for side in EYE_SIDES:
            try:
                sample = prepare_sample(record, side)
            except ExtractionError as exc:
                log.warning("skipping %s (%s): %s", record.path.name, side, exc)
                continue
            patch_name = f"{record.path.stem}_{side}.png"
            patch_path = cache_dir / patch_name
            Image.fromarray(from_unit_range(sample.image)).save(patch_path)
            rows.append(
                ManifestRow(
                    path=patch_path,
                    subject=record.subject,
                    head_pose=record.head_pose,
                    pitch=record.gaze.pitch,
                    yaw=-record.gaze.yaw if side == "right" else record.gaze.yaw,
                    eye_side=side,
                )
            )
    if not rows:
        raise DataError("no eye patches could be extracted")

    manifest = split_subjects(DatasetManifest(rows), n_test=n_test, seed=seed)
    save_manifest(manifest, manifest_out)
    return manifest
