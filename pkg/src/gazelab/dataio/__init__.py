"""Dataset ingestion, eye-patch extraction, splitting and pairing."""

from .circle import min_enclosing_circle
from .columbia import FrameName, format_columbia_filename, parse_columbia_filename
from .landmarks import (
    DlibLandmarkProvider,
    LandmarkProvider,
    SidecarLandmarkProvider,
    eye_points,
    read_landmark_sidecar,
    write_landmark_sidecar,
)
from .manifest import (
    CSV_HEADER,
    DatasetManifest,
    EyeDataset,
    EyeSample,
    FaceRecord,
    ManifestRow,
    find_ground_truth,
    load_manifest,
    prepare_sample,
    save_manifest,
    split_subjects,
)
from .patches import (
    crop_eye_patch,
    crop_square,
    eye_crop_box,
    from_unit_range,
    resize_patch,
    to_unit_range,
)
from .pipeline import prepare_dataset, scan_input_dir

__all__ = [
    "CSV_HEADER",
    "DatasetManifest",
    "DlibLandmarkProvider",
    "EyeDataset",
    "EyeSample",
    "FaceRecord",
    "FrameName",
    "LandmarkProvider",
    "ManifestRow",
    "SidecarLandmarkProvider",
    "crop_eye_patch",
    "crop_square",
    "eye_crop_box",
    "eye_points",
    "find_ground_truth",
    "format_columbia_filename",
    "from_unit_range",
    "load_manifest",
    "min_enclosing_circle",
    "parse_columbia_filename",
    "prepare_dataset",
    "prepare_sample",
    "read_landmark_sidecar",
    "resize_patch",
    "save_manifest",
    "scan_input_dir",
    "split_subjects",
    "to_unit_range",
    "write_landmark_sidecar",
]
