"""Filename adapter for the Columbia-style gaze dataset layout.

Frames are named ``{subject}_{distance}_{pose}P_{pitch}V_{yaw}H.{ext}``,
e.g. ``0001_2m_0P_-10V_15H.jpg``: subject 1 photographed at 2 m, frontal
head pose, gaze pitch -10 degrees and gaze yaw 15 degrees.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from ..errors import ManifestParseError

FILENAME_PATTERN = re.compile(
    r"^(?P<subject>\d+)_(?P<distance>[^_]+)_(?P<pose>-?\d+(?:\.\d+)?)P_"
    r"(?P<pitch>-?\d+(?:\.\d+)?)V_(?P<yaw>-?\d+(?:\.\d+)?)H\.(?P<ext>[A-Za-z0-9]+)$"
)


@dataclass(frozen=True)
class FrameName:
    subject: int
    distance: str
    head_pose: float
    pitch: float
    yaw: float
    ext: str = "jpg"


def parse_columbia_filename(name: str) -> FrameName:
    """Parse a dataset frame filename into its annotation fields.

    Raises ManifestParseError with the expected pattern when the name does
    not match.
    """
    m = FILENAME_PATTERN.match(name)
    if m is None:
        raise ManifestParseError(
            f"filename {name!r} does not match "
            "'{subject}_{distance}_{pose}P_{pitch}V_{yaw}H.{ext}'"
        )
    return FrameName(
        subject=int(m.group("subject")),
        distance=m.group("distance"),
        head_pose=float(m.group("pose")),
        pitch=float(m.group("pitch")),
        yaw=float(m.group("yaw")),
        ext=m.group("ext"),
    )


def _fmt_angle(value: float) -> str:
    if float(value).is_integer():
        return str(int(value))
    return repr(float(value))


def format_columbia_filename(frame: FrameName) -> str:
    """Inverse of :func:`parse_columbia_filename`."""
    return (
        f"{frame.subject:04d}_{frame.distance}_{_fmt_angle(frame.head_pose)}P_"
        f"{_fmt_angle(frame.pitch)}V_{_fmt_angle(frame.yaw)}H.{frame.ext}"
    )
