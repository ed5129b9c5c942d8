"""Redirection evaluation protocol.

Every test sample is redirected to each grid direction other than its
own, paired with the real image at the target direction, and scored with
LPIPS, blurriness, gaze angular error and (auxiliary) pixel MSE.  Pairs
are grouped by correction angle: the angular distance between source and
target gaze, which proxies task difficulty.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from ..errors import ConfigError, GroundTruthNotFound
from ..geometry import (
    GazeDirection,
    angular_error_array,
    columbia_grid,
    correction_angle,
)
from ..dataio.manifest import EyeDataset

# generate_fn(images  (N,64,64,3) unit-range, gaze_n (N,2)) -> images
GenerateFn = Callable[[np.ndarray, np.ndarray], np.ndarray]
# estimator_fn(images (N,64,64,3) unit-range) -> (N,2) degrees (yaw, pitch)
EstimatorFn = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class BinSpec:
    """Correction-angle bins given by interior cut points in degrees.

    Cut points (15, 25) produce three groups: gamma <= 15, 15 < gamma <= 25
    and gamma > 25, which partition every evaluated pair.
    """

    cut_points: tuple[float, ...] = (15.0, 25.0)

    def __post_init__(self):
        if list(self.cut_points) != sorted(self.cut_points):
            raise ConfigError("bin cut points must be ascending")

    @property
    def n_bins(self) -> int:
        return len(self.cut_points) + 1

    def bin_of(self, gamma: float) -> int:
        for i, cut in enumerate(self.cut_points):
            if gamma <= cut:
                return i
        return len(self.cut_points)

    def labels(self) -> list[str]:
        edges = ["0°"] + [f"{c:g}°" for c in self.cut_points]
        labels = []
        for i, cut in enumerate(self.cut_points):
            labels.append(f"({edges[i]}, {cut:g}°]" if i else f"[0°, {cut:g}°]")
        labels.append(f"({edges[-1]}, 180°]")
        return labels


METRIC_NAMES = ("lpips", "blurriness", "angular_error", "mse")


@dataclass
class EvaluationReport:
    bin_labels: list[str]
    counts: list[int]
    means: dict[str, list[float]]
    stds: dict[str, list[float]]
    gamma_mid: list[float]  # mean correction angle per bin
    total_pairs: int
    skipped_pairs: int
    config_echo: dict = field(default_factory=dict)

    def overall_mean(self, metric: str) -> float:
        total = sum(self.counts)
        if total == 0:
            return float("nan")
        return (
            sum(m * n for m, n in zip(self.means[metric], self.counts) if n > 0) / total
        )

    def to_dict(self) -> dict:
        return {
            "bin_labels": self.bin_labels,
            "counts": self.counts,
            "means": self.means,
            "stds": self.stds,
            "gamma_mid": self.gamma_mid,
            "total_pairs": self.total_pairs,
            "skipped_pairs": self.skipped_pairs,
            "config_echo": self.config_echo,
        }


def evaluate_model(
    generate_fn: GenerateFn,
    dataset: EyeDataset,
    estimator_fn: Optional[EstimatorFn],
    lpips_model,
    bins: BinSpec = BinSpec(),
    targets: Optional[Sequence[GazeDirection]] = None,
    laplacian_kernel: str = "standard",
    batch_size: int = 64,
    config_echo: Optional[dict] = None,
    ground_truth: Optional[EyeDataset] = None,
) -> EvaluationReport:
    """Run the full protocol over a test dataset.

    ``targets`` defaults to the 21-direction grid; each sample is paired
    with every target except its own direction.  Ground-truth images are
    looked up in ``ground_truth`` (defaults to ``dataset`` itself); pairs
    without one are counted and skipped.
    """
    from .blur import blurriness
    from ..geometry import normalize_gaze

    if estimator_fn is None:
        raise ConfigError("evaluation requires a gaze estimator plugin")
    target_grid = list(targets) if targets is not None else list(columbia_grid())
    pool = ground_truth if ground_truth is not None else dataset

    src_idx: list[int] = []
    tgt_idx: list[int] = []
    gammas: list[float] = []
    skipped = 0
    for i, row in enumerate(dataset.rows):
        d_r = row.gaze
        for d_g in target_grid:
            if abs(d_g.yaw - d_r.yaw) < 1e-9 and abs(d_g.pitch - d_r.pitch) < 1e-9:
                continue
            try:
                j = pool.lookup(row.subject, row.head_pose, row.eye_side, d_g)
            except GroundTruthNotFound:
                skipped += 1
                continue
            src_idx.append(i)
            tgt_idx.append(j)
            gammas.append(correction_angle(d_g, d_r))

    n_pairs = len(src_idx)
    values = {name: np.zeros(n_pairs) for name in METRIC_NAMES}
    gamma_arr = np.array(gammas)
    bin_ids = np.array([bins.bin_of(g) for g in gammas], dtype=np.int64)

    yaw_max, pitch_max = dataset.manifest.yaw_max, dataset.manifest.pitch_max
    for start in range(0, n_pairs, batch_size):
        sl = slice(start, min(start + batch_size, n_pairs))
        src = np.array(src_idx[sl.start : sl.stop])
        tgt = np.array(tgt_idx[sl.start : sl.stop])
        x_r = dataset.images[src]
        x_t = pool.images[tgt]
        d_g_deg = np.stack(
            [[pool.rows[j].yaw, pool.rows[j].pitch] for j in tgt]
        )
        d_g_norm = np.stack(
            [
                normalize_gaze(GazeDirection(y, p), yaw_max, pitch_max).as_array()
                for y, p in d_g_deg
            ]
        ).astype(np.float32)

        x_g = generate_fn(x_r, d_g_norm)
        values["lpips"][sl] = lpips_model.distance_batch(x_g, x_t)
        values["mse"][sl] = (
            ((x_g.astype(np.float64) - x_t.astype(np.float64)) * 127.5) ** 2
        ).mean(axis=(1, 2, 3))
        for k in range(x_g.shape[0]):
            values["blurriness"][sl.start + k] = blurriness(
                (x_g[k] + 1.0) / 2.0, kernel=laplacian_kernel
            )
        estimates_deg = np.asarray(estimator_fn(x_g), dtype=np.float64)
        values["angular_error"][sl] = angular_error_array(d_g_deg, estimates_deg)

    counts, means, stds, mids = [], {m: [] for m in METRIC_NAMES}, {m: [] for m in METRIC_NAMES}, []
    for b in range(bins.n_bins):
        mask = bin_ids == b
        counts.append(int(mask.sum()))
        mids.append(float(gamma_arr[mask].mean()) if mask.any() else float("nan"))
        for m in METRIC_NAMES:
            means[m].append(float(values[m][mask].mean()) if mask.any() else float("nan"))
            stds[m].append(float(values[m][mask].std()) if mask.any() else float("nan"))

    return EvaluationReport(
        bin_labels=bins.labels(),
        counts=counts,
        means=means,
        stds=stds,
        gamma_mid=mids,
        total_pairs=n_pairs,
        skipped_pairs=skipped,
        config_echo=config_echo or {},
    )
