"""Experiment harnesses: loss-term ablation and the data-augmentation study.

Ablation trains model variants that differ only in one zeroed loss weight
(identical seeds, data order and initialization) and evaluates each with
the standard protocol.

The augmentation study measures whether synthesized gaze images improve a
gaze estimator.  The raw arm trains on real images of a single pitch; the
augmented arm adds images synthesized at the missing pitches for a set of
source subjects.  Both estimators are evaluated on real images at the
held-out pitches of the remaining subjects.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import logging
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
import torch
from PIL import Image

from .config import TrainConfig
from .dataio.manifest import DatasetManifest, EyeDataset, ManifestRow, save_manifest
from .dataio.patches import from_unit_range
from .errors import ConfigError, DataError
from .geometry import COLUMBIA_YAWS, GazeDirection, angular_error_array, normalize_gaze
from .metrics import BinSpec, EvaluationReport, LpipsModel, estimator_from_net, evaluate_model
from .models import PerceptualRegressor, save_checkpoint
from .seeding import rng
from .training import Trainer, generate_batch, load_generator

log = logging.getLogger(__name__)

ABLATION_VARIANTS = ("full", "no_rec", "no_gaze", "no_p")
_ZEROED_WEIGHT = {"no_rec": "lambda_rec", "no_gaze": "lambda_gaze", "no_p": "lambda_p"}


@dataclass(frozen=True)
class AblationSpec:
    variant: str
    base: TrainConfig

    def __post_init__(self):
        if self.variant not in ABLATION_VARIANTS:
            raise ConfigError(
                f"variant must be one of {ABLATION_VARIANTS}, got {self.variant!r}"
            )

    def config(self) -> TrainConfig:
        if self.variant == "full":
            return self.base
        zeroed = _ZEROED_WEIGHT[self.variant]
        weights = replace(self.base.weights, **{zeroed: 0.0})
        return replace(self.base, weights=weights)


def run_ablation(
    base_config: TrainConfig,
    train_dataset: EyeDataset,
    test_dataset: EyeDataset,
    estimator_fn,
    lpips_model: LpipsModel,
    out_dir: Path,
    variants: Sequence[str] = ABLATION_VARIANTS,
    epochs: Optional[int] = None,
    bins: BinSpec = BinSpec(),
) -> dict[str, EvaluationReport]:
    """Train and evaluate each requested variant under identical conditions."""
    out_dir = Path(out_dir)
    reports = {}
    for variant in variants:
        spec = AblationSpec(variant, base_config)
        arm_dir = out_dir / variant
        trainer = Trainer(spec.config(), train_dataset, arm_dir)
        trainer.train(epochs)
        ckpt = trainer.save(arm_dir / "checkpoints" / "final.pt")
        generator, _ = load_generator(ckpt)
        report = evaluate_model(
            lambda x, d, g=generator: generate_batch(g, x, d),
            test_dataset,
            estimator_fn,
            lpips_model,
            bins=bins,
            config_echo={"variant": variant},
        )
        reports[variant] = report
        log.info(
            "ablation %s: angular %.2f deg, lpips %.4f",
            variant,
            report.overall_mean("angular_error"),
            report.overall_mean("lpips"),
        )
    return reports


@dataclass(frozen=True)
class AugmentationSpec:
    """Protocol constants of the augmentation study."""

    raw_pitch: float = 10.0
    synth_pitches: tuple[float, ...] = (-10.0, 0.0)
    synth_yaws: tuple[float, ...] = COLUMBIA_YAWS
    source_subjects: tuple[str, ...] = ()  # default: the manifest's test split
    raw_epochs: int = 200
    aug_epochs: int = 100
    est_lr: float = 0.00005
    est_beta1: float = 0.5
    est_beta2: float = 0.999
    est_batch_size: int = 32
    est_width: float = 1.0
    seed: int = 0


def _source_subjects(manifest: DatasetManifest, spec: AugmentationSpec) -> list[str]:
    if spec.source_subjects:
        return list(spec.source_subjects)
    subjects = sorted({r.subject for r in manifest.rows if r.split == "test"})
    if not subjects:
        raise DataError("manifest has no test split to act as synthesis sources")
    return subjects


def raw_manifest(manifest: DatasetManifest, spec: AugmentationSpec) -> DatasetManifest:
    """Real rows at the raw pitch, across all subjects."""
    rows = [
        replace(r, split="train")
        for r in manifest.rows
        if not r.synthetic and abs(r.pitch - spec.raw_pitch) < 1e-9
    ]
    if not rows:
        raise DataError(f"no rows with pitch {spec.raw_pitch} in manifest")
    return DatasetManifest(rows, manifest.yaw_max, manifest.pitch_max)


def build_augmented_dataset(
    checkpoint_path: Path,
    manifest: DatasetManifest,
    spec: AugmentationSpec,
    out_dir: Path,
) -> DatasetManifest:
    """Raw rows plus images synthesized at the missing pitches.

    For every raw-pitch image of each source subject, one image is
    synthesized per (yaw, pitch) target over the configured target grid;
    targets colliding with the source gaze are skipped.  Synthesized rows
    carry ``synthetic=true`` and the target gaze as their label.
    """
    out_dir = Path(out_dir)
    synth_dir = out_dir / "synthetic_patches"
    synth_dir.mkdir(parents=True, exist_ok=True)

    base = raw_manifest(manifest, spec)
    sources = set(_source_subjects(manifest, spec))
    source_rows = [r for r in base.rows if r.subject in sources]
    if not source_rows:
        raise DataError("no raw-pitch rows for the synthesis source subjects")

    generator, gen_config = load_generator(checkpoint_path)
    targets = [
        GazeDirection(yaw, pitch)
        for pitch in spec.synth_pitches
        for yaw in spec.synth_yaws
    ]

    src_dataset = EyeDataset(manifest, rows=source_rows)
    new_rows: list[ManifestRow] = []
    for i, row in enumerate(source_rows):
        wanted = [
            t
            for t in targets
            if abs(t.yaw - row.yaw) > 1e-9 or abs(t.pitch - row.pitch) > 1e-9
        ]
        gaze_n = np.stack(
            [
                normalize_gaze(t, manifest.yaw_max, manifest.pitch_max).as_array()
                for t in wanted
            ]
        ).astype(np.float32)
        batch = np.repeat(src_dataset.images[i][None], len(wanted), axis=0)
        generated = generate_batch(generator, batch, gaze_n)
        for t, img in zip(wanted, generated):
            name = (
                f"synth_{row.subject}_{row.head_pose:g}P_{t.pitch:g}V_{t.yaw:g}H_"
                f"{row.eye_side}_src{i:04d}.png"
            )
            path = synth_dir / name
            Image.fromarray(from_unit_range(img)).save(path)
            new_rows.append(
                ManifestRow(
                    path=path,
                    subject=row.subject,
                    head_pose=row.head_pose,
                    pitch=t.pitch,
                    yaw=t.yaw,
                    eye_side=row.eye_side,
                    split="train",
                    synthetic=True,
                )
            )

    augmented = DatasetManifest(
        base.rows + new_rows, manifest.yaw_max, manifest.pitch_max
    )
    save_manifest(augmented, out_dir / "augmented_manifest.csv")
    return augmented


def train_gaze_estimator(
    dataset: EyeDataset,
    epochs: int,
    lr: float,
    betas: tuple[float, float],
    batch_size: int,
    width: float,
    seed: int,
    log_path: Optional[Path] = None,
) -> PerceptualRegressor:
    """Train a feature-stack regressor on normalized gaze labels (MSE)."""
    net = PerceptualRegressor(width_multiplier=width, seed=seed)
    opt = torch.optim.Adam(net.parameters(), lr=lr, betas=betas)
    n = len(dataset)
    if n < batch_size:
        batch_size = n
    images = torch.from_numpy(dataset.images).permute(0, 3, 1, 2)
    labels = torch.from_numpy(dataset.gaze_n)
    log_fh = Path(log_path).open("w") if log_path else None
    for epoch in range(epochs):
        perm = rng(seed, "estimator-epoch", epoch).permutation(n)
        epoch_losses = []
        for start in range(0, n - batch_size + 1, batch_size):
            idx = torch.from_numpy(perm[start : start + batch_size].copy())
            pred = net(images[idx])
            loss = ((pred - labels[idx]) ** 2).sum(dim=1).mean()
            opt.zero_grad(set_to_none=True)
            loss.backward()
            opt.step()
            epoch_losses.append(float(loss.detach()))
        if log_fh:
            log_fh.write(
                json.dumps(
                    {"epoch": epoch + 1, "mse": float(np.mean(epoch_losses))}
                )
                + "\n"
            )
    if log_fh:
        log_fh.close()
    net.eval()
    return net


def _estimator_error_deg(
    net: PerceptualRegressor, dataset: EyeDataset
) -> float:
    """Mean angular error of an estimator over a dataset, in degrees."""
    estimate = estimator_from_net(
        net, dataset.manifest.yaw_max, dataset.manifest.pitch_max
    )
    errors = []
    for start in range(0, len(dataset), 128):
        imgs = dataset.images[start : start + 128]
        truth = np.stack(
            [[r.yaw, r.pitch] for r in dataset.rows[start : start + 128]]
        )
        errors.append(angular_error_array(truth, estimate(imgs)))
    return float(np.concatenate(errors).mean())


@dataclass
class StudyResult:
    errors: dict[str, dict[str, float]]  # test set -> arm -> mean degrees
    counts: dict[str, dict[str, int]]  # arm -> row counts

    def to_dict(self) -> dict:
        return {"errors": self.errors, "counts": self.counts}


def run_augmentation_study(
    checkpoint_path: Path,
    manifest: DatasetManifest,
    spec: AugmentationSpec,
    out_dir: Path,
    external_test: Optional[DatasetManifest] = None,
) -> StudyResult:
    """Train raw-arm and augmented-arm estimators and compare their errors.

    ``external_test`` is an optional preprocessed manifest of another
    dataset (cross-dataset row); when absent only the in-dataset test row
    is produced.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    arm_raw = raw_manifest(manifest, spec)
    save_manifest(arm_raw, out_dir / "raw_manifest.csv")
    arm_aug = build_augmented_dataset(checkpoint_path, manifest, spec, out_dir)

    sources = set(_source_subjects(manifest, spec))
    test_rows = [
        r
        for r in manifest.rows
        if not r.synthetic
        and r.subject not in sources
        and any(abs(r.pitch - p) < 1e-9 for p in spec.synth_pitches)
    ]
    if not test_rows:
        raise DataError("no held-out rows at the synthesized pitches")
    test_dataset = EyeDataset(manifest, rows=test_rows)

    errors: dict[str, dict[str, float]] = {"columbia": {}}
    counts: dict[str, dict[str, int]] = {}
    for arm, arm_manifest, epochs in (
        ("raw", arm_raw, spec.raw_epochs),
        ("augmented", arm_aug, spec.aug_epochs),
    ):
        dataset = EyeDataset(arm_manifest)
        net = train_gaze_estimator(
            dataset,
            epochs=epochs,
            lr=spec.est_lr,
            betas=(spec.est_beta1, spec.est_beta2),
            batch_size=spec.est_batch_size,
            width=spec.est_width,
            seed=spec.seed,
            log_path=out_dir / f"estimator_{arm}_log.jsonl",
        )
        save_checkpoint(
            out_dir / f"estimator_{arm}.pt",
            nets={"estimator": net},
            spec=dataclasses.asdict(spec),
            arm=arm,
        )
        errors["columbia"][arm] = _estimator_error_deg(net, test_dataset)
        counts[arm] = {
            "train_rows": len(dataset),
            "synthetic_rows": sum(r.synthetic for r in arm_manifest.rows),
        }
        if external_test is not None:
            ext_dataset = EyeDataset(external_test)
            errors.setdefault("external", {})[arm] = _estimator_error_deg(
                net, ext_dataset
            )
        log.info("augmentation arm %s: %.2f deg", arm, errors["columbia"][arm])

    result = StudyResult(errors=errors, counts=counts)
    with (out_dir / "study_table.csv").open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["dataset", "raw", "augmented"])
        for name, row in result.errors.items():
            writer.writerow([name, f"{row['raw']:.2f}", f"{row['augmented']:.2f}"])
    (out_dir / "study_result.json").write_text(json.dumps(result.to_dict(), indent=2))
    return result
