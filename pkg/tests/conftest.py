"""Shared fixtures: synthetic datasets and desk-scale training runs.

Session-scoped so the expensive pieces (rendering, smoke training) run
once for the whole suite.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import pytest

from gazelab.config import TrainConfig
from gazelab.dataio.manifest import EyeDataset, load_manifest
from gazelab.dataio.pipeline import prepare_dataset
from gazelab.dataio.synthetic import write_synthetic_dataset
from gazelab.losses import LossWeights
from gazelab.training import Trainer


@pytest.fixture(scope="session")
def synth_root(tmp_path_factory) -> Path:
    """Synthetic raw frames: 4 subjects, frontal pose, full 21-point grid."""
    root = tmp_path_factory.mktemp("synth")
    write_synthetic_dataset(root / "raw", n_subjects=4)
    return root


@pytest.fixture(scope="session")
def synth_manifest(synth_root):
    """Prepared manifest over the synthetic frames (1 test subject)."""
    manifest_path = synth_root / "manifest.csv"
    prepare_dataset(synth_root / "raw", manifest_path, n_test=1, seed=0)
    return load_manifest(manifest_path)


@pytest.fixture(scope="session")
def synth_dataset(synth_manifest) -> EyeDataset:
    return EyeDataset(synth_manifest)


@pytest.fixture(scope="session")
def train_dataset(synth_manifest) -> EyeDataset:
    return EyeDataset(synth_manifest, rows=synth_manifest.split_rows("train"))


def smoke_config(manifest_path: str = "", seed: int = 1) -> TrainConfig:
    """Reduced desk-scale training config.

    Channel widths, residual depth and the Adam rate are scaled down so
    200 generator updates on CPU converge in minutes; loss weights and the
    5:1 update protocol stay at their reference values.
    """
    return TrainConfig(
        epochs=20,
        batch_size=8,
        lr=0.0004,
        lr_decay_start=20,
        n_critic=5,
        seed=seed,
        checkpoint_every=10,
        gen_base_channels=16,
        disc_base_channels=16,
        n_residual_blocks=2,
        perceptual_width=0.125,
        manifest=manifest_path,
        weights=LossWeights(),
    )


@pytest.fixture(scope="session")
def smoke_run(tmp_path_factory):
    """Overfit smoke training: 2 subjects, 200 generator steps, batch 8.

    Returns (run_dir, checkpoint_path, dataset, log entries).
    """
    root = tmp_path_factory.mktemp("smoke")
    write_synthetic_dataset(root / "raw", n_subjects=2)
    manifest_path = root / "manifest.csv"
    prepare_dataset(root / "raw", manifest_path, n_test=0, seed=0)
    manifest = load_manifest(manifest_path)
    dataset = EyeDataset(manifest)  # 84 samples -> 10 generator steps/epoch

    run_dir = root / "run"
    trainer = Trainer(smoke_config(str(manifest_path)), dataset, run_dir)
    trainer.train()  # 20 epochs = 200 generator updates
    ckpt = trainer.save(run_dir / "checkpoints" / "final.pt")

    entries = [
        json.loads(line)
        for line in (run_dir / "training_log.jsonl").read_text().splitlines()
    ]
    return run_dir, ckpt, dataset, entries


def moving_average(values, window: int = 10) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64)
    kernel = np.ones(window) / window
    return np.convolve(arr, kernel, mode="valid")


# -- augmentation-study fixtures (shared by experiments and acceptance) ------


def desk_study_spec(**overrides):
    """AugmentationSpec with desk-scale estimator budgets."""
    from gazelab.experiments import AugmentationSpec

    base = dict(
        raw_epochs=40,
        aug_epochs=20,
        est_lr=0.0003,
        est_batch_size=16,
        est_width=0.125,
        seed=0,
    )
    base.update(overrides)
    return AugmentationSpec(**base)


@pytest.fixture(scope="session")
def study_world(tmp_path_factory):
    """Synthetic world for the augmentation study: 5 subjects, 2 of them
    split off as synthesis sources."""
    root = tmp_path_factory.mktemp("study")
    write_synthetic_dataset(root / "raw", n_subjects=5)
    manifest_path = root / "manifest.csv"
    prepare_dataset(root / "raw", manifest_path, n_test=2, seed=0)
    return root, load_manifest(manifest_path), manifest_path


@pytest.fixture(scope="session")
def study_setup(study_world):
    """study_world plus a briefly trained redirector on the train split."""
    import dataclasses

    root, manifest, manifest_path = study_world
    dataset = EyeDataset(manifest, rows=manifest.split_rows("train"))
    cfg = smoke_config(str(manifest_path))
    cfg = dataclasses.replace(cfg, lr=0.0004, epochs=10, lr_decay_start=10)
    trainer = Trainer(cfg, dataset, root / "redirector")
    trainer.train()  # 15 steps/epoch x 10 epochs = 150 generator updates
    ckpt = trainer.save(root / "redirector" / "final.pt")
    return root, manifest, ckpt


@pytest.fixture(scope="session")
def study_result(study_setup, tmp_path_factory):
    """Raw-vs-augmented estimator study at desk scale."""
    from gazelab.experiments import run_augmentation_study

    root, manifest, ckpt = study_setup
    out = tmp_path_factory.mktemp("study-out")
    result = run_augmentation_study(ckpt, manifest, desk_study_spec(), out)
    return result, out
