"""Ablation harness and the estimator data-augmentation study."""

import dataclasses
import json

import numpy as np
import pytest
import torch

from gazelab.config import TrainConfig
from gazelab.dataio.manifest import EyeDataset
from gazelab.dataio.synthetic import readout_gaze
from gazelab.errors import ConfigError, DataError
from gazelab.experiments import (
    ABLATION_VARIANTS,
    AblationSpec,
    build_augmented_dataset,
    raw_manifest,
    train_gaze_estimator,
)
from gazelab.losses import LossWeights
from gazelab.training import Trainer, sample_training_batch

from conftest import desk_study_spec as desk_spec, smoke_config


class TestAblationSpec:
    def test_variants_zero_exactly_one_weight(self):
        base = TrainConfig()
        for variant, zeroed in (
            ("no_rec", "lambda_rec"),
            ("no_gaze", "lambda_gaze"),
            ("no_p", "lambda_p"),
        ):
            cfg = AblationSpec(variant, base).config()
            weights = dataclasses.asdict(cfg.weights)
            assert weights.pop(zeroed) == 0.0
            reference = dataclasses.asdict(LossWeights())
            reference.pop(zeroed)
            assert weights == reference

    def test_full_variant_keeps_reference_weights(self):
        cfg = AblationSpec("full", TrainConfig()).config()
        assert cfg.weights == LossWeights(
            lambda_gp=10, lambda_p=100, lambda_gaze=5, lambda_rec=50
        )

    def test_unknown_variant_rejected(self):
        with pytest.raises(ConfigError):
            AblationSpec("no_everything", TrainConfig())

    def test_variant_list(self):
        assert ABLATION_VARIANTS == ("full", "no_rec", "no_gaze", "no_p")


class TestAblationArmsIdentical:
    def test_arms_share_data_order_and_initialization(self, train_dataset, tmp_path):
        base = smoke_config()
        trainers = {}
        for variant in ("full", "no_gaze"):
            cfg = AblationSpec(variant, base).config()
            trainers[variant] = Trainer(cfg, train_dataset, tmp_path / variant)

        a, b = trainers["full"], trainers["no_gaze"]
        for pa, pb in zip(a.generator.parameters(), b.generator.parameters()):
            assert torch.equal(pa, pb)
        for pa, pb in zip(a.discriminator.parameters(), b.discriminator.parameters()):
            assert torch.equal(pa, pb)

        batch_a = sample_training_batch(train_dataset, 8, base.seed, 0)
        batch_b = sample_training_batch(train_dataset, 8, base.seed, 0)
        assert np.array_equal(batch_a.x_r, batch_b.x_r)
        assert np.array_equal(batch_a.d_g, batch_b.d_g)




class TestRawManifest:
    def test_raw_rows_all_have_the_raw_pitch(self, study_world):
        _, manifest, _ = study_world
        raw = raw_manifest(manifest, desk_spec())
        assert len(raw) > 0
        assert all(r.pitch == 10.0 for r in raw.rows)
        assert all(not r.synthetic for r in raw.rows)
        # every subject contributes its 7 yaws x 2 eyes
        per_subject = {}
        for r in raw.rows:
            per_subject.setdefault(r.subject, 0)
            per_subject[r.subject] += 1
        assert set(per_subject.values()) == {14}

    def test_missing_pitch_is_data_error(self, study_world):
        _, manifest, _ = study_world
        with pytest.raises(DataError):
            raw_manifest(manifest, desk_spec(raw_pitch=77.0))


@pytest.fixture(scope="module")
def augmented(study_setup, tmp_path_factory):
    root, manifest, ckpt = study_setup
    out = tmp_path_factory.mktemp("augmented")
    return manifest, build_augmented_dataset(ckpt, manifest, desk_spec(), out), out


@pytest.mark.slow
class TestAugmentedDataset:
    def test_counting_per_source_image(self, augmented):
        manifest, aug, _ = augmented
        sources = sorted({r.subject for r in manifest.rows if r.split == "test"})
        n_source_images = sum(
            1
            for r in manifest.rows
            if r.subject in sources and r.pitch == 10.0 and not r.synthetic
        )
        synth_rows = [r for r in aug.rows if r.synthetic]
        # one image per (7 yaws x 2 pitches) target, no collisions possible
        # because the source pitch is not among the synthesized pitches
        assert len(synth_rows) == n_source_images * 14
        assert n_source_images == len(sources) * 14  # 7 yaws x 2 eyes each

    def test_augmented_contains_raw(self, augmented):
        manifest, aug, _ = augmented
        raw = raw_manifest(manifest, desk_spec())
        raw_paths = {str(r.path) for r in raw.rows}
        aug_real_paths = {str(r.path) for r in aug.rows if not r.synthetic}
        assert raw_paths == aug_real_paths

    def test_synthetic_flag_only_on_added_rows(self, augmented):
        manifest, aug, _ = augmented
        for r in aug.rows:
            if r.synthetic:
                assert r.pitch in (-10.0, 0.0)
            else:
                assert r.pitch == 10.0

    def test_labels_equal_requested_targets(self, augmented):
        _, aug, _ = augmented
        synth = [r for r in aug.rows if r.synthetic]
        yaws = {r.yaw for r in synth}
        pitches = {r.pitch for r in synth}
        assert pitches == {-10.0, 0.0}
        assert yaws == {-15.0, -10.0, -5.0, 0.0, 5.0, 10.0, 15.0}

    def test_no_real_images_at_synth_pitches_for_sources(self, augmented):
        """Leakage check: the augmented arm never trains on real images at
        the synthesized pitches."""
        _, aug, _ = augmented
        for r in aug.rows:
            if not r.synthetic:
                assert r.pitch == 10.0

    def test_synthesized_images_carry_roughly_correct_gaze(self, augmented):
        """The redirector's output iris position should agree with the row
        label well enough for the dark-centroid readout to confirm the
        synthesized pitches are below the raw pitch."""
        _, aug, out = augmented
        synth = [r for r in aug.rows if r.synthetic]
        dataset = EyeDataset(aug, rows=synth)
        est_pitch = np.array(
            [readout_gaze(dataset.images[i]).pitch for i in range(len(dataset))]
        )
        labels = np.array([r.pitch for r in synth])
        # directional: pitch -10 targets must read lower than pitch 0 targets
        assert est_pitch[labels == -10.0].mean() < est_pitch[labels == 0.0].mean()
        assert est_pitch.mean() < 8.0  # clearly below the raw-set pitch of 10


class TestEstimatorTraining:
    def test_estimator_learns_on_tiny_budget(self, study_world):
        _, manifest, _ = study_world
        raw = raw_manifest(manifest, desk_spec())
        dataset = EyeDataset(raw)
        net = train_gaze_estimator(
            dataset, epochs=8, lr=3e-4, betas=(0.5, 0.999),
            batch_size=16, width=0.125, seed=0,
        )
        from gazelab.metrics import estimator_from_net

        estimate = estimator_from_net(net)
        pred = estimate(dataset.images)
        truth = np.stack([[r.yaw, r.pitch] for r in dataset.rows])
        # on its own training distribution the yaw error must shrink well
        # below the 8.6-degree mean of a predict-zero baseline
        assert np.abs(pred[:, 0] - truth[:, 0]).mean() < 6.0

    def test_identical_arms_give_identical_errors(self, study_world):
        """Control: same manifest, same seed -> bit-identical estimators."""
        _, manifest, _ = study_world
        raw = raw_manifest(manifest, desk_spec())
        dataset = EyeDataset(raw)
        kwargs = dict(epochs=3, lr=3e-4, betas=(0.5, 0.999), batch_size=16, width=0.125, seed=4)
        net_a = train_gaze_estimator(dataset, **kwargs)
        net_b = train_gaze_estimator(dataset, **kwargs)
        for pa, pb in zip(net_a.parameters(), net_b.parameters()):
            assert torch.equal(pa, pb)


@pytest.fixture(scope="module")
def ablation_reports(study_world, tmp_path_factory):
    """Desk-scale ablation over (full, no_gaze, no_rec) with the synthetic
    readout oracle as evaluation estimator."""
    from gazelab.experiments import run_ablation
    from gazelab.metrics import LpipsModel

    root, manifest, manifest_path = study_world
    train_ds = EyeDataset(manifest, rows=manifest.split_rows("train"))
    test_ds = EyeDataset(manifest, rows=manifest.split_rows("test"))
    base = dataclasses.replace(
        smoke_config(str(manifest_path)), lr=0.0004, epochs=7, lr_decay_start=7
    )

    def readout_estimator(images):
        return np.stack(
            [
                (lambda d: (d.yaw, d.pitch))(readout_gaze(img))
                for img in images
            ]
        )

    out = tmp_path_factory.mktemp("ablation")
    reports = run_ablation(
        base,
        train_ds,
        test_ds,
        readout_estimator,
        LpipsModel.toy(),
        out,
        variants=("full", "no_gaze", "no_rec"),
    )
    return reports, out, train_ds, test_ds


@pytest.mark.slow
class TestAblationHarness:
    def test_reports_for_each_variant(self, ablation_reports):
        reports, out, _, _ = ablation_reports
        assert set(reports) == {"full", "no_gaze", "no_rec"}
        for variant, report in reports.items():
            assert report.total_pairs > 0
            assert (out / variant / "checkpoints" / "final.pt").exists()
            assert (out / variant / "training_log.jsonl").exists()

    def test_no_gaze_redirects_worse_than_full(self, ablation_reports):
        """Dropping the gaze loss must cost redirection accuracy."""
        reports, _, _, _ = ablation_reports
        full_err = reports["full"].overall_mean("angular_error")
        no_gaze_err = reports["no_gaze"].overall_mean("angular_error")
        assert no_gaze_err > full_err

    def test_full_cycles_better_than_no_rec(self, ablation_reports):
        """Cycle-reconstruction L1 on test sources is lower with the cycle
        loss than without it."""
        from gazelab.training import generate_batch, load_generator

        _, out, _, test_ds = ablation_reports
        cycle_l1 = {}
        flipped = -test_ds.gaze_n  # a fixed far-away target per sample
        for variant in ("full", "no_rec"):
            generator, _ = load_generator(out / variant / "checkpoints" / "final.pt")
            away = generate_batch(generator, test_ds.images, flipped)
            back = generate_batch(generator, away, test_ds.gaze_n)
            cycle_l1[variant] = float(np.abs(back - test_ds.images).mean())
        assert cycle_l1["full"] < cycle_l1["no_rec"]


@pytest.mark.slow
class TestAugmentationStudy:
    def test_augmented_arm_beats_raw_arm(self, study_result):
        """Directional reproduction of the augmentation effect."""
        result, _ = study_result
        raw_err = result.errors["columbia"]["raw"]
        aug_err = result.errors["columbia"]["augmented"]
        assert aug_err < raw_err

    def test_raw_arm_suffers_from_pitch_bias(self, study_result):
        # trained only on +10 degree pitches, tested on -10/0: double-digit error
        result, _ = study_result
        assert result.errors["columbia"]["raw"] > 8.0

    def test_table_and_artifacts_written(self, study_result):
        result, out = study_result
        table = (out / "study_table.csv").read_text().splitlines()
        assert table[0] == "dataset,raw,augmented"
        assert table[1].startswith("columbia,")
        payload = json.loads((out / "study_result.json").read_text())
        assert "errors" in payload and "counts" in payload
        assert payload["counts"]["augmented"]["synthetic_rows"] > 0
        assert (out / "raw_manifest.csv").exists()
        assert (out / "augmented_manifest.csv").exists()
        assert (out / "estimator_raw.pt").exists()
        assert (out / "estimator_augmented.pt").exists()
        for arm in ("raw", "augmented"):
            log = (out / f"estimator_{arm}_log.jsonl").read_text().splitlines()
            assert len(log) > 0
            first = json.loads(log[0])
            assert "epoch" in first and "mse" in first
