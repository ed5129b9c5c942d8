"""Eye-patch extraction, manifests, splits and ground-truth pairing."""

import numpy as np
import pytest
from PIL import Image

from gazelab.dataio.columbia import (
    FrameName,
    format_columbia_filename,
    parse_columbia_filename,
)
from gazelab.dataio.landmarks import (
    eye_points,
    read_landmark_sidecar,
    write_landmark_sidecar,
)
from gazelab.dataio.manifest import (
    DatasetManifest,
    FaceRecord,
    ManifestRow,
    find_ground_truth,
    load_manifest,
    prepare_sample,
    save_manifest,
    split_subjects,
)
from gazelab.dataio.patches import (
    crop_square,
    eye_crop_box,
    from_unit_range,
    to_unit_range,
)
from gazelab.dataio.synthetic import render_frame
from gazelab.errors import (
    DataError,
    ExtractionError,
    GroundTruthNotFound,
    ManifestParseError,
)
from gazelab.geometry import GazeDirection


class TestColumbiaFilenames:
    def test_documented_examples(self):
        f = parse_columbia_filename("0001_2m_0P_-10V_15H.jpg")
        assert (f.subject, f.distance, f.head_pose, f.pitch, f.yaw) == (
            1, "2m", 0.0, -10.0, 15.0,
        )
        f = parse_columbia_filename("0056_2m_30P_0V_0H.jpg")
        assert (f.subject, f.head_pose, f.pitch, f.yaw) == (56, 30.0, 0.0, 0.0)

    def test_malformed_name(self):
        with pytest.raises(ManifestParseError):
            parse_columbia_filename("face.jpg")

    def test_round_trip(self):
        frame = FrameName(7, "2m", -15.0, 10.0, -5.0, "png")
        assert parse_columbia_filename(format_columbia_filename(frame)) == frame


class TestCropGeometry:
    def test_crop_box_from_radius(self):
        # circle center (100, 100), radius 20 -> side 3.4 * 20 = 68
        pts = [(80, 100), (120, 100), (100, 90), (100, 110), (95, 95), (105, 105)]
        cx, cy, side = eye_crop_box(pts)
        assert (cx, cy) == pytest.approx((100.0, 100.0), abs=1e-9)
        assert side == pytest.approx(68.0, abs=1e-9)
        # box spans [66, 134] on both axes
        assert (cx - side / 2, cx + side / 2) == pytest.approx((66.0, 134.0))

    def test_degenerate_landmarks(self):
        with pytest.raises(ExtractionError):
            eye_crop_box([(5.0, 5.0)] * 6)

    def test_out_of_frame_crop_is_zero_padded(self):
        image = np.full((40, 40, 3), 200, dtype=np.uint8)
        out = crop_square(image, cx=0.0, cy=0.0, side=30.0)
        assert out.shape == (30, 30, 3)
        # upper-left half lies outside the frame
        assert np.all(out[0, :, :] == 0)
        assert np.all(out[:, 0, :] == 0)
        assert np.all(out[20, 20] == 200)


class TestPixelScaling:
    def test_all_256_levels_round_trip(self):
        levels = np.arange(256, dtype=np.uint8).reshape(16, 16)
        rgb = np.stack([levels] * 3, axis=-1)
        unit = to_unit_range(rgb)
        assert unit.min() == -1.0 and unit.max() == 1.0
        assert np.array_equal(from_unit_range(unit), rgb)

    def test_levels_evenly_spaced(self):
        unit = to_unit_range(np.arange(256, dtype=np.uint8))
        steps = np.diff(unit.astype(np.float64))
        assert np.allclose(steps, 2.0 / 255.0, atol=1e-7)

    def test_mid_gray_maps_near_zero(self):
        assert abs(float(to_unit_range(np.uint8(128)))) < 0.005


def _synthetic_record(tmp_path, subject=1, yaw=5.0, pitch=0.0):
    frame, lms = render_frame(subject, GazeDirection(yaw, pitch))
    path = tmp_path / f"{subject:04d}_2m_0P_{pitch:g}V_{yaw:g}H.png"
    Image.fromarray(frame).save(path)
    return FaceRecord(
        path=path,
        subject=f"{subject:04d}",
        head_pose=0.0,
        gaze=GazeDirection(yaw, pitch),
        landmarks=lms,
    )


class TestPrepareSample:
    def test_left_eye_label(self, tmp_path):
        record = _synthetic_record(tmp_path, yaw=5.0)
        sample = prepare_sample(record, "left")
        assert sample.image.shape == (64, 64, 3)
        assert sample.image.min() >= -1.0 and sample.image.max() <= 1.0
        assert sample.gaze_n.yaw_n == pytest.approx(1 / 3)
        assert sample.gaze_n.pitch_n == pytest.approx(0.0)

    def test_right_eye_label_negated(self, tmp_path):
        record = _synthetic_record(tmp_path, yaw=5.0)
        sample = prepare_sample(record, "right")
        assert sample.gaze_n.yaw_n == pytest.approx(-1 / 3)

    def test_all_gray_frame_maps_near_zero(self, tmp_path):
        record = _synthetic_record(tmp_path)
        gray = np.full((200, 200, 3), 128, dtype=np.uint8)
        Image.fromarray(gray).save(record.path)
        sample = prepare_sample(record, "left")
        assert np.max(np.abs(sample.image)) < 0.005

    def test_missing_landmarks(self, tmp_path):
        record = _synthetic_record(tmp_path)
        bare = FaceRecord(record.path, record.subject, 0.0, record.gaze, None)
        with pytest.raises(DataError):
            prepare_sample(bare, "left")

    def test_mirror_consistency(self, tmp_path):
        """right-eye sample == left-eye sample of the pre-mirrored frame."""
        record = _synthetic_record(tmp_path, subject=3, yaw=10.0, pitch=-10.0)
        right = prepare_sample(record, "right")

        frame = np.asarray(Image.open(record.path).convert("RGB"))
        mirrored = frame[:, ::-1]
        w = frame.shape[1]
        lms = np.asarray(record.landmarks).copy()
        lms[:, 0] = (w - 1) - lms[:, 0]
        # the subject's right eye becomes the left-eye landmark block
        flipped_lms = lms.copy()
        flipped_lms[42:48] = lms[36:42]
        flipped_lms[36:42] = lms[42:48]
        mirror_path = tmp_path / "0003_2m_0P_-10V_-10H.png"
        Image.fromarray(mirrored).save(mirror_path)
        mirrored_record = FaceRecord(
            path=mirror_path,
            subject=record.subject,
            head_pose=0.0,
            gaze=GazeDirection(-record.gaze.yaw, record.gaze.pitch),
            landmarks=flipped_lms,
        )
        left_of_mirrored = prepare_sample(mirrored_record, "left")

        assert left_of_mirrored.gaze_n == right.gaze_n
        diff = np.abs(left_of_mirrored.image - right.image)
        assert diff.max() < 2.0 / 255.0


class TestLandmarkReprojection:
    def test_eye_landmarks_project_into_patch_center_region(self, tmp_path):
        """Mapping the 6 eye landmarks through the crop-box transform must
        land them inside the patch, with the enclosing-circle center at
        the patch center."""
        from gazelab.dataio.landmarks import eye_points
        from gazelab.dataio.patches import PATCH_SIZE, eye_crop_box

        record = _synthetic_record(tmp_path, subject=2, yaw=-10.0, pitch=10.0)
        pts = eye_points(record.landmarks, "left")
        cx, cy, side = eye_crop_box(pts)
        scale = PATCH_SIZE / side
        projected = (pts - np.array([cx - side / 2, cy - side / 2])) * scale
        assert np.all(projected >= 0) and np.all(projected <= PATCH_SIZE)
        center = (np.array([cx, cy]) - np.array([cx - side / 2, cy - side / 2])) * scale
        assert np.allclose(center, PATCH_SIZE / 2, atol=1e-9)
        # the six contour points stay inside the central 3.4x-margin region:
        # the enclosing circle has diameter side/3.4, i.e. ~30% of the patch
        spread = np.abs(projected - PATCH_SIZE / 2).max()
        assert spread <= PATCH_SIZE / 3.4 / 2 + 1e-9


class TestLandmarkSidecars:
    def test_round_trip(self, tmp_path):
        img = tmp_path / "frame.png"
        img.touch()
        lms = np.random.default_rng(0).uniform(0, 100, (68, 2))
        write_landmark_sidecar(img, lms)
        back = read_landmark_sidecar(img)
        assert np.allclose(back, lms, atol=1e-6)

    def test_eye_point_slices(self):
        lms = np.arange(136, dtype=np.float64).reshape(68, 2)
        left = eye_points(lms, "left")
        right = eye_points(lms, "right")
        assert left.shape == (6, 2) and right.shape == (6, 2)
        assert np.array_equal(left[0], lms[42])
        assert np.array_equal(right[0], lms[36])
        with pytest.raises(ValueError):
            eye_points(lms, "middle")


def _manifest_rows(n_subjects=8, yaws=(0.0, 5.0), pitches=(0.0,)):
    rows = []
    for s in range(n_subjects):
        for yaw in yaws:
            for pitch in pitches:
                rows.append(
                    ManifestRow(
                        path=f"patch_{s}_{yaw}_{pitch}.png",
                        subject=f"{s:04d}",
                        head_pose=0.0,
                        pitch=pitch,
                        yaw=yaw,
                        eye_side="left",
                    )
                )
    return rows


class TestSplits:
    def test_50_6_style_split(self):
        manifest = DatasetManifest(_manifest_rows(n_subjects=56))
        split = split_subjects(manifest, n_test=6, seed=1)
        train = {r.subject for r in split.rows if r.split == "train"}
        test = {r.subject for r in split.rows if r.split == "test"}
        assert len(train) == 50 and len(test) == 6

    def test_deterministic_given_seed(self):
        manifest = DatasetManifest(_manifest_rows())
        a = split_subjects(manifest, n_test=2, seed=5)
        b = split_subjects(manifest, n_test=2, seed=5)
        assert [r.split for r in a.rows] == [r.split for r in b.rows]

    def test_zero_test_subjects(self):
        manifest = DatasetManifest(_manifest_rows())
        split = split_subjects(manifest, n_test=0, seed=0)
        assert all(r.split == "train" for r in split.rows)

    def test_invalid_n_test(self):
        manifest = DatasetManifest(_manifest_rows(n_subjects=4))
        with pytest.raises(ValueError):
            split_subjects(manifest, n_test=4, seed=0)

    def test_no_subject_leakage_across_seeds(self):
        manifest = DatasetManifest(_manifest_rows(n_subjects=10))
        for seed in range(20):
            split = split_subjects(manifest, n_test=3, seed=seed)
            train = {r.subject for r in split.rows if r.split == "train"}
            test = {r.subject for r in split.rows if r.split == "test"}
            assert not (train & test)
            assert len(train) + len(test) == 10


class TestGroundTruthPairing:
    def test_source_sample_is_its_own_ground_truth(self, synth_manifest):
        row = synth_manifest.rows[0]
        found = find_ground_truth(
            synth_manifest, row.subject, row.head_pose, row.eye_side, row.gaze
        )
        assert found == row

    def test_unique_grid_match(self, synth_manifest):
        row = synth_manifest.rows[0]
        target = GazeDirection(10.0, -10.0)
        found = find_ground_truth(
            synth_manifest, row.subject, row.head_pose, row.eye_side, target
        )
        assert found.yaw == 10.0 and found.pitch == -10.0
        assert found.subject == row.subject and found.eye_side == row.eye_side

    def test_off_grid_gaze_not_found_lists_nearest(self, synth_manifest):
        row = synth_manifest.rows[0]
        with pytest.raises(GroundTruthNotFound) as err:
            find_ground_truth(
                synth_manifest,
                row.subject,
                row.head_pose,
                row.eye_side,
                GazeDirection(7.0, 0.0),
            )
        assert "nearest" in str(err.value)

    def test_unknown_subject(self, synth_manifest):
        with pytest.raises(GroundTruthNotFound):
            find_ground_truth(
                synth_manifest, "9999", 0.0, "left", GazeDirection(0, 0)
            )


class TestManifestCsv:
    def test_round_trip(self, tmp_path):
        rows = _manifest_rows(n_subjects=3)
        manifest = DatasetManifest(rows)
        path = tmp_path / "manifest.csv"
        save_manifest(manifest, path)
        header = path.read_text().splitlines()[0]
        assert header == "path,subject,head_pose,pitch,yaw,eye_side,split"
        back = load_manifest(path)
        assert len(back) == len(rows)
        assert [str(r.path) for r in back.rows] == [str(r.path) for r in rows]
        assert [r.yaw for r in back.rows] == [r.yaw for r in rows]

    def test_synthetic_flag_round_trip(self, tmp_path):
        rows = _manifest_rows(n_subjects=2)
        rows[0] = ManifestRow(
            path=rows[0].path,
            subject=rows[0].subject,
            head_pose=0.0,
            pitch=0.0,
            yaw=0.0,
            eye_side="left",
            synthetic=True,
        )
        path = tmp_path / "manifest.csv"
        save_manifest(DatasetManifest(rows), path)
        back = load_manifest(path)
        assert back.rows[0].synthetic is True
        assert all(not r.synthetic for r in back.rows[1:])

    def test_bad_header_rejected(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("a,b,c\n1,2,3\n")
        with pytest.raises(ManifestParseError):
            load_manifest(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(DataError):
            load_manifest(tmp_path / "nope.csv")


class TestEyeDataset:
    def test_loaded_arrays(self, synth_dataset):
        n = len(synth_dataset)
        assert synth_dataset.images.shape == (n, 64, 64, 3)
        assert synth_dataset.gaze_n.shape == (n, 2)
        assert synth_dataset.images.dtype == np.float32
        assert np.all(np.abs(synth_dataset.gaze_n) <= 1.0)

    def test_candidate_targets_exclude_own_gaze(self, synth_dataset):
        # full grid: 21 directions -> 20 candidates per sample
        for i in (0, 5, 41):
            cands = synth_dataset.candidate_targets(i)
            assert len(cands) == 20
            row = synth_dataset.rows[i]
            for j in cands:
                other = synth_dataset.rows[j]
                assert (other.yaw, other.pitch) != (row.yaw, row.pitch)
                assert other.subject == row.subject
                assert other.eye_side == row.eye_side
