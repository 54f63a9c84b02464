import json
from pathlib import Path

import numpy as np
import pytest
from PIL import Image

from bubbleexport.adapters import ThresholdModel, load_adapter
from bubbleexport.cli import main
from bubbleexport.export import (
    ExportError,
    ExportManifest,
    encode_rle,
    export_frames,
    parse_class_map,
)

# the primary package is the contract validator for everything we emit
import bubbletrack


def disk_pixels(cx, cy, r, width, height):
    ys = np.arange(height) + 0.5
    xs = np.arange(width) + 0.5
    return (xs[None, :] - cx) ** 2 + (ys[:, None] - cy) ** 2 <= r * r


def write_disk_frames(root: Path, n_frames=50, width=96, height=96):
    """White disk on black, drifting upward; returns per-frame truth masks."""
    truths = []
    for t in range(n_frames):
        mask = disk_pixels(48.0, 70.0 - 0.5 * t, 16.0 + 0.1 * t, width, height)
        img = np.where(mask, 255, 0).astype(np.uint8)
        Image.fromarray(img).save(root / f"frame_{t:04d}.png")
        truths.append(mask)
    return truths


class TestThresholdModel:
    def test_single_disk(self):
        mask = disk_pixels(20, 20, 8, 48, 48)
        img = np.where(mask, 255, 0).astype(np.uint8)
        preds = ThresholdModel().predict(img)
        assert len(preds) == 1
        assert np.array_equal(preds[0].mask, mask)

    def test_dark_polarity(self):
        mask = disk_pixels(20, 20, 8, 48, 48)
        img = np.where(mask, 0, 255).astype(np.uint8)
        preds = ThresholdModel(polarity="dark").predict(img)
        assert len(preds) == 1
        assert np.array_equal(preds[0].mask, mask)

    def test_min_area_filters_specks(self):
        img = np.zeros((32, 32), np.uint8)
        img[4, 4] = 255
        img[10:20, 10:20] = 255
        preds = ThresholdModel(min_area=4).predict(img)
        assert len(preds) == 1
        assert preds[0].mask.sum() == 100

    def test_weights_file(self, tmp_path):
        weights = tmp_path / "w.json"
        weights.write_text(json.dumps({"threshold": 50, "polarity": "light", "class_id": 2}))
        model = load_adapter("threshold", str(weights))
        assert model.threshold == 50 and model.class_id == 2

    def test_unknown_adapter_rejected(self):
        with pytest.raises(ValueError):
            load_adapter("segment-anything", None)


class TestClassMap:
    def test_parse(self):
        assert parse_class_map("attached=1,detached=2") == {1: "attached", 2: "detached"}
        assert parse_class_map("bubble=1") == {1: "bubble"}

    def test_bad_entries(self):
        with pytest.raises(ExportError):
            parse_class_map("attached")
        with pytest.raises(ExportError):
            parse_class_map("attached=x")
        with pytest.raises(ExportError):
            parse_class_map("")

    def test_unknown_category_rejected(self):
        with pytest.raises(ExportError):
            ExportManifest(
                adapter="threshold",
                weights=None,
                class_map={1: "droplet"},
                min_score=0.5,
                frame_rate_fps=150.0,
                pixels_per_cm=50.0,
            )


class TestRle:
    def test_matches_primary_encoding(self, rng=np.random.default_rng(11)):
        from bubbletrack.masks import BitMask, encode_mask

        for _ in range(200):
            data = rng.random((rng.integers(1, 16), rng.integers(1, 16))) < 0.5
            assert encode_rle(data) == encode_mask(BitMask(data))


class TestExportContract:
    def test_fifty_frames_pass_primary_validation(self, tmp_path):
        frames_dir = tmp_path / "frames"
        frames_dir.mkdir()
        truths = write_disk_frames(frames_dir, n_frames=50)
        out = tmp_path / "export.json"
        rc = main(
            [
                "--input", str(frames_dir),
                "--map", "bubble=1",
                "--fps", "3000",
                "--px-per-cm", "100",
                "--out", str(out),
            ]
        )
        assert rc == 0
        ds = bubbletrack.load_dataset(out)  # zero validation errors
        assert len(ds.frames) == 50
        for frame, truth in zip(ds.frames, truths):
            assert len(frame.detections) == 1
            det = frame.detections[0]
            # pixel counts and the mask itself survive RLE exactly
            assert det.mask.area == int(truth.sum())
            assert np.array_equal(det.mask.data, truth)
            assert det.category is bubbletrack.Category.BUBBLE
        doc = json.loads(out.read_text())
        assert doc["export_manifest"]["min_score"] == 0.5

    def test_export_feeds_primary_tracker(self, tmp_path):
        frames_dir = tmp_path / "frames"
        frames_dir.mkdir()
        write_disk_frames(frames_dir, n_frames=12)
        out = tmp_path / "export.json"
        assert main(
            [
                "--input", str(frames_dir),
                "--map", "bubble=1",
                "--fps", "3000",
                "--px-per-cm", "100",
                "--out", str(out),
            ]
        ) == 0
        ds = bubbletrack.load_dataset(out)
        track_set = bubbletrack.run_tracker(ds)
        assert len(track_set.tracks) == 1
        assert track_set.tracks[0].observed_frames == list(range(12))

    def test_empty_directory_warning_exit(self, tmp_path, capsys):
        frames_dir = tmp_path / "empty"
        frames_dir.mkdir()
        out = tmp_path / "export.json"
        rc = main(
            [
                "--input", str(frames_dir),
                "--map", "bubble=1",
                "--fps", "150",
                "--px-per-cm", "50",
                "--out", str(out),
            ]
        )
        assert rc == 1
        doc = json.loads(out.read_text())
        assert doc["frames"] == []
        assert "no frames" in capsys.readouterr().err

    def test_unmapped_class_is_hard_error(self, tmp_path, capsys):
        frames_dir = tmp_path / "frames"
        frames_dir.mkdir()
        write_disk_frames(frames_dir, n_frames=2)
        weights = tmp_path / "w.json"
        weights.write_text(json.dumps({"class_id": 7}))
        rc = main(
            [
                "--input", str(frames_dir),
                "--map", "bubble=1",
                "--fps", "150",
                "--px-per-cm", "50",
                "--weights", str(weights),
                "--out", str(tmp_path / "x.json"),
            ]
        )
        assert rc == 3
        assert "class id 7" in capsys.readouterr().err

    def test_missing_input_exit_2(self, tmp_path):
        rc = main(
            [
                "--input", str(tmp_path / "nope"),
                "--map", "bubble=1",
                "--fps", "150",
                "--px-per-cm", "50",
                "--out", str(tmp_path / "x.json"),
            ]
        )
        assert rc == 2

    def test_min_score_recorded_and_applied(self, tmp_path):
        class HalfScoreModel:
            def predict(self, image):
                from bubbleexport.adapters import Prediction

                mask = disk_pixels(20, 20, 8, *image.shape[::-1])
                return [Prediction(mask=mask, class_id=1, score=0.4)]

        frames_dir = tmp_path / "frames"
        frames_dir.mkdir()
        write_disk_frames(frames_dir, n_frames=2, width=48, height=48)
        manifest = ExportManifest(
            adapter="custom",
            weights=None,
            class_map={1: "bubble"},
            min_score=0.5,
            frame_rate_fps=150.0,
            pixels_per_cm=50.0,
        )
        from bubbleexport.export import iter_directory_frames

        doc = export_frames(iter_directory_frames(frames_dir), HalfScoreModel(), manifest)
        assert all(f["detections"] == [] for f in doc["frames"])


class TestVideoInput:
    def test_video_round_trip(self, tmp_path):
        cv2 = pytest.importorskip("cv2")
        video = tmp_path / "clip.avi"
        writer = cv2.VideoWriter(
            str(video), cv2.VideoWriter_fourcc(*"MJPG"), 30.0, (96, 96), isColor=False
        )
        if not writer.isOpened():
            pytest.skip("no usable video codec in this environment")
        truths = []
        for t in range(6):
            mask = disk_pixels(48.0, 60.0 - t, 14.0, 96, 96)
            truths.append(mask)
            writer.write(np.where(mask, 255, 0).astype(np.uint8))
        writer.release()
        out = tmp_path / "export.json"
        rc = main(
            [
                "--input", str(video),
                "--map", "bubble=1",
                "--fps", "30",
                "--px-per-cm", "50",
                "--out", str(out),
            ]
        )
        assert rc == 0
        ds = bubbletrack.load_dataset(out)
        assert len(ds.frames) == 6
        # MJPG is lossy; the thresholded area should still be close
        for frame, truth in zip(ds.frames, truths):
            assert len(frame.detections) == 1
            area = frame.detections[0].mask.area
            assert abs(area - truth.sum()) / truth.sum() < 0.05
