"""Acceptance suite: one test per release criterion, at pinned tolerances.

Run with `pytest -s tests/test_acceptance.py` to see one PASS/FAIL line
per criterion.
"""

import time
from contextlib import contextmanager

import numpy as np
import pytest

from bubbletrack import kalman
from bubbletrack.analytics import (
    all_departure_events,
    departure_events,
    departure_rate,
    frame_features,
)
from bubbletrack.cli import main as cli_main
from bubbletrack.corpus import Calibration, Category, save_dataset
from bubbletrack.evaluation import average_precision, evaluate
from bubbletrack.geometry import equivalent_diameter, extract_contour, parameterize
from bubbletrack.kalman import KalmanState
from bubbletrack.kinematics import velocity_profile
from bubbletrack.masks import BitMask, decode_rle, encode_mask
from bubbletrack.synthetic import (
    dilating_disk_dataset,
    growth_departure_dataset,
    moving_disks_dataset,
    rasterize_disk,
)
from bubbletrack.tracker import BubbleTracker, TrackerConfig, count_id_switches, run_tracker

from kalman_reference import predict_ref, update_ref
from synth_scenes import (
    assignments_against_truth,
    crossing_recovery_error,
    crossing_switch_count,
    separated_paths,
)
from test_analytics import square_det, track_with_classes
from test_evaluation import rank_sweep_ap, record
from test_tracker import brute_force_assignment


@contextmanager
def criterion(name):
    try:
        yield
    except BaseException:
        print(f"[FAIL] {name}")
        raise
    print(f"[PASS] {name}")


def profile_speeds(dataset):
    track_set = run_tracker(dataset)
    assert len(track_set.tracks) == 1
    samples = velocity_profile(track_set.tracks[0], 0, 5, dataset.calibration)
    return np.array([s.speed for s in samples])


def test_dilating_disk_velocity_oracle():
    with criterion("dilating-disk velocity oracle: +30 cm/s within 5%, signs positive, < 5 s"):
        t0 = time.perf_counter()
        speeds = profile_speeds(dilating_disk_dataset(r_start=50, r_end=55, n_frames=6))
        elapsed = time.perf_counter() - t0
        assert abs(speeds.mean() - 30.0) / 30.0 <= 0.05, speeds.mean()
        assert (speeds > 0).all()
        assert elapsed < 5.0, f"took {elapsed:.2f}s"


def test_shrinking_disk_mirror():
    with criterion("shrinking-disk mirror: -30 cm/s within 5%, signs negative"):
        speeds = profile_speeds(dilating_disk_dataset(r_start=55, r_end=50, n_frames=6))
        assert abs(speeds.mean() + 30.0) / 30.0 <= 0.05, speeds.mean()
        assert (speeds < 0).all()


def test_perimeter_convention():
    with criterion("perimeter convention: bottom 0, right 0.25, top 0.5 (+/- 1/perimeter)"):
        contour = extract_contour(rasterize_disk(70.0, 70.0, 50.0, 140, 140))
        param = parameterize(contour)
        tol = 1.0 / contour.perimeter

        def position_nearest(x, y):
            d = np.hypot(param.points[:, 0] - x, param.points[:, 1] - y)
            return float(param.positions[int(np.argmin(d))])

        bottom = position_nearest(70, 120)
        assert min(bottom, 1.0 - bottom) <= tol
        assert abs(position_nearest(120, 70) - 0.25) <= tol
        assert abs(position_nearest(70, 20) - 0.5) <= tol


def test_equivalent_diameter_eq1():
    with criterion("equivalent diameter: disks r in {20, 50, 100} px -> {0.4, 1.0, 2.0} cm within 2%"):
        cal = Calibration(pixels_per_cm=100.0, frame_rate=3000.0)
        for r, expect_cm in ((20, 0.4), (50, 1.0), (100, 2.0)):
            size = 2 * r + 20
            mask = rasterize_disk(size / 2, size / 2, r, size, size)
            d = equivalent_diameter(mask.area, cal)
            assert abs(d - expect_cm) / expect_cm <= 0.02, (r, d)


def test_tracking_identity_and_occlusion():
    with criterion("tracking identity: 2 ids / 0 switches; crossing <= 1 switch; re-update helps"):
        paths = separated_paths(100)
        ds = moving_disks_dataset(paths, width=300, height=300)
        assignments, tracker = assignments_against_truth(ds, BubbleTracker, TrackerConfig(), paths)
        assert len(tracker.tracks) == 2
        assert count_id_switches(assignments) == 0

        switches, n_tracks = crossing_switch_count(TrackerConfig())
        assert switches <= 1
        err_on, resumed_on = crossing_recovery_error(TrackerConfig())
        err_off, resumed_off = crossing_recovery_error(TrackerConfig(reupdate=False))
        assert resumed_on and resumed_off
        assert err_on < err_off, (err_on, err_off)


def test_assignment_optimality():
    with criterion("assignment optimality: 500 random cost matrices match brute force exactly"):
        from scipy.optimize import linear_sum_assignment

        rng = np.random.default_rng(321)
        for _ in range(500):
            n = int(rng.integers(1, 7))
            m = int(rng.integers(1, 7))
            cost = rng.normal(size=(n, m))
            rows, cols = linear_sum_assignment(cost)
            total = float(cost[rows, cols].sum())
            assert total == pytest.approx(brute_force_assignment(cost), abs=1e-12)


def test_kalman_oracle():
    with criterion("kalman oracle: 1000 random predict/update steps match reference to 1e-9"):
        rng = np.random.default_rng(654)
        for _ in range(500):
            mean = np.concatenate(
                [
                    rng.uniform(0, 500, size=2),
                    [rng.uniform(100, 10000), rng.uniform(0.3, 3.0)],
                    rng.uniform(-5, 5, size=2),
                    [rng.uniform(-20, 20)],
                ]
            )
            a = rng.normal(size=(7, 7))
            cov = a @ a.T + 0.5 * np.eye(7)
            st = KalmanState(mean=mean, covariance=cov)

            predicted, _ = kalman.predict(st)
            ref_mean, ref_cov = predict_ref(
                mean.tolist(), cov.tolist(), kalman.F.tolist(), kalman.Q_PROCESS.tolist()
            )
            np.testing.assert_allclose(predicted.mean, ref_mean, atol=1e-9)
            np.testing.assert_allclose(predicted.covariance, ref_cov, atol=1e-9)

            z = np.array(
                [
                    rng.uniform(0, 500),
                    rng.uniform(0, 500),
                    rng.uniform(100, 10000),
                    rng.uniform(0.3, 3.0),
                ]
            )
            updated = kalman.update(st, z)
            ref_mean, ref_cov = update_ref(
                mean.tolist(), cov.tolist(), z.tolist(),
                kalman.H.tolist(), kalman.R_MEASUREMENT.tolist(),
            )
            np.testing.assert_allclose(updated.mean, ref_mean, atol=1e-9)
            np.testing.assert_allclose(updated.covariance, ref_cov, atol=1e-9)


def test_average_precision_oracle():
    with criterion("AP oracle: 200 random scenes vs rank sweep (1e-12); hand cases; evaluate(X, X) = 1"):
        rng = np.random.default_rng(987)
        for _ in range(200):
            n_gt = int(rng.integers(1, 6))
            budget = n_gt
            records = []
            for _ in range(int(rng.integers(0, 11))):
                is_tp = bool(rng.random() < 0.5) and budget > 0
                budget -= is_tp
                records.append(record(float(rng.random()), is_tp))
            assert average_precision(records, n_gt) == pytest.approx(
                rank_sweep_ap(records, n_gt), abs=1e-12
            )

        assert average_precision([record(0.9, True)], 1) == 1.0
        assert average_precision([record(0.9, True), record(0.8, False)], 1) == 1.0
        assert average_precision([record(0.9, False), record(0.8, True)], 1) == 0.5

        for fixture in (
            growth_departure_dataset(n_frames=6),
            dilating_disk_dataset(n_frames=4),
        ):
            report = evaluate(fixture, fixture)
            assert report.ap == 1.0 and report.ap50 == 1.0 and report.ap75 == 1.0


def test_departure_logic():
    with criterion("departure logic: planted histories for k in {1,2,3}; exact rate; fraction ordering"):
        cases = {
            1: ("AAADDD", [3]),
            2: ("AADADD", [4]),
            3: ("AAADADDD", [5]),
        }
        for k, (history, expect) in cases.items():
            track = track_with_classes(history)
            assert [e.frame_index for e in departure_events(track, k)] == expect
        assert departure_events(track_with_classes("AAAA"), 1) == []

        ds = growth_departure_dataset(departure_frame=25)
        events = all_departure_events(run_tracker(ds), debounce_k=3)
        assert [e.frame_index for e in events] == [25]
        assert departure_rate(events, 2.0) == 0.5
        assert departure_rate(events * 3, 2.0) == 1.5

        rng = np.random.default_rng(135)
        cal = Calibration(pixels_per_cm=100.0, frame_rate=3000.0)
        from bubbletrack.corpus import Frame

        for _ in range(1000):
            dets = []
            for _ in range(int(rng.integers(0, 5))):
                x, y = (int(v) for v in rng.integers(0, 70, size=2))
                side = int(rng.integers(2, 25))
                cat = (Category.ATTACHED, Category.DETACHED, Category.BUBBLE)[
                    int(rng.integers(0, 3))
                ]
                dets.append(square_det(x, y, side, category=cat))
            ff = frame_features(Frame(index=0, detections=dets), cal, 100, 100)
            assert 0.0 <= ff.vapor_fraction_attached <= ff.vapor_fraction_total <= 1.0


def test_roundtrip_and_determinism(tmp_path):
    with criterion("round-trip + determinism: RLE identity x1000; pipeline reruns byte-identical"):
        rng = np.random.default_rng(246)
        for _ in range(1000):
            h, w = (int(v) for v in rng.integers(1, 24, size=2))
            mask = BitMask(rng.random((h, w)) < rng.uniform(0.1, 0.9))
            assert decode_rle(encode_mask(mask), w, h) == mask

        input_path = tmp_path / "demo.json"
        save_dataset(growth_departure_dataset(), input_path)
        outs = []
        for name in ("a", "b"):
            out = tmp_path / name
            rc = cli_main(
                [
                    "all",
                    "--input", str(input_path),
                    "--ground-truth", str(input_path),
                    "--out-dir", str(out),
                ]
            )
            assert rc == 0
            outs.append(
                {
                    str(p.relative_to(out)): p.read_bytes()
                    for p in sorted(out.rglob("*"))
                    if p.is_file() and p.name != "manifest.json"
                }
            )
        assert outs[0].keys() == outs[1].keys()
        assert outs[0] == outs[1]
