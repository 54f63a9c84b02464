"""Command-line pipeline: track, features, velocity, evaluate, all, convert.

Every run writes a manifest (config echo with all defaults explicit,
version, stage timings) into the output directory, even when a stage
fails. Exit codes: 0 ok, 2 input error, 3 usage error, 4 internal error.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from functools import partial
from pathlib import Path

from . import __version__
from .analytics import (
    AnalyticsConfig,
    all_departure_events,
    bubble_vapor_fraction,
    dataset_features,
    departure_summary,
    diameter_histogram,
)
from .corpus import Dataset, coco_to_ingestion, load_dataset
from .errors import IngestError, UsageError
from .evaluation import evaluate
from .kinematics import (
    KinematicsConfig,
    evaluated_frames,
    max_velocity_series,
    smooth,
    spectrogram,
)
from .report import (
    write_contours_csv,
    write_departures_csv,
    write_features_csv,
    write_histogram_csv,
    write_json,
    write_max_velocity_csv,
    write_spectrogram_csv,
    write_track_features_csv,
)
from .tracker import Track, TrackerConfig, TrackSet, run_tracker

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_USAGE = 3
EXIT_INTERNAL = 4


@dataclass(frozen=True)
class RunConfig:
    input: str | None
    ground_truth: str | None
    out_dir: str
    workers: int
    figures: bool
    track_id: int | None
    eval_mode: str
    speed_range_cm_s: float
    tracker: TrackerConfig
    kinematics: KinematicsConfig
    analytics: AnalyticsConfig

    def to_doc(self) -> dict:
        doc = asdict(self)
        return doc


def _load_config_file(path: str | None) -> dict:
    if not path:
        return {}
    p = Path(path)
    if not p.exists():
        raise IngestError(f"config file not found: {p}")
    try:
        return json.loads(p.read_text())
    except json.JSONDecodeError as e:
        raise IngestError(f"config file is not valid JSON: {e}", path=str(p)) from None


def _section(doc: dict, name: str, cls, overrides: dict):
    fields = dict(doc.get(name, {}))
    fields.update({k: v for k, v in overrides.items() if v is not None})
    try:
        return cls(**fields)
    except TypeError as e:
        raise UsageError(f"bad {name} config: {e}") from None


def build_run_config(args) -> RunConfig:
    doc = _load_config_file(getattr(args, "config", None))
    tracker = _section(
        doc,
        "tracker",
        TrackerConfig,
        {
            "iou_threshold": getattr(args, "iou_threshold", None),
            "score_threshold": getattr(args, "score_threshold", None),
            "max_age": getattr(args, "max_age", None),
            "min_hits": getattr(args, "min_hits", None),
            "ocm_weight": getattr(args, "ocm_weight", None),
            "reupdate": (False if getattr(args, "no_reupdate", False) else None),
        },
    )
    kinematics = _section(
        doc,
        "kinematics",
        KinematicsConfig,
        {
            "delta_frames": getattr(args, "delta_frames", None),
            "bins": getattr(args, "bins", None),
            "stride": getattr(args, "stride", None),
            "sigma_position": getattr(args, "sigma_pos", None),
            "sigma_time": getattr(args, "sigma_time", None),
        },
    )
    analytics = _section(
        doc,
        "analytics",
        AnalyticsConfig,
        {
            "debounce_k": getattr(args, "debounce", None),
            "histogram_bin_mm": getattr(args, "bin_width_mm", None),
        },
    )
    return RunConfig(
        input=getattr(args, "input", None),
        ground_truth=getattr(args, "ground_truth", None),
        out_dir=args.out_dir,
        workers=max(1, getattr(args, "workers", 1) or 1),
        figures=not getattr(args, "no_figures", False),
        track_id=getattr(args, "track_id", None),
        eval_mode=getattr(args, "mode", None) or doc.get("evaluation", {}).get("mode", "mask"),
        speed_range_cm_s=doc.get("plots", {}).get("speed_range_cm_s", 30.0),
        tracker=tracker,
        kinematics=kinematics,
        analytics=analytics,
    )


class PipelineRun:
    """Stage bookkeeping plus the always-written manifest."""

    def __init__(self, command: str, cfg: RunConfig):
        self.command = command
        self.cfg = cfg
        self.out_dir = Path(cfg.out_dir)
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self.timings: dict[str, float] = {}
        self.outputs: list[str] = []
        self.failed_stage: str | None = None

    def run_stage(self, name: str, fn):
        t0 = time.perf_counter()
        try:
            return fn()
        except Exception:
            self.failed_stage = name
            raise
        finally:
            self.timings[name] = time.perf_counter() - t0

    def add_output(self, path: Path):
        self.outputs.append(str(path.relative_to(self.out_dir)))

    def write_manifest(self, status: str):
        write_json(
            self.out_dir / "manifest.json",
            {
                "command": self.command,
                "version": __version__,
                "status": status,
                "failed_stage": self.failed_stage,
                "config": self.cfg.to_doc(),
                "outputs": sorted(self.outputs),
                "timings_s": self.timings,
            },
        )


def _load_input(cfg: RunConfig) -> Dataset:
    if not cfg.input:
        raise UsageError("an --input ingestion file is required")
    return load_dataset(cfg.input)


def _stage_track(run: PipelineRun, dataset: Dataset, write: bool = True) -> TrackSet:
    track_set = run.run_stage("track", lambda: run_tracker(dataset, run.cfg.tracker))
    if write:
        path = run.out_dir / "tracks.json"
        write_json(path, track_set.to_doc())
        run.add_output(path)
    return track_set


def _stage_features(run: PipelineRun, dataset: Dataset, track_set: TrackSet):
    cfg = run.cfg

    def compute():
        feats = dataset_features(dataset)
        events = all_departure_events(track_set, cfg.analytics.debounce_k)
        edges, counts = diameter_histogram(
            dataset.frames, dataset.calibration, cfg.analytics.histogram_bin_mm
        )
        return feats, events, edges, counts

    feats, events, edges, counts = run.run_stage("features", compute)

    def write():
        write_features_csv(run.out_dir / "features.csv", feats)
        write_track_features_csv(
            run.out_dir / "tracks_features.csv", track_set.tracks, dataset
        )
        write_departures_csv(run.out_dir / "departures.csv", events, dataset.calibration)
        write_histogram_csv(run.out_dir / "histogram.csv", edges, counts)
        write_json(
            run.out_dir / "departure_summary.json",
            departure_summary(events, dataset.duration_s),
        )
        for name in (
            "features.csv",
            "tracks_features.csv",
            "departures.csv",
            "histogram.csv",
            "departure_summary.json",
        ):
            run.add_output(run.out_dir / name)

    run.run_stage("write_features", write)

    if cfg.figures:
        def render():
            from . import plots

            plots.plot_frame_features(
                feats, dataset.calibration, run.out_dir / "features.png"
            )
            plots.plot_diameter_histogram(edges, counts, run.out_dir / "histogram.png")
            run.add_output(run.out_dir / "features.png")
            run.add_output(run.out_dir / "histogram.png")

        run.run_stage("figures_features", render)


def _velocity_payload(track: Track, dataset: Dataset, kcfg: KinematicsConfig):
    vmap = spectrogram(track, dataset.calibration, kcfg)
    smoothed = smooth(vmap, kcfg.sigma_position, kcfg.sigma_time)
    series = max_velocity_series(track, dataset.calibration, kcfg)
    vapor = [
        (f, bubble_vapor_fraction(track, f, dataset.frame_pixels))
        for f in track.observed_frames
    ]
    return track.id, vmap, smoothed, series, vapor


def _write_velocity_outputs(run: PipelineRun, dataset: Dataset, track: Track, payload, out_dir: Path):
    cfg = run.cfg
    track_id, vmap, smoothed, series, vapor = payload
    out_dir.mkdir(parents=True, exist_ok=True)
    write_spectrogram_csv(out_dir / "spectrogram.csv", vmap)
    write_spectrogram_csv(out_dir / "spectrogram_smoothed.csv", smoothed)
    write_max_velocity_csv(out_dir / "max_velocity.csv", series, dataset.calibration)
    write_contours_csv(out_dir / "contours.csv", [track])
    write_json(
        out_dir / "velocity_config.json",
        {
            "track_id": track_id,
            "kinematics": asdict(cfg.kinematics),
            "speed_range_cm_s": cfg.speed_range_cm_s,
            "frame_rate_fps": dataset.calibration.frame_rate,
            "pixels_per_cm": dataset.calibration.pixels_per_cm,
        },
    )
    for name in (
        "spectrogram.csv",
        "spectrogram_smoothed.csv",
        "max_velocity.csv",
        "contours.csv",
        "velocity_config.json",
    ):
        run.add_output(out_dir / name)
    if cfg.figures:
        from . import plots

        plots.plot_spectrogram(
            vmap, smoothed, dataset.calibration, out_dir / "spectrogram.png",
            cfg.speed_range_cm_s,
        )
        plots.plot_max_velocity(
            series, vapor, dataset.calibration, out_dir / "max_velocity.png"
        )
        run.add_output(out_dir / "spectrogram.png")
        run.add_output(out_dir / "max_velocity.png")


def _stage_velocity_single(run: PipelineRun, dataset: Dataset, track_set: TrackSet):
    cfg = run.cfg
    if cfg.track_id is None:
        eligible = [
            t.id
            for t in track_set.tracks
            if evaluated_frames(t, cfg.kinematics.delta_frames, cfg.kinematics.stride)
        ]
        raise UsageError(
            f"--track-id is required; tracks with enough lifetime: {eligible}"
        )
    track = track_set.by_id(cfg.track_id)
    if not evaluated_frames(track, cfg.kinematics.delta_frames, cfg.kinematics.stride):
        raise UsageError(
            f"track {track.id} has no frame pairs {cfg.kinematics.delta_frames} apart; "
            f"observed frames: {track.observed_frames}"
        )
    payload = run.run_stage(
        "velocity", lambda: _velocity_payload(track, dataset, cfg.kinematics)
    )
    run.run_stage(
        "write_velocity",
        lambda: _write_velocity_outputs(run, dataset, track, payload, run.out_dir),
    )


def _stage_velocity_all(run: PipelineRun, dataset: Dataset, track_set: TrackSet):
    cfg = run.cfg
    eligible = [
        t
        for t in sorted(track_set.tracks, key=lambda t: t.id)
        if evaluated_frames(t, cfg.kinematics.delta_frames, cfg.kinematics.stride)
    ]

    def compute():
        worker = partial(_velocity_payload, dataset=dataset, kcfg=cfg.kinematics)
        if cfg.workers > 1 and len(eligible) > 1:
            with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
                return list(pool.map(worker, eligible))
        return [worker(t) for t in eligible]

    payloads = run.run_stage("velocity", compute)

    def write():
        for track, payload in zip(eligible, payloads):
            _write_velocity_outputs(
                run, dataset, track, payload,
                run.out_dir / "velocity" / f"track_{track.id:04d}",
            )

    run.run_stage("write_velocity", write)


def _stage_evaluate(run: PipelineRun, pred: Dataset):
    cfg = run.cfg
    if not cfg.ground_truth:
        raise UsageError("evaluate requires --ground-truth")
    gt = run.run_stage("ingest_gt", lambda: load_dataset(cfg.ground_truth))
    report = run.run_stage("evaluate", lambda: evaluate(pred, gt, cfg.eval_mode))
    doc = report.to_doc()
    path = run.out_dir / "eval_report.json"
    write_json(path, doc)
    run.add_output(path)
    if cfg.figures:
        from . import plots

        plots.plot_eval_report(doc, run.out_dir / "eval_report.png")
        run.add_output(run.out_dir / "eval_report.png")
    return report


def _pipeline(command: str, args, body) -> int:
    cfg = build_run_config(args)
    run = PipelineRun(command, cfg)
    try:
        body(run, cfg)
    except BaseException:
        run.write_manifest("failed")
        raise
    run.write_manifest("ok")
    return EXIT_OK


def cmd_track(args) -> int:
    def body(run, cfg):
        dataset = run.run_stage("ingest", lambda: _load_input(cfg))
        _stage_track(run, dataset)

    return _pipeline("track", args, body)


def cmd_features(args) -> int:
    def body(run, cfg):
        dataset = run.run_stage("ingest", lambda: _load_input(cfg))
        track_set = _stage_track(run, dataset, write=False)
        _stage_features(run, dataset, track_set)

    return _pipeline("features", args, body)


def cmd_velocity(args) -> int:
    def body(run, cfg):
        dataset = run.run_stage("ingest", lambda: _load_input(cfg))
        track_set = _stage_track(run, dataset, write=False)
        if getattr(args, "all_tracks", False):
            _stage_velocity_all(run, dataset, track_set)
        else:
            _stage_velocity_single(run, dataset, track_set)

    return _pipeline("velocity", args, body)


def cmd_evaluate(args) -> int:
    def body(run, cfg):
        dataset = run.run_stage("ingest", lambda: _load_input(cfg))
        _stage_evaluate(run, dataset)

    return _pipeline("evaluate", args, body)


def cmd_all(args) -> int:
    def body(run, cfg):
        dataset = run.run_stage("ingest", lambda: _load_input(cfg))
        track_set = _stage_track(run, dataset)
        _stage_features(run, dataset, track_set)
        _stage_velocity_all(run, dataset, track_set)
        if cfg.ground_truth:
            _stage_evaluate(run, dataset)

    return _pipeline("all", args, body)


def cmd_convert(args) -> int:
    src = Path(args.coco)
    if not src.exists():
        raise IngestError(f"COCO file not found: {src}")
    coco = json.loads(src.read_text())
    doc = coco_to_ingestion(coco, args.fps, args.px_per_cm)
    Path(args.out).write_text(json.dumps(doc) + "\n")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bubbletrack",
        description="Track segmented bubbles and extract interface dynamics.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, needs_out=True):
        p.add_argument("--input", help="ingestion JSON with per-frame detections")
        p.add_argument("--ground-truth", help="ground-truth ingestion JSON")
        p.add_argument("--config", help="JSON config file (sections: tracker, kinematics, analytics, evaluation)")
        if needs_out:
            p.add_argument("--out-dir", required=True, help="output directory")
        p.add_argument("--workers", type=int, default=1, help="parallel workers for per-track stages")
        p.add_argument("--no-figures", action="store_true", help="skip PNG rendering")
        p.add_argument("--iou-threshold", type=float, help="tracker association IoU threshold")
        p.add_argument("--score-threshold", type=float, help="ignore detections below this score")
        p.add_argument("--max-age", type=int, help="frames a track survives unobserved")
        p.add_argument("--min-hits", type=int, help="hits before a track is confirmed")
        p.add_argument("--ocm-weight", type=float, help="direction-consistency weight in association")
        p.add_argument("--no-reupdate", action="store_true", help="disable occlusion re-update")
        p.add_argument("--delta-frames", type=int, help="frame gap for interface velocity")
        p.add_argument("--bins", type=int, help="perimeter position bins")
        p.add_argument("--stride", type=int, help="frame stride for velocity evaluation")
        p.add_argument("--sigma-pos", type=float, help="spectrogram smoothing sigma (bins)")
        p.add_argument("--sigma-time", type=float, help="spectrogram smoothing sigma (frames)")
        p.add_argument("--debounce", type=int, help="frames to confirm attached/detached state")
        p.add_argument("--bin-width-mm", type=float, help="diameter histogram bin width")
        p.add_argument("--mode", choices=["mask", "box"], help="IoU mode for evaluation")

    p = sub.add_parser("track", help="assign persistent bubble IDs, write tracks.json")
    common(p)
    p.set_defaults(func=cmd_track)

    p = sub.add_parser("features", help="frame/track statistics, departures, histogram")
    common(p)
    p.set_defaults(func=cmd_features)

    p = sub.add_parser("velocity", help="interface velocity spectrogram for a track")
    common(p)
    p.add_argument("--track-id", type=int, help="track to analyze")
    p.add_argument("--all-tracks", action="store_true", help="every track with enough lifetime")
    p.set_defaults(func=cmd_velocity)

    p = sub.add_parser("evaluate", help="AP metrics against ground truth")
    common(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("all", help="track + features + velocity + evaluate")
    common(p)
    p.set_defaults(func=cmd_all)

    p = sub.add_parser("convert", help="convert a COCO annotation file to the ingestion schema")
    p.add_argument("--coco", required=True, help="COCO JSON file")
    p.add_argument("--fps", type=float, required=True, help="frame rate to embed")
    p.add_argument("--px-per-cm", type=float, required=True, help="pixel scale to embed")
    p.add_argument("--out", required=True, help="output ingestion JSON")
    p.set_defaults(func=cmd_convert)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except IngestError as e:
        print(f"input error: {e}", file=sys.stderr)
        return EXIT_INPUT
    except (UsageError, ValueError) as e:
        print(f"usage error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except Exception:
        traceback.print_exc()
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
