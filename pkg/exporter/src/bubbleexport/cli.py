"""bubbleexport: convert model predictions over frames to ingestion JSON.

Exit codes: 0 ok, 1 ok-with-warning (no frames), 2 input error,
3 usage/mapping error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .adapters import load_adapter
from .export import (
    ExportError,
    ExportManifest,
    export_frames,
    iter_directory_frames,
    iter_video_frames,
    parse_class_map,
    write_document,
)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bubbleexport",
        description="Run a segmentation model over an image directory or video "
        "and write bubbletrack ingestion JSON.",
    )
    parser.add_argument("--weights", help="model weights / parameter file")
    parser.add_argument("--input", required=True, help="image directory or video file")
    parser.add_argument(
        "--map",
        required=True,
        dest="class_map",
        help="category=class_id pairs, e.g. attached=1,detached=2",
    )
    parser.add_argument("--fps", type=float, required=True, help="frame rate to embed")
    parser.add_argument("--px-per-cm", type=float, required=True, help="pixel scale to embed")
    parser.add_argument("--min-score", type=float, default=0.5, help="drop weaker detections")
    parser.add_argument("--out", required=True, help="output ingestion JSON path")
    parser.add_argument(
        "--adapter",
        default="threshold",
        help="'threshold' (built-in) or module:callable returning a model",
    )
    return parser


def run(args) -> int:
    src = Path(args.input)
    if not src.exists():
        print(f"input error: {src} does not exist", file=sys.stderr)
        return 2

    manifest = ExportManifest(
        adapter=args.adapter,
        weights=args.weights,
        class_map=parse_class_map(args.class_map),
        min_score=args.min_score,
        frame_rate_fps=args.fps,
        pixels_per_cm=args.px_per_cm,
    )
    model = load_adapter(args.adapter, args.weights)
    frames = iter_directory_frames(src) if src.is_dir() else iter_video_frames(src)
    doc = export_frames(frames, model, manifest)
    write_document(doc, Path(args.out))

    if not doc["frames"]:
        print(f"warning: no frames found under {src}", file=sys.stderr)
        return 1
    n_det = sum(len(f["detections"]) for f in doc["frames"])
    print(f"wrote {args.out}: {len(doc['frames'])} frames, {n_det} detections")
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return run(args)
    except ExportError as e:
        print(f"export error: {e}", file=sys.stderr)
        return 3
    except FileNotFoundError as e:
        print(f"input error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
