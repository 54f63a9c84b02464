"""Frame iteration and ingestion-JSON writing.

The output document follows the bubbletrack ingestion schema exactly:
masks as column-major RLE starting with the zero count, bboxes
recomputed as tight mask bounds, categories restricted to
attached/detached/bubble. An ``export_manifest`` block records how the
file was produced.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

VALID_CATEGORIES = ("attached", "detached", "bubble")
IMAGE_EXTENSIONS = (".png", ".jpg", ".jpeg", ".bmp", ".tif", ".tiff")


class ExportError(Exception):
    pass


@dataclass(frozen=True)
class ExportManifest:
    adapter: str
    weights: str | None
    class_map: dict[int, str]        # model class id -> category name
    min_score: float
    frame_rate_fps: float
    pixels_per_cm: float

    def __post_init__(self):
        for cid, name in self.class_map.items():
            if name not in VALID_CATEGORIES:
                raise ExportError(
                    f"class map targets unknown category {name!r} for id {cid}; "
                    f"allowed: {list(VALID_CATEGORIES)}"
                )
        if self.frame_rate_fps <= 0 or self.pixels_per_cm <= 0:
            raise ExportError("frame rate and pixel scale must be positive")

    def to_doc(self) -> dict:
        return {
            "adapter": self.adapter,
            "weights": self.weights,
            "class_map": {str(k): v for k, v in self.class_map.items()},
            "min_score": self.min_score,
        }


def parse_class_map(text: str) -> dict[int, str]:
    """Parse 'attached=1,detached=2' into {1: 'attached', 2: 'detached'}."""
    mapping: dict[int, str] = {}
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if "=" not in part:
            raise ExportError(f"bad --map entry {part!r}; expected name=id")
        name, cid = part.split("=", 1)
        try:
            mapping[int(cid)] = name.strip().lower()
        except ValueError:
            raise ExportError(f"bad class id {cid!r} in --map entry {part!r}") from None
    if not mapping:
        raise ExportError("class map is empty")
    return mapping


def encode_rle(mask: np.ndarray) -> list[int]:
    """Column-major run lengths, zeros first (the ingestion RLE)."""
    flat = np.asarray(mask, dtype=bool).flatten(order="F")
    if flat.size == 0:
        return [0]
    change = np.flatnonzero(flat[1:] != flat[:-1]) + 1
    edges = np.concatenate(([0], change, [flat.size]))
    counts = np.diff(edges).tolist()
    if flat[0]:
        counts.insert(0, 0)
    return [int(c) for c in counts]


def tight_bbox(mask: np.ndarray) -> list[int]:
    rows = np.flatnonzero(mask.any(axis=1))
    cols = np.flatnonzero(mask.any(axis=0))
    return [int(cols[0]), int(rows[0]), int(cols[-1] - cols[0] + 1), int(rows[-1] - rows[0] + 1)]


def iter_directory_frames(path: Path):
    """Yield (name, image array) for images sorted by filename."""
    from PIL import Image

    files = sorted(
        p for p in path.iterdir() if p.suffix.lower() in IMAGE_EXTENSIONS
    )
    for p in files:
        try:
            with Image.open(p) as img:
                yield p.name, np.asarray(img.convert("L"))
        except Exception as e:
            raise ExportError(f"unreadable frame {p}: {e}") from None


def iter_video_frames(path: Path):
    try:
        import cv2
    except ImportError:
        raise ExportError(
            "video input needs opencv-python; install bubbleexport[video]"
        ) from None
    cap = cv2.VideoCapture(str(path))
    if not cap.isOpened():
        raise ExportError(f"cannot open video {path}")
    index = 0
    while True:
        ok, frame = cap.read()
        if not ok:
            break
        yield f"frame_{index:06d}", cv2.cvtColor(frame, cv2.COLOR_BGR2GRAY)
        index += 1
    cap.release()


def export_frames(frames, model, manifest: ExportManifest) -> dict:
    """Run the model over frames and build the ingestion document.

    ``frames`` yields (name, image) pairs in order. Raises on a class id
    the manifest does not map.
    """
    width = height = None
    out_frames = []
    for index, (name, image) in enumerate(frames):
        if image.ndim not in (2, 3):
            raise ExportError(f"frame {name}: expected 2-D or 3-D image array")
        h, w = image.shape[:2]
        if width is None:
            width, height = w, h
        elif (w, h) != (width, height):
            raise ExportError(
                f"frame {name}: size {w}x{h} differs from first frame {width}x{height}"
            )
        detections = []
        for pred in model.predict(image):
            if pred.class_id not in manifest.class_map:
                raise ExportError(
                    f"frame {name}: model predicted class id {pred.class_id} "
                    f"which is not in the class map {manifest.class_map}"
                )
            if pred.score < manifest.min_score:
                continue
            mask = np.asarray(pred.mask, dtype=bool)
            if mask.shape != (height, width):
                raise ExportError(
                    f"frame {name}: mask shape {mask.shape} does not match frame"
                )
            if not mask.any():
                continue
            detections.append(
                {
                    "bbox": tight_bbox(mask),
                    "category": manifest.class_map[pred.class_id],
                    "score": float(pred.score),
                    "mask": {"format": "rle", "counts": encode_rle(mask)},
                }
            )
        out_frames.append({"index": index, "detections": detections})

    return {
        "info": {
            "frame_rate_fps": manifest.frame_rate_fps,
            "pixels_per_cm": manifest.pixels_per_cm,
            "width": width if width is not None else 0,
            "height": height if height is not None else 0,
        },
        "frames": out_frames,
        "export_manifest": manifest.to_doc(),
    }


def write_document(doc: dict, out_path: Path) -> None:
    out_path.write_text(json.dumps(doc) + "\n")
