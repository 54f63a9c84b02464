"""Dataset model and ingestion of per-frame instance segmentations.

The ingestion document is a single self-contained JSON file:

    {"info": {"frame_rate_fps": f, "pixels_per_cm": f, "width": i, "height": i},
     "frames": [{"index": i,
                 "detections": [{"bbox": [x, y, w, h],
                                 "category": "attached"|"detached"|"bubble",
                                 "score": f,
                                 "mask": {"format": "rle", "counts": [...]}
                                       | {"format": "polygon", "points": [[x, y], ...]}}]}]}

Ground-truth files use the same schema with every score fixed to 1.0.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import jsonschema

from .errors import IngestError, MaskDecodeError
from .masks import BitMask, decode_mask, encode_mask


class Category(str, enum.Enum):
    ATTACHED = "attached"
    DETACHED = "detached"
    BUBBLE = "bubble"


@dataclass(frozen=True)
class Calibration:
    """Physical scale of the image sequence."""

    pixels_per_cm: float
    frame_rate: float

    def __post_init__(self):
        if not (self.pixels_per_cm > 0 and math.isfinite(self.pixels_per_cm)):
            raise ValueError(f"pixels_per_cm must be positive, got {self.pixels_per_cm}")
        if not (self.frame_rate > 0 and math.isfinite(self.frame_rate)):
            raise ValueError(f"frame_rate must be positive, got {self.frame_rate}")

    @property
    def cm_per_px(self) -> float:
        return 1.0 / self.pixels_per_cm


def calibrate(reference_px: float, reference_cm: float, frame_rate: float) -> Calibration:
    """Build a calibration from a known physical reference length."""
    if reference_px <= 0 or reference_cm <= 0 or frame_rate <= 0:
        raise ValueError(
            "calibration inputs must be positive, got "
            f"reference_px={reference_px}, reference_cm={reference_cm}, frame_rate={frame_rate}"
        )
    return Calibration(pixels_per_cm=reference_px / reference_cm, frame_rate=frame_rate)


@dataclass(frozen=True)
class Detection:
    """One segmented instance: tight bbox, class, confidence, mask."""

    bbox: tuple[int, int, int, int]
    category: Category
    score: float
    mask: BitMask


@dataclass(frozen=True)
class Frame:
    index: int
    detections: list[Detection] = field(default_factory=list)

    def timestamp_s(self, frame_rate: float) -> float:
        return self.index / frame_rate


@dataclass(frozen=True)
class Dataset:
    """Calibrated, immutable sequence of segmented frames."""

    calibration: Calibration
    frame_width: int
    frame_height: int
    frames: list[Frame]

    @property
    def frame_pixels(self) -> int:
        return self.frame_width * self.frame_height

    @property
    def duration_s(self) -> float:
        """Clip duration from first to last frame index, inclusive of the last frame."""
        if not self.frames:
            return 0.0
        span = self.frames[-1].index - self.frames[0].index + 1
        return span / self.calibration.frame_rate

    def frame_by_index(self, index: int) -> Frame | None:
        i = self._index_map().get(index)
        return self.frames[i] if i is not None else None

    def _index_map(self) -> dict[int, int]:
        cached = getattr(self, "_idx_cache", None)
        if cached is None:
            cached = {f.index: i for i, f in enumerate(self.frames)}
            object.__setattr__(self, "_idx_cache", cached)
        return cached

    def has_two_classes(self) -> bool:
        """True if any detection carries an attached/detached label."""
        return any(
            d.category in (Category.ATTACHED, Category.DETACHED)
            for f in self.frames
            for d in f.detections
        )


INGESTION_SCHEMA = {
    "type": "object",
    "required": ["info", "frames"],
    "properties": {
        "info": {
            "type": "object",
            "required": ["frame_rate_fps", "pixels_per_cm", "width", "height"],
            "properties": {
                "frame_rate_fps": {"type": "number", "exclusiveMinimum": 0},
                "pixels_per_cm": {"type": "number", "exclusiveMinimum": 0},
                "width": {"type": "integer", "minimum": 1},
                "height": {"type": "integer", "minimum": 1},
            },
        },
        "frames": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["index", "detections"],
                "properties": {
                    "index": {"type": "integer", "minimum": 0},
                    "detections": {
                        "type": "array",
                        "items": {
                            "type": "object",
                            "required": ["bbox", "category", "score", "mask"],
                            "properties": {
                                "bbox": {
                                    "type": "array",
                                    "minItems": 4,
                                    "maxItems": 4,
                                    "items": {"type": "number"},
                                },
                                "category": {"enum": ["attached", "detached", "bubble"]},
                                "score": {"type": "number", "minimum": 0, "maximum": 1},
                                "mask": {"type": "object", "required": ["format"]},
                            },
                        },
                    },
                },
            },
        },
    },
}


def _json_path(error: jsonschema.ValidationError) -> str:
    parts = []
    for p in error.absolute_path:
        if isinstance(p, int):
            parts.append(f"[{p}]")
        else:
            parts.append(f".{p}" if parts else str(p))
    return "".join(parts) or "<document root>"


def parse_dataset(doc: dict) -> Dataset:
    """Validate and decode an already-parsed ingestion document."""
    try:
        jsonschema.validate(doc, INGESTION_SCHEMA)
    except jsonschema.ValidationError as e:
        best = jsonschema.exceptions.best_match([e]) or e
        raise IngestError(best.message, path=_json_path(best)) from None

    info = doc["info"]
    calibration = Calibration(
        pixels_per_cm=float(info["pixels_per_cm"]),
        frame_rate=float(info["frame_rate_fps"]),
    )
    width = int(info["width"])
    height = int(info["height"])

    frames = []
    raw_frames = sorted(doc["frames"], key=lambda f: f["index"])
    prev_index = None
    for fi, rf in enumerate(raw_frames):
        index = rf["index"]
        if index == prev_index:
            raise IngestError(f"duplicate frame index {index}", path=f"frames[{fi}].index")
        prev_index = index
        detections = []
        for di, rd in enumerate(rf["detections"]):
            where = f"frames[{fi}].detections[{di}]"
            try:
                mask = decode_mask(rd["mask"], width, height)
            except MaskDecodeError as e:
                raise IngestError(str(e), path=f"{where}.mask") from None
            if mask.area == 0:
                raise IngestError("mask has no set pixels", path=f"{where}.mask")
            bbox = tuple(rd["bbox"])
            tight = mask.tight_bbox()
            if tuple(float(v) for v in bbox) != tuple(float(v) for v in tight):
                raise IngestError(
                    f"bbox {list(bbox)} does not match tight mask bounds {list(tight)}",
                    path=f"{where}.bbox",
                )
            detections.append(
                Detection(
                    bbox=tight,
                    category=Category(rd["category"]),
                    score=float(rd["score"]),
                    mask=mask,
                )
            )
        frames.append(Frame(index=int(index), detections=detections))

    if not frames:
        raise IngestError("dataset contains no frames", path="frames")
    return Dataset(
        calibration=calibration, frame_width=width, frame_height=height, frames=frames
    )


def load_dataset(path: str | Path) -> Dataset:
    """Load and validate an ingestion JSON file."""
    path = Path(path)
    if not path.exists():
        raise IngestError(f"input file not found: {path}")
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as e:
        raise IngestError(f"not valid JSON: {e}", path=str(path)) from None
    return parse_dataset(doc)


def dataset_to_doc(dataset: Dataset) -> dict:
    """Serialize a Dataset back into the ingestion document form."""
    return {
        "info": {
            "frame_rate_fps": dataset.calibration.frame_rate,
            "pixels_per_cm": dataset.calibration.pixels_per_cm,
            "width": dataset.frame_width,
            "height": dataset.frame_height,
        },
        "frames": [
            {
                "index": f.index,
                "detections": [
                    {
                        "bbox": list(d.bbox),
                        "category": d.category.value,
                        "score": d.score,
                        "mask": {"format": "rle", "counts": encode_mask(d.mask)},
                    }
                    for d in f.detections
                ],
            }
            for f in dataset.frames
        ],
    }


def save_dataset(dataset: Dataset, path: str | Path) -> None:
    with open(path, "w") as fh:
        json.dump(dataset_to_doc(dataset), fh)


# -- COCO convenience path ---------------------------------------------------

def _coco_string_counts(counts: str, height: int) -> list[int]:
    """Decode COCO's compressed RLE count string to plain counts."""
    out: list[int] = []
    i = 0
    while i < len(counts):
        x = 0
        k = 0
        more = True
        while more:
            c = ord(counts[i]) - 48
            x |= (c & 0x1F) << (5 * k)
            more = bool(c & 0x20)
            i += 1
            k += 1
            if not more and (c & 0x10):
                x |= -1 << (5 * k)
        if len(out) > 2:
            x += out[-2]
        out.append(x)
    return out


def coco_to_ingestion(
    coco: dict,
    frame_rate: float,
    pixels_per_cm: float,
    default_score: float = 1.0,
) -> dict:
    """Convert a COCO-format annotation document to the ingestion schema.

    Images become frames ordered by image id; bboxes are recomputed from
    the decoded masks so the tight-bounds invariant holds. COCO category
    names must already be `attached`, `detached`, or `bubble`.
    """
    cat_names = {c["id"]: str(c["name"]).lower() for c in coco.get("categories", [])}
    images = sorted(coco.get("images", []), key=lambda im: im["id"])
    if not images:
        raise IngestError("COCO document has no images", path="images")
    width = int(images[0]["width"])
    height = int(images[0]["height"])

    by_image: dict[int, list[dict]] = {im["id"]: [] for im in images}
    for ann in coco.get("annotations", []):
        if ann["image_id"] in by_image:
            by_image[ann["image_id"]].append(ann)

    frames = []
    for idx, im in enumerate(images):
        if int(im["width"]) != width or int(im["height"]) != height:
            raise IngestError(
                f"image {im['id']} size differs from first image", path=f"images[{idx}]"
            )
        detections = []
        for ann in sorted(by_image[im["id"]], key=lambda a: a.get("id", 0)):
            name = cat_names.get(ann["category_id"])
            if name not in ("attached", "detached", "bubble"):
                raise IngestError(
                    f"unmapped COCO category id {ann['category_id']} ({name!r})",
                    path=f"annotations(image {im['id']})",
                )
            seg = ann["segmentation"]
            if isinstance(seg, dict):
                counts = seg["counts"]
                if isinstance(counts, str):
                    counts = _coco_string_counts(counts, height)
                mask = decode_mask({"format": "rle", "counts": counts}, width, height)
            else:
                # COCO polygons: list of flat [x0, y0, x1, y1, ...] rings
                mask_data = None
                for ring in seg:
                    pts = [(ring[i], ring[i + 1]) for i in range(0, len(ring), 2)]
                    part = decode_mask({"format": "polygon", "points": pts}, width, height)
                    mask_data = part.data if mask_data is None else (mask_data | part.data)
                mask = BitMask(mask_data)
            if mask.area == 0:
                continue
            detections.append(
                {
                    "bbox": list(mask.tight_bbox()),
                    "category": name,
                    "score": float(ann.get("score", default_score)),
                    "mask": {"format": "rle", "counts": encode_mask(mask)},
                }
            )
        frames.append({"index": idx, "detections": detections})

    return {
        "info": {
            "frame_rate_fps": frame_rate,
            "pixels_per_cm": pixels_per_cm,
            "width": width,
            "height": height,
        },
        "frames": frames,
    }
