"""Export instance-segmentation predictions to bubbletrack ingestion JSON."""

__version__ = "0.1.0"

from .adapters import Prediction, ThresholdModel, load_adapter
from .export import (
    ExportError,
    ExportManifest,
    encode_rle,
    export_frames,
    parse_class_map,
)

__all__ = [
    "__version__",
    "ExportError",
    "ExportManifest",
    "Prediction",
    "ThresholdModel",
    "encode_rle",
    "export_frames",
    "load_adapter",
    "parse_class_map",
]
