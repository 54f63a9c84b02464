"""Bubble tracking and interface-dynamics analytics for boiling videos."""

__version__ = "0.1.0"

from .corpus import (
    Calibration,
    Category,
    Dataset,
    Detection,
    Frame,
    calibrate,
    load_dataset,
    parse_dataset,
    save_dataset,
)
from .errors import BubbleTrackError, IngestError, MaskDecodeError, UsageError
from .geometry import Contour, ParamContour, equivalent_diameter, extract_contour, parameterize
from .kinematics import (
    KinematicsConfig,
    VelocityMap,
    VelocitySample,
    match_interfaces,
    max_velocity_series,
    signed_speed,
    smooth,
    spectrogram,
    velocity_profile,
)
from .masks import BitMask, decode_mask, encode_mask
from .tracker import BubbleTracker, Track, TrackerConfig, TrackSet, run_tracker
from .analytics import (
    AnalyticsConfig,
    DepartureEvent,
    FrameFeatures,
    departure_events,
    departure_rate,
    diameter_histogram,
    frame_features,
)
from .evaluation import EvalReport, average_precision, evaluate, iou, match_detections

__all__ = [
    "__version__",
    "BitMask",
    "BubbleTracker",
    "BubbleTrackError",
    "Calibration",
    "Category",
    "Contour",
    "Dataset",
    "Detection",
    "EvalReport",
    "Frame",
    "IngestError",
    "KinematicsConfig",
    "MaskDecodeError",
    "ParamContour",
    "Track",
    "TrackerConfig",
    "TrackSet",
    "UsageError",
    "VelocityMap",
    "VelocitySample",
    "AnalyticsConfig",
    "DepartureEvent",
    "FrameFeatures",
    "average_precision",
    "calibrate",
    "decode_mask",
    "departure_events",
    "departure_rate",
    "diameter_histogram",
    "encode_mask",
    "equivalent_diameter",
    "evaluate",
    "extract_contour",
    "frame_features",
    "iou",
    "load_dataset",
    "match_detections",
    "match_interfaces",
    "max_velocity_series",
    "parameterize",
    "parse_dataset",
    "run_tracker",
    "save_dataset",
    "signed_speed",
    "smooth",
    "spectrogram",
    "velocity_profile",
]
