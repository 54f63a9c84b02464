"""Per-frame and per-track bubble statistics.

Vapor fractions use the pixel union of masks so overlapping instances
are not double counted. Departure detection debounces the per-frame
attached/detached labels: a state only counts once it has held for
``debounce_k`` consecutive observations, which suppresses single-frame
classification flicker.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .corpus import Calibration, Category, Dataset, Frame
from .geometry import equivalent_diameter
from .masks import mask_union
from .tracker import Track, TrackSet


@dataclass(frozen=True)
class AnalyticsConfig:
    debounce_k: int = 3
    histogram_bin_mm: float = 0.5

    def __post_init__(self):
        if self.debounce_k < 1:
            raise ValueError(f"debounce_k must be >= 1, got {self.debounce_k}")
        if self.histogram_bin_mm <= 0:
            raise ValueError(f"histogram_bin_mm must be > 0, got {self.histogram_bin_mm}")


@dataclass(frozen=True)
class FrameFeatures:
    frame_index: int
    bubble_count: int
    vapor_fraction_total: float
    vapor_fraction_attached: float | None  # None on one-class data
    diameters_cm: list[float]


@dataclass(frozen=True)
class DepartureEvent:
    track_id: int
    frame_index: int
    debounce_k: int


def frame_features(
    frame: Frame,
    calibration: Calibration,
    frame_width: int,
    frame_height: int,
    two_class: bool = True,
) -> FrameFeatures:
    """Count, union vapor fractions, and per-detection diameters of a frame."""
    total_px = frame_width * frame_height
    masks = [d.mask for d in frame.detections]
    union_all = int(np.count_nonzero(mask_union(masks, frame_width, frame_height)))
    attached = [d.mask for d in frame.detections if d.category == Category.ATTACHED]
    if two_class:
        union_att = int(np.count_nonzero(mask_union(attached, frame_width, frame_height)))
        vf_attached = union_att / total_px
    else:
        vf_attached = None
    return FrameFeatures(
        frame_index=frame.index,
        bubble_count=len(frame.detections),
        vapor_fraction_total=union_all / total_px,
        vapor_fraction_attached=vf_attached,
        diameters_cm=[
            equivalent_diameter(d.mask.area, calibration) for d in frame.detections
        ],
    )


def dataset_features(dataset: Dataset) -> list[FrameFeatures]:
    two_class = dataset.has_two_classes()
    return [
        frame_features(
            f, dataset.calibration, dataset.frame_width, dataset.frame_height, two_class
        )
        for f in dataset.frames
    ]


def bubble_vapor_fraction(track: Track, frame_index: int, frame_pixels: int) -> float | None:
    """Area of the track's mask at a frame over the whole image, or None."""
    det = track.observations.get(frame_index)
    if det is None:
        return None
    return det.mask.area / frame_pixels


def departure_events(track: Track, debounce_k: int = 3) -> list[DepartureEvent]:
    """Attached-to-detached transitions of a track's debounced class signal.

    The debounced state flips to attached/detached after ``debounce_k``
    consecutive observations of that class; an event is recorded at the
    first frame of the run that confirms detached, whenever the previous
    stable state was attached. With ``debounce_k=1`` this is exactly the
    raw count of adjacent attached->detached transitions.
    """
    if debounce_k < 1:
        raise ValueError(f"debounce_k must be >= 1, got {debounce_k}")
    events = []
    stable: Category | None = None
    run_class: Category | None = None
    run_frames: list[int] = []
    for f in sorted(track.class_history):
        cat = track.class_history[f]
        if cat not in (Category.ATTACHED, Category.DETACHED):
            run_class, run_frames = None, []
            continue
        if cat == run_class:
            run_frames.append(f)
        else:
            run_class, run_frames = cat, [f]
        if len(run_frames) >= debounce_k and run_class != stable:
            if stable == Category.ATTACHED and run_class == Category.DETACHED:
                events.append(
                    DepartureEvent(
                        track_id=track.id,
                        frame_index=run_frames[0],
                        debounce_k=debounce_k,
                    )
                )
            stable = run_class
    return events


def all_departure_events(track_set: TrackSet, debounce_k: int = 3) -> list[DepartureEvent]:
    events = []
    for track in sorted(track_set.tracks, key=lambda t: t.id):
        events.extend(departure_events(track, debounce_k))
    return events


def departure_rate(
    events_or_tracks: list[DepartureEvent] | TrackSet,
    clip_duration_s: float,
    debounce_k: int = 3,
) -> float:
    """Departure events per second over the clip.

    Accepts either a precomputed event list or a whole track set, in
    which case events are detected with ``debounce_k``.
    """
    if clip_duration_s <= 0:
        raise ValueError(f"clip duration must be positive, got {clip_duration_s}")
    if isinstance(events_or_tracks, TrackSet):
        events = all_departure_events(events_or_tracks, debounce_k)
    else:
        events = events_or_tracks
    return len(events) / clip_duration_s


def departure_summary(events: list[DepartureEvent], clip_duration_s: float) -> dict:
    """Rate plus the unique-track count, since one bubble may depart twice."""
    return {
        "events": len(events),
        "unique_tracks": len({e.track_id for e in events}),
        "clip_duration_s": clip_duration_s,
        "rate_hz": departure_rate(events, clip_duration_s),
    }


def diameter_histogram(
    frames: list[Frame],
    calibration: Calibration,
    bin_width_mm: float = 0.5,
) -> tuple[np.ndarray, np.ndarray]:
    """Histogram of equivalent diameters (mm) over all detections.

    Returns (bin_edges_mm, counts); bin i covers [i*w, (i+1)*w). An
    empty detection set yields empty arrays.
    """
    if bin_width_mm <= 0:
        raise ValueError(f"bin_width_mm must be > 0, got {bin_width_mm}")
    diameters_mm = [
        equivalent_diameter(d.mask.area, calibration) * 10.0
        for f in frames
        for d in f.detections
    ]
    if not diameters_mm:
        return np.array([]), np.array([], dtype=int)
    n_bins = int(np.floor(max(diameters_mm) / bin_width_mm)) + 1
    edges = np.arange(n_bins + 1) * bin_width_mm
    counts = np.zeros(n_bins, dtype=int)
    for d in diameters_mm:
        counts[min(int(d / bin_width_mm), n_bins - 1)] += 1
    return edges, counts
