"""Deterministic CSV/JSON writers for all pipeline outputs.

Every float is serialized with six decimal places and absent values are
written as empty cells, so repeated runs produce byte-identical files.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from .analytics import DepartureEvent, FrameFeatures
from .corpus import Calibration, Dataset
from .geometry import extract_contour, parameterize
from .kinematics import VelocityMap
from .tracker import Track

PRECISION = 6


def fmt(value) -> str:
    """One cell: fixed-precision floats, empty for absent values."""
    if value is None:
        return ""
    if isinstance(value, str):
        return value
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    v = float(value)
    if math.isnan(v):
        return ""
    return f"{v:.{PRECISION}f}"


def write_csv(path: str | Path, header: list[str], rows) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(fmt(v) for v in row))
    Path(path).write_text("\n".join(lines) + "\n")


def json_ready(obj):
    """Recursively round floats so JSON output is precision-stable."""
    if isinstance(obj, dict):
        return {k: json_ready(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [json_ready(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return None if math.isnan(v) else round(v, PRECISION)
    return obj


def write_json(path: str | Path, doc: dict) -> None:
    Path(path).write_text(json.dumps(json_ready(doc), indent=2, sort_keys=False) + "\n")


def features_rows(features: list[FrameFeatures]):
    for f in features:
        yield (
            f.frame_index,
            f.bubble_count,
            f.vapor_fraction_total,
            f.vapor_fraction_attached,
        )


def write_features_csv(path, features: list[FrameFeatures]) -> None:
    write_csv(
        path,
        ["frame", "bubble_count", "vapor_fraction_total", "vapor_fraction_attached"],
        features_rows(features),
    )


def write_track_features_csv(path, tracks: list[Track], dataset: Dataset) -> None:
    from .analytics import bubble_vapor_fraction
    from .geometry import equivalent_diameter

    rows = []
    for t in sorted(tracks, key=lambda t: t.id):
        for f in t.observed_frames:
            det = t.observations[f]
            rows.append(
                (
                    t.id,
                    f,
                    equivalent_diameter(det.mask.area, dataset.calibration),
                    det.category.value,
                    bubble_vapor_fraction(t, f, dataset.frame_pixels),
                )
            )
    write_csv(
        path,
        ["track_id", "frame", "diameter_cm", "category", "bubble_vapor_fraction"],
        rows,
    )


def write_departures_csv(path, events: list[DepartureEvent], calibration: Calibration) -> None:
    write_csv(
        path,
        ["track_id", "frame", "time_s"],
        (
            (e.track_id, e.frame_index, e.frame_index / calibration.frame_rate)
            for e in events
        ),
    )


def write_histogram_csv(path, edges: np.ndarray, counts: np.ndarray) -> None:
    write_csv(
        path,
        ["bin_left_mm", "bin_right_mm", "count"],
        ((edges[i], edges[i + 1], int(c)) for i, c in enumerate(counts)),
    )


def write_spectrogram_csv(path, vmap: VelocityMap) -> None:
    """Header row of frame indices; first column of bin centers."""
    header = ["position_bin_center"] + [str(f) for f in vmap.frames]
    rows = (
        [vmap.bin_centers[i]] + list(vmap.values[i, :])
        for i in range(len(vmap.bin_centers))
    )
    write_csv(path, header, rows)


def write_max_velocity_csv(path, series: list[tuple[int, float]], calibration: Calibration) -> None:
    write_csv(
        path,
        ["frame", "time_s", "max_abs_speed_cm_s"],
        ((f, f / calibration.frame_rate, v) for f, v in series),
    )


def write_contours_csv(path, tracks: list[Track]) -> None:
    """Geometry export: one row per contour vertex with its position."""
    rows = []
    for t in sorted(tracks, key=lambda t: t.id):
        for f in t.observed_frames:
            param = parameterize(extract_contour(t.observations[f].mask))
            for k, (pt, pos) in enumerate(zip(param.points, param.positions)):
                rows.append((t.id, f, k, pt[0], pt[1], pos))
    write_csv(
        path,
        ["track_id", "frame", "vertex_index", "x_px", "y_px", "position"],
        rows,
    )
