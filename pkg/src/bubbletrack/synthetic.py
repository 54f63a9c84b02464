"""Synthetic disk-based datasets for tests, demos, and benchmarks."""

from __future__ import annotations

import numpy as np

from .corpus import Calibration, Category, Dataset, Detection, Frame
from .masks import BitMask


def rasterize_disk(cx: float, cy: float, r: float, width: int, height: int) -> BitMask:
    """Pixel (i, j) is set iff its center lies within r of (cx, cy)."""
    ys = np.arange(height) + 0.5
    xs = np.arange(width) + 0.5
    d2 = (xs[None, :] - cx) ** 2 + (ys[:, None] - cy) ** 2
    return BitMask(d2 <= r * r)


def detection_from_mask(
    mask: BitMask, category: Category = Category.BUBBLE, score: float = 1.0
) -> Detection:
    return Detection(bbox=mask.tight_bbox(), category=category, score=score, mask=mask)


def disk_detection(
    cx: float,
    cy: float,
    r: float,
    width: int,
    height: int,
    category: Category = Category.BUBBLE,
    score: float = 1.0,
) -> Detection:
    return detection_from_mask(rasterize_disk(cx, cy, r, width, height), category, score)


def dilating_disk_dataset(
    r_start: float = 50.0,
    r_end: float = 55.0,
    n_frames: int = 6,
    width: int = 160,
    height: int = 160,
    pixels_per_cm: float = 100.0,
    frame_rate: float = 3000.0,
) -> Dataset:
    """One centered disk growing linearly from r_start to r_end."""
    cx = cy = width / 2.0
    radii = np.linspace(r_start, r_end, n_frames)
    frames = [
        Frame(index=i, detections=[disk_detection(cx, cy, r, width, height)])
        for i, r in enumerate(radii)
    ]
    return Dataset(
        calibration=Calibration(pixels_per_cm=pixels_per_cm, frame_rate=frame_rate),
        frame_width=width,
        frame_height=height,
        frames=frames,
    )


def moving_disks_dataset(
    paths: list[list[tuple[float, float, float] | None]],
    width: int = 256,
    height: int = 256,
    pixels_per_cm: float = 100.0,
    frame_rate: float = 3000.0,
    categories: list[Category] | None = None,
) -> Dataset:
    """Disks following per-frame (cx, cy, r) paths; None hides a disk.

    ``paths[k][t]`` places disk k at frame t, so occlusions and class
    changes are scripted by the caller.
    """
    n_frames = len(paths[0])
    frames = []
    for t in range(n_frames):
        dets = []
        for k, path in enumerate(paths):
            spot = path[t]
            if spot is None:
                continue
            cat = categories[k] if categories else Category.BUBBLE
            dets.append(disk_detection(spot[0], spot[1], spot[2], width, height, cat))
        frames.append(Frame(index=t, detections=dets))
    return Dataset(
        calibration=Calibration(pixels_per_cm=pixels_per_cm, frame_rate=frame_rate),
        frame_width=width,
        frame_height=height,
        frames=frames,
    )


def growth_departure_dataset(
    n_frames: int = 40,
    departure_frame: int = 25,
    width: int = 200,
    height: int = 200,
    pixels_per_cm: float = 100.0,
    frame_rate: float = 150.0,
) -> Dataset:
    """A bubble that grows while attached, then detaches and rises."""
    frames = []
    for t in range(n_frames):
        if t < departure_frame:
            cy = height - 30.0
            r = 12.0 + 0.5 * t
            cat = Category.ATTACHED
        else:
            k = t - departure_frame
            cy = height - 30.0 - 4.0 * k
            r = 12.0 + 0.5 * departure_frame
            cat = Category.DETACHED
        frames.append(
            Frame(
                index=t,
                detections=[disk_detection(width / 2.0, cy, r, width, height, cat)],
            )
        )
    return Dataset(
        calibration=Calibration(pixels_per_cm=pixels_per_cm, frame_rate=frame_rate),
        frame_width=width,
        frame_height=height,
        frames=frames,
    )


def random_mask(rng: np.random.Generator, width: int = 64, height: int = 64) -> BitMask:
    return BitMask(rng.random((height, width)) < rng.uniform(0.2, 0.8))
