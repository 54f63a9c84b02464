"""Figure rendering for the report path.

Each function writes one PNG next to the delimited outputs. Figures are
presentation aids; the CSV/JSON files remain the canonical outputs.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .analytics import FrameFeatures
from .corpus import Calibration
from .kinematics import VelocityMap

DPI = 120


def plot_frame_features(
    features: list[FrameFeatures], calibration: Calibration, path: str | Path
) -> None:
    t = np.array([f.frame_index for f in features]) / calibration.frame_rate
    counts = [f.bubble_count for f in features]
    total = [f.vapor_fraction_total for f in features]
    attached = [
        np.nan if f.vapor_fraction_attached is None else f.vapor_fraction_attached
        for f in features
    ]
    fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(8, 6), sharex=True)
    ax1.plot(t, counts, lw=1.2, color="tab:blue")
    ax1.set_ylabel("bubble count")
    ax2.plot(t, total, lw=1.2, label="total", color="tab:red")
    if not all(np.isnan(attached)):
        ax2.plot(t, attached, lw=1.2, label="attached", color="tab:green")
    ax2.set_ylabel("vapor fraction")
    ax2.set_xlabel("time (s)")
    ax2.legend(loc="upper right")
    ax2.set_ylim(bottom=0)
    fig.tight_layout()
    fig.savefig(path, dpi=DPI)
    plt.close(fig)


def plot_diameter_histogram(edges: np.ndarray, counts: np.ndarray, path: str | Path) -> None:
    fig, ax = plt.subplots(figsize=(6, 4))
    if len(counts):
        ax.bar(edges[:-1], counts, width=np.diff(edges), align="edge",
               color="tab:blue", edgecolor="white")
    ax.set_xlabel("equivalent diameter (mm)")
    ax.set_ylabel("count")
    fig.tight_layout()
    fig.savefig(path, dpi=DPI)
    plt.close(fig)


def plot_spectrogram(
    raw: VelocityMap,
    smoothed: VelocityMap,
    calibration: Calibration,
    path: str | Path,
    speed_range_cm_s: float = 30.0,
) -> None:
    """Raw and smoothed signed-speed maps, clipped to a symmetric range."""
    fig, axes = plt.subplots(2, 1, figsize=(9, 7), sharex=True)
    for ax, vmap, title in ((axes[0], raw, "raw"), (axes[1], smoothed, "smoothed")):
        if vmap.frames:
            t = np.array(vmap.frames) / calibration.frame_rate
            extent = [t[0], t[-1] if len(t) > 1 else t[0] + 1.0 / calibration.frame_rate, 0.0, 1.0]
            im = ax.imshow(
                vmap.values,
                origin="lower",
                aspect="auto",
                extent=extent,
                cmap="seismic",
                vmin=-speed_range_cm_s,
                vmax=speed_range_cm_s,
                interpolation="nearest",
            )
            fig.colorbar(im, ax=ax, label="interface speed (cm/s)")
        ax.set_ylabel(f"relative perimeter ({title})")
    axes[1].set_xlabel("time (s)")
    fig.tight_layout()
    fig.savefig(path, dpi=DPI)
    plt.close(fig)


def plot_max_velocity(
    series: list[tuple[int, float]],
    vapor_series: list[tuple[int, float]],
    calibration: Calibration,
    path: str | Path,
) -> None:
    fig, ax = plt.subplots(figsize=(8, 4))
    if series:
        t = np.array([f for f, _ in series]) / calibration.frame_rate
        ax.plot(t, [v for _, v in series], lw=1.2, color="tab:red",
                label="max |interface speed| (cm/s)")
    ax.set_xlabel("time (s)")
    ax.set_ylabel("max |interface speed| (cm/s)")
    if vapor_series:
        ax2 = ax.twinx()
        t = np.array([f for f, _ in vapor_series]) / calibration.frame_rate
        ax2.plot(t, [v for _, v in vapor_series], lw=1.2, color="tab:blue",
                 label="bubble vapor fraction")
        ax2.set_ylabel("bubble vapor fraction")
    fig.tight_layout()
    fig.savefig(path, dpi=DPI)
    plt.close(fig)


def plot_eval_report(doc: dict, path: str | Path) -> None:
    labels = ["AP", "AP50", "AP75"]
    values = [doc[k] for k in labels]
    for name, cls in sorted(doc.get("per_class", {}).items()):
        labels.append(f"{name} AP")
        values.append(cls["AP"])
    fig, ax = plt.subplots(figsize=(1.2 + 1.1 * len(labels), 4))
    ax.bar(range(len(values)), values, color="tab:blue")
    ax.set_xticks(range(len(labels)), labels, rotation=20)
    ax.set_ylim(0, 1.05)
    ax.set_ylabel("average precision")
    for i, v in enumerate(values):
        ax.text(i, v + 0.01, f"{v:.3f}", ha="center", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=DPI)
    plt.close(fig)
