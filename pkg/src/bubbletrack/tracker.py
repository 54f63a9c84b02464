"""Multi-object tracking of bubbles across frames.

The tracker follows the SORT recipe (Kalman prediction + IoU matching
via optimal assignment) extended with two observation-centric
corrections: a direction-consistency term in the association cost, and
a re-update that replays a virtual trajectory over occlusion gaps when
a lost track is recovered.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

from . import kalman
from .corpus import Category, Dataset, Detection, Frame
from .errors import UsageError
from .kalman import KalmanState


@dataclass(frozen=True)
class TrackerConfig:
    iou_threshold: float = 0.3
    max_age: int = 30
    min_hits: int = 3
    ocm_weight: float = 0.2
    ocm_delta_t: int = 3
    score_threshold: float = 0.5
    reupdate: bool = True

    def __post_init__(self):
        if not 0.0 <= self.iou_threshold <= 1.0:
            raise ValueError(f"iou_threshold must be in [0, 1], got {self.iou_threshold}")
        if self.max_age < 1 or self.min_hits < 1 or self.ocm_delta_t < 1:
            raise ValueError("max_age, min_hits and ocm_delta_t must be >= 1")
        if self.ocm_weight < 0:
            raise ValueError(f"ocm_weight must be >= 0, got {self.ocm_weight}")
        if not 0.0 <= self.score_threshold <= 1.0:
            raise ValueError(f"score_threshold must be in [0, 1], got {self.score_threshold}")


class TrackStatus(enum.Enum):
    TENTATIVE = "tentative"
    CONFIRMED = "confirmed"
    LOST = "lost"
    DEAD = "dead"


def _bbox_center(bbox) -> np.ndarray:
    x, y, w, h = bbox
    return np.array([x + w / 2.0, y + h / 2.0])


def _bbox_iou(a, b) -> float:
    ax, ay, aw, ah = a
    bx, by, bw, bh = b
    ix = max(0.0, min(ax + aw, bx + bw) - max(ax, bx))
    iy = max(0.0, min(ay + ah, by + bh) - max(ay, by))
    inter = ix * iy
    union = aw * ah + bw * bh - inter
    return inter / union if union > 0 else 0.0


@dataclass
class Track:
    """One bubble identity with its full observation record."""

    id: int
    state: KalmanState
    observations: dict[int, Detection] = field(default_factory=dict)
    observation_indices: dict[int, int] = field(default_factory=dict)
    class_history: dict[int, Category] = field(default_factory=dict)
    last_observed_frame: int = -1
    status: TrackStatus = TrackStatus.TENTATIVE
    hit_streak: int = 0
    age: int = 0
    degenerate_predictions: int = 0
    state_at_last_obs: KalmanState | None = None

    @property
    def observed_frames(self) -> list[int]:
        return sorted(self.observations)

    @property
    def lifetime(self) -> int:
        frames = self.observed_frames
        return frames[-1] - frames[0] + 1 if frames else 0

    def direction(self, delta_t: int) -> np.ndarray | None:
        """Unit motion direction from observation centers, or None.

        The reference observation is the newest one at least ``delta_t``
        frames older than the last; a younger track falls back to its
        earliest observation. Tracks with fewer than two observations
        have no direction.
        """
        frames = self.observed_frames
        if len(frames) < 2:
            return None
        last = frames[-1]
        older = [f for f in frames if f <= last - delta_t]
        ref = older[-1] if older else frames[0]
        if ref == last:
            return None
        d = _bbox_center(self.observations[last].bbox) - _bbox_center(
            self.observations[ref].bbox
        )
        norm = float(np.hypot(*d))
        return d / norm if norm > 0 else None

    def record(self, frame_index: int, detection: Detection, detection_index: int):
        self.observations[frame_index] = detection
        self.observation_indices[frame_index] = detection_index
        self.class_history[frame_index] = detection.category
        self.last_observed_frame = frame_index
        self.state_at_last_obs = self.state


def associate(
    candidates: list[tuple[Track, np.ndarray, np.ndarray | None]],
    detections: list[Detection],
    config: TrackerConfig,
) -> tuple[list[tuple[int, int]], list[int], list[int]]:
    """Optimal track/detection assignment.

    ``candidates`` holds (track, predicted_bbox, direction) triples. The
    cost of pairing track i with detection j is
    ``-IoU(pred_i, det_j) + ocm_weight * dtheta(i, j) / pi`` where dtheta
    is the angle between the track's historical direction and the
    direction from its last observation to detection j. Matched pairs
    whose IoU falls below ``iou_threshold`` are discarded after the
    assignment. Equal-cost optima prefer the lower (track, detection)
    index pair.
    """
    n, m = len(candidates), len(detections)
    if n == 0 or m == 0:
        return [], list(range(n)), list(range(m))

    iou = np.zeros((n, m))
    cost = np.zeros((n, m))
    for i, (track, pbox, direction) in enumerate(candidates):
        last_center = _bbox_center(track.observations[track.last_observed_frame].bbox)
        for j, det in enumerate(detections):
            iou[i, j] = _bbox_iou(pbox, det.bbox)
            dtheta = 0.0
            if direction is not None and config.ocm_weight > 0:
                to_det = _bbox_center(det.bbox) - last_center
                norm = float(np.hypot(*to_det))
                if norm > 0:
                    cos = float(np.clip(np.dot(direction, to_det / norm), -1.0, 1.0))
                    dtheta = float(np.arccos(cos))
            cost[i, j] = -iou[i, j] + config.ocm_weight * dtheta / np.pi

    rows, cols = linear_sum_assignment(cost)
    total = cost[rows, cols].sum()
    # nudge toward the lexicographically smallest optimum; keep the
    # perturbed solution only if it is still exactly optimal
    lex = np.add.outer(np.arange(n) * m, np.arange(m)).astype(float)
    rows2, cols2 = linear_sum_assignment(cost + lex * (1e-12 / (n * m)))
    if cost[rows2, cols2].sum() == total:
        rows, cols = rows2, cols2

    matches = []
    unmatched_tracks = set(range(n))
    unmatched_dets = set(range(m))
    for i, j in zip(rows, cols):
        if iou[i, j] >= config.iou_threshold:
            matches.append((int(i), int(j)))
            unmatched_tracks.discard(int(i))
            unmatched_dets.discard(int(j))
    return matches, sorted(unmatched_tracks), sorted(unmatched_dets)


def _interp_bbox(b0, b1, t: float) -> np.ndarray:
    a = np.asarray(b0, dtype=float)
    b = np.asarray(b1, dtype=float)
    return a + t * (b - a)


class BubbleTracker:
    """Sequential tracking state machine; feed frames in increasing order."""

    def __init__(self, config: TrackerConfig | None = None):
        self.config = config or TrackerConfig()
        self.tracks: list[Track] = []
        self._next_id = 1
        self._last_index: int | None = None

    def _reupdated_state(self, track: Track, frame_index: int, detection: Detection) -> KalmanState:
        """Replay the occlusion gap with interpolated virtual observations.

        Starts from the state saved at the last real observation, runs a
        predict/update cycle over linearly interpolated boxes for each
        missed frame, then applies the real measurement.
        """
        gap = frame_index - track.last_observed_frame
        st = track.state_at_last_obs
        b0 = track.observations[track.last_observed_frame].bbox
        b1 = detection.bbox
        for k in range(1, gap):
            st, _ = kalman.predict(st)
            st = kalman.update_from_bbox(st, _interp_bbox(b0, b1, k / gap))
        st, _ = kalman.predict(st)
        return kalman.update_from_bbox(st, b1)

    def step(self, frame: Frame) -> list[tuple[int, Detection]]:
        """Process one frame; returns (track_id, detection) pairs claimed in it."""
        cfg = self.config
        if self._last_index is not None and frame.index <= self._last_index:
            raise UsageError(
                f"frame {frame.index} is not after last processed frame {self._last_index}"
            )
        elapsed = 1 if self._last_index is None else frame.index - self._last_index
        self._last_index = frame.index

        # retire tracks that have exhausted their unobserved allowance
        for t in self.tracks:
            if t.status != TrackStatus.DEAD and frame.index - t.last_observed_frame > cfg.max_age + 1:
                t.status = TrackStatus.DEAD

        detections = [
            (i, d) for i, d in enumerate(frame.detections) if d.score >= cfg.score_threshold
        ]

        candidates = []
        for t in self.tracks:
            if t.status == TrackStatus.DEAD:
                continue
            pbox = None
            for _ in range(elapsed):
                t.state, pbox = kalman.predict(t.state)
            if t.state.degenerate:
                t.degenerate_predictions += 1
            t.age += elapsed
            candidates.append((t, pbox, t.direction(cfg.ocm_delta_t)))

        matches, unmatched_tracks, unmatched_dets = associate(
            candidates, [d for _, d in detections], cfg
        )

        results = []
        for ci, dj in matches:
            t = candidates[ci][0]
            det_index, det = detections[dj]
            gap = frame.index - t.last_observed_frame
            if cfg.reupdate and gap > 1:
                t.state = self._reupdated_state(t, frame.index, det)
            else:
                t.state = kalman.update_from_bbox(t.state, det.bbox)
            t.record(frame.index, det, det_index)
            t.hit_streak += 1
            if t.status == TrackStatus.LOST:
                t.status = TrackStatus.CONFIRMED
            elif t.status == TrackStatus.TENTATIVE and t.hit_streak >= cfg.min_hits:
                t.status = TrackStatus.CONFIRMED
            results.append((t.id, det))

        for ci in unmatched_tracks:
            t = candidates[ci][0]
            t.hit_streak = 0
            if frame.index - t.last_observed_frame > cfg.max_age:
                t.status = TrackStatus.DEAD
            elif t.status == TrackStatus.CONFIRMED:
                t.status = TrackStatus.LOST

        for dj in unmatched_dets:
            det_index, det = detections[dj]
            t = Track(id=self._next_id, state=kalman.init_state(det.bbox))
            self._next_id += 1
            t.record(frame.index, det, det_index)
            t.hit_streak = 1
            t.age = 1
            if cfg.min_hits <= 1:
                t.status = TrackStatus.CONFIRMED
            self.tracks.append(t)
            results.append((t.id, det))

        return sorted(results, key=lambda r: r[0])


@dataclass(frozen=True)
class TrackSet:
    tracks: list[Track]
    config: TrackerConfig

    def by_id(self, track_id: int) -> Track:
        for t in self.tracks:
            if t.id == track_id:
                return t
        raise UsageError(
            f"unknown track id {track_id}; available: {[t.id for t in self.tracks]}"
        )

    def to_doc(self) -> dict:
        """tracks.json document."""
        return {
            "config": {
                "iou_threshold": self.config.iou_threshold,
                "max_age": self.config.max_age,
                "min_hits": self.config.min_hits,
                "ocm_weight": self.config.ocm_weight,
                "ocm_delta_t": self.config.ocm_delta_t,
                "score_threshold": self.config.score_threshold,
                "reupdate": self.config.reupdate,
            },
            "tracks": [
                {
                    "id": t.id,
                    "frames": [
                        {
                            "index": f,
                            "bbox": [float(v) for v in t.observations[f].bbox],
                            "category": t.observations[f].category.value,
                            "score": t.observations[f].score,
                            "mask_ref": {
                                "frame": f,
                                "detection_index": t.observation_indices[f],
                            },
                        }
                        for f in t.observed_frames
                    ],
                }
                for t in sorted(self.tracks, key=lambda t: t.id)
            ],
        }


def run_tracker(dataset: Dataset, config: TrackerConfig | None = None) -> TrackSet:
    """Track every frame of a dataset; deterministic for fixed inputs."""
    tracker = BubbleTracker(config)
    for frame in dataset.frames:
        tracker.step(frame)
    return TrackSet(tracks=tracker.tracks, config=tracker.config)


def count_id_switches(assignments: list[dict[int, int]]) -> int:
    """Number of identity changes over per-frame {true_id: track_id} maps."""
    last: dict[int, int] = {}
    switches = 0
    for frame_map in assignments:
        for true_id, track_id in frame_map.items():
            if true_id in last and last[true_id] != track_id:
                switches += 1
            last[true_id] = track_id
    return switches
