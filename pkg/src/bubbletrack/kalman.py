"""Constant-velocity Kalman filter over bounding-box state.

State vector: (u, v, s, r, du, dv, ds) with (u, v) the box center in px,
s the box area in px^2, r the aspect ratio w/h. The measurement is
(u, v, s, r). Noise matrices are fixed, documented constants from the
SORT lineage.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

DIM_X = 7
DIM_Z = 4

# motion model: u += du, v += dv, s += ds, r constant
F = np.eye(DIM_X)
F[0, 4] = F[1, 5] = F[2, 6] = 1.0
H = np.eye(DIM_Z, DIM_X)

# SORT-lineage diagonal noise defaults
R_MEASUREMENT = np.diag([1.0, 1.0, 10.0, 10.0])
Q_PROCESS = np.diag([1.0, 1.0, 1.0, 1.0, 0.01, 0.01, 1e-4])
P0_COVARIANCE = np.diag([10.0, 10.0, 10.0, 10.0, 1e4, 1e4, 1e4])

AREA_EPS = 1e-6    # clamp for degenerate predicted areas
REG_EPS = 1e-9     # innovation regularization when singular


@dataclass(frozen=True)
class KalmanState:
    mean: np.ndarray                 # (7,)
    covariance: np.ndarray           # (7, 7), symmetric PSD
    degenerate: bool = field(default=False, compare=False)

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=float).reshape(DIM_X)
        cov = np.asarray(self.covariance, dtype=float).reshape(DIM_X, DIM_X)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "covariance", cov)


def bbox_to_measurement(bbox) -> np.ndarray:
    """(x, y, w, h) -> (u, v, s, r)."""
    x, y, w, h = (float(v) for v in bbox)
    return np.array([x + w / 2.0, y + h / 2.0, w * h, w / h])


def measurement_to_bbox(z) -> np.ndarray:
    """(u, v, s, r) -> (x, y, w, h)."""
    u, v, s, r = (float(v) for v in z)
    w = np.sqrt(max(s * r, 0.0))
    h = s / w if w > 0 else 0.0
    return np.array([u - w / 2.0, v - h / 2.0, w, h])


def init_state(bbox) -> KalmanState:
    """Start a track from its first observed box with zero velocities."""
    mean = np.zeros(DIM_X)
    mean[:4] = bbox_to_measurement(bbox)
    return KalmanState(mean=mean, covariance=P0_COVARIANCE.copy())


def predict(state: KalmanState) -> tuple[KalmanState, np.ndarray]:
    """Propagate one frame ahead; returns the new state and predicted bbox.

    A non-positive predicted area is clamped to AREA_EPS (with the area
    velocity zeroed) and the returned state is flagged degenerate.
    """
    mean = F @ state.mean
    degenerate = False
    if mean[2] <= 0:
        mean[2] = AREA_EPS
        mean[6] = 0.0
        degenerate = True
    cov = F @ state.covariance @ F.T + Q_PROCESS
    cov = (cov + cov.T) / 2.0
    new = KalmanState(mean=mean, covariance=cov, degenerate=degenerate)
    return new, measurement_to_bbox(mean[:4])


def update(state: KalmanState, measurement) -> KalmanState:
    """Standard Kalman correction against a (u, v, s, r) measurement.

    Uses the Joseph-form covariance update, which stays PSD. A singular
    innovation covariance is regularized with REG_EPS * I and reported
    via warnings.
    """
    z = np.asarray(measurement, dtype=float).reshape(DIM_Z)
    P = state.covariance
    y = z - H @ state.mean
    S = H @ P @ H.T + R_MEASUREMENT
    try:
        K = np.linalg.solve(S.T, (P @ H.T).T).T
    except np.linalg.LinAlgError:
        warnings.warn("singular innovation covariance, regularizing", RuntimeWarning)
        S = S + REG_EPS * np.eye(DIM_Z)
        K = np.linalg.solve(S.T, (P @ H.T).T).T
    mean = state.mean + K @ y
    I_KH = np.eye(DIM_X) - K @ H
    cov = I_KH @ P @ I_KH.T + K @ R_MEASUREMENT @ K.T
    cov = (cov + cov.T) / 2.0
    return KalmanState(mean=mean, covariance=cov)


def update_from_bbox(state: KalmanState, bbox) -> KalmanState:
    return update(state, bbox_to_measurement(bbox))


def state_bbox(state: KalmanState) -> np.ndarray:
    return measurement_to_bbox(state.mean[:4])
