"""Worker position estimation.

A constant-velocity Kalman filter over the 6-state [p, v] fuses a bearing
obtained from the detection bounding box with one of three range sources
(UWB radio, stereo depth, apparent size). The most reliable available
range is selected with fixed priority UWB > stereo > apparent and the
measurement covariance is switched accordingly, rotated from the camera
frame into the world frame.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import CameraPose

SOURCE_UWB = "uwb"
SOURCE_STEREO = "stereo"
SOURCE_APPARENT = "apparent"

_H = np.hstack([np.eye(3), np.zeros((3, 3))])  # position-only observation


@dataclass
class ProcessNoiseConfig:
    """Per-axis process noise of the constant-velocity model (1-sigma)."""

    sigma_p: tuple[float, float, float] = (0.1, 0.1, 0.1)
    sigma_v: tuple[float, float, float] = (0.1, 0.1, 0.1)

    def __post_init__(self):
        if any(s < 0 for s in (*self.sigma_p, *self.sigma_v)):
            raise ValueError("process noise sigmas must be >= 0")

    def matrix(self) -> np.ndarray:
        return np.diag([s * s for s in (*self.sigma_p, *self.sigma_v)])


@dataclass
class MeasurementNoiseConfig:
    """Measurement noise: lateral sigma plus one range sigma per source."""

    sigma_xy: float = 0.05
    sigma_z_uwb: float = 0.1
    sigma_z_stereo: float = 0.3
    sigma_z_apparent: float = 0.6

    def __post_init__(self):
        sigmas = (self.sigma_xy, self.sigma_z_uwb, self.sigma_z_stereo, self.sigma_z_apparent)
        if any(s <= 0 for s in sigmas):
            raise ValueError("measurement noise sigmas must be > 0")

    def sigma_z(self, source: str) -> float:
        return {
            SOURCE_UWB: self.sigma_z_uwb,
            SOURCE_STEREO: self.sigma_z_stereo,
            SOURCE_APPARENT: self.sigma_z_apparent,
        }[source]


@dataclass
class DistanceSources:
    """Range estimates available this frame, in meters. Missing = None."""

    uwb: float | None = None
    stereo: float | None = None
    apparent: float | None = None

    def __post_init__(self):
        for name in ("uwb", "stereo", "apparent"):
            v = getattr(self, name)
            if v is not None and not (v > 0):
                raise ValueError(f"{name} distance must be positive, got {v!r}")


@dataclass
class Measurement:
    """World-frame position observation with its covariance."""

    z: np.ndarray
    cov: np.ndarray
    source: str

    def __post_init__(self):
        self.z = np.asarray(self.z, dtype=float)
        self.cov = np.asarray(self.cov, dtype=float)


@dataclass
class HumanEstimate:
    """Gaussian belief over the worker's position and velocity."""

    mean: np.ndarray
    cov: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=float).reshape(6)
        self.cov = np.asarray(self.cov, dtype=float).reshape(6, 6)

    @property
    def position(self) -> np.ndarray:
        return self.mean[:3]

    @property
    def velocity(self) -> np.ndarray:
        return self.mean[3:]


@dataclass
class PixelBox:
    """Axis-aligned pixel rectangle of a detection."""

    u_min: float
    v_min: float
    u_max: float
    v_max: float

    @property
    def center(self) -> tuple[float, float]:
        return (0.5 * (self.u_min + self.u_max), 0.5 * (self.v_min + self.v_max))

    @property
    def height(self) -> float:
        return self.v_max - self.v_min

    @property
    def width(self) -> float:
        return self.u_max - self.u_min


def kf_predict(est: HumanEstimate, dt: float, q: ProcessNoiseConfig) -> HumanEstimate:
    """Propagate the belief by dt under the constant-velocity model."""
    if not (dt > 0):
        raise ValueError(f"dt must be positive, got {dt!r}")
    F = np.eye(6)
    F[0, 3] = F[1, 4] = F[2, 5] = dt
    mean = F @ est.mean
    cov = F @ est.cov @ F.T + q.matrix()
    return HumanEstimate(mean, 0.5 * (cov + cov.T), est.t + dt)


def kf_update(est: HumanEstimate, m: Measurement) -> HumanEstimate:
    """Fuse a position measurement into the belief.

    Uses the Joseph-form covariance update to keep the result symmetric
    positive semidefinite.
    """
    P = est.cov
    S = P[:3, :3] + m.cov
    # Reject a singular innovation covariance instead of amplifying noise.
    if abs(np.linalg.det(S)) < 1e-18 or not np.all(np.isfinite(S)):
        raise ValueError("innovation covariance is singular or not finite")
    K = np.linalg.solve(S.T, (P @ _H.T).T).T  # P H^T S^-1
    mean = est.mean + K @ (m.z - est.mean[:3])
    IKH = np.eye(6) - K @ _H
    cov = IKH @ P @ IKH.T + K @ m.cov @ K.T
    return HumanEstimate(mean, 0.5 * (cov + cov.T), est.t)


def direction_from_bbox(cam: CameraPose, bbox: PixelBox) -> np.ndarray:
    """Camera-frame unit ray through the bounding-box center."""
    if bbox.height <= 0 or bbox.width <= 0:
        raise ValueError("bounding box must have positive area")
    u, v = bbox.center
    intr = cam.intrinsics
    if not (0 <= u <= intr.width and 0 <= v <= intr.height):
        raise ValueError(f"bounding-box center ({u:.1f}, {v:.1f}) outside image")
    d = np.array([(u - intr.cx) / intr.focal, (v - intr.cy) / intr.focal, 1.0])
    return d / np.linalg.norm(d)


def apparent_distance(bbox_height_px: float, human_height_m: float, focal_px: float) -> float:
    """Range from the apparent size of a target of known physical height."""
    if bbox_height_px <= 0 or human_height_m <= 0 or focal_px <= 0:
        raise ValueError("bbox height, human height and focal length must be positive")
    return focal_px * human_height_m / bbox_height_px


def stereo_distance(depth_samples) -> float | None:
    """Median of the finite depth samples inside the box, or None."""
    finite = [d for d in depth_samples if math.isfinite(d)]
    if not finite:
        return None
    return float(np.median(finite))


def select_distance(
    sources: DistanceSources, cam: CameraPose, noise: MeasurementNoiseConfig
) -> tuple[float, np.ndarray, str] | None:
    """Pick the highest-priority available range and its world covariance.

    Priority is UWB, then stereo, then apparent size. Returns None when no
    source is available (caller skips the filter update for this frame).
    """
    for source, value in (
        (SOURCE_UWB, sources.uwb),
        (SOURCE_STEREO, sources.stereo),
        (SOURCE_APPARENT, sources.apparent),
    ):
        if value is not None:
            sz = noise.sigma_z(source)
            cam_cov = np.diag([noise.sigma_xy**2, noise.sigma_xy**2, sz * sz])
            cov = cam.rotation @ cam_cov @ cam.rotation.T
            return float(value), cov, source
    return None


def build_measurement(cam: CameraPose, distance: float, direction: np.ndarray) -> np.ndarray:
    """World position of a point at the given camera-frame ray and range."""
    direction = np.asarray(direction, dtype=float)
    if abs(np.linalg.norm(direction) - 1.0) > 1e-9:
        raise ValueError("direction must be a unit vector")
    if not (distance > 0):
        raise ValueError("distance must be positive")
    return cam.rotation @ (distance * direction) + cam.p


def initial_estimate(m: Measurement, t: float, v_init: float = 1.0) -> HumanEstimate:
    """Belief from a first measurement: its position, zero velocity."""
    cov = np.zeros((6, 6))
    cov[:3, :3] = m.cov
    cov[3:, 3:] = np.eye(3) * v_init**2
    return HumanEstimate(np.concatenate([m.z, np.zeros(3)]), cov, t)


def estimate_tick(
    est: HumanEstimate | None,
    dt: float,
    bbox: PixelBox | None,
    cam: CameraPose,
    sources: DistanceSources,
    q: ProcessNoiseConfig,
    noise: MeasurementNoiseConfig,
    gate_threshold: float | None = None,
    now: float = 0.0,
) -> HumanEstimate | None:
    """One estimator cycle: predict, then update if a detection arrived.

    The update runs only when both a bounding box and at least one range
    source are present. With est=None the filter stays uninitialized until
    the first complete measurement. gate_threshold optionally enables a
    Mahalanobis gate on the innovation (disabled by default). now stamps
    the estimate produced when the filter initializes this tick.
    """
    if est is not None:
        est = kf_predict(est, dt, q)
    if bbox is None:
        return est
    picked = select_distance(sources, cam, noise)
    if picked is None:
        return est
    distance, cov, source = picked
    direction = direction_from_bbox(cam, bbox)
    z = build_measurement(cam, distance, direction)
    m = Measurement(z, cov, source)
    if est is None:
        return initial_estimate(m, now)
    if gate_threshold is not None:
        innov = m.z - est.mean[:3]
        S = est.cov[:3, :3] + m.cov
        d2 = float(innov @ np.linalg.solve(S, innov))
        if d2 > gate_threshold:
            return est
    return kf_update(est, m)


@dataclass
class HumanTracker:
    """Stateful wrapper running the estimator against a simulation clock."""

    q: ProcessNoiseConfig = field(default_factory=ProcessNoiseConfig)
    noise: MeasurementNoiseConfig = field(default_factory=MeasurementNoiseConfig)
    gate_threshold: float | None = None
    estimate: HumanEstimate | None = None
    t: float = 0.0

    def tick(self, dt: float, bbox: PixelBox | None, cam: CameraPose, sources: DistanceSources):
        self.t += dt
        self.estimate = estimate_tick(
            self.estimate, dt, bbox, cam, sources, self.q, self.noise,
            self.gate_threshold, now=self.t,
        )
        return self.estimate

    def observe(self, bbox: PixelBox | None, cam: CameraPose, sources: DistanceSources):
        """Fuse an extra same-instant observation without re-predicting."""
        if bbox is None:
            return self.estimate
        picked = select_distance(sources, cam, self.noise)
        if picked is None:
            return self.estimate
        distance, cov, source = picked
        z = build_measurement(cam, distance, direction_from_bbox(cam, bbox))
        m = Measurement(z, cov, source)
        if self.estimate is None:
            self.estimate = initial_estimate(m, self.t)
        else:
            self.estimate = kf_update(self.estimate, m)
        return self.estimate
