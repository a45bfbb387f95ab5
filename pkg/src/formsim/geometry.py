"""Shared frames, angle conventions and pose types.

Conventions used throughout the package:

* World frame is ENU: x east, y north, z up, units in meters.
* Headings are measured counter-clockwise from +x and wrapped to (-pi, pi].
* Camera pitch is the boresight elevation, so negative pitch looks down.
* The camera frame has x right, y down and the optical axis along +z.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

TWO_PI = 2.0 * math.pi


def wrap_angle(a: float) -> float:
    """Wrap an angle in radians to (-pi, pi]."""
    if not math.isfinite(a):
        raise ValueError(f"angle must be finite, got {a!r}")
    w = math.remainder(a, TWO_PI)
    if w <= -math.pi:
        w += TWO_PI
    return w


def angle_diff(a: float, b: float) -> float:
    """Shortest signed difference a - b, wrapped to (-pi, pi]."""
    return wrap_angle(a - b)


def boresight(heading: float, pitch: float) -> np.ndarray:
    """Unit vector a camera at the given heading/pitch looks along."""
    ce = math.cos(pitch)
    return np.array([math.cos(heading) * ce, math.sin(heading) * ce, math.sin(pitch)])


def azimuth_of(v: np.ndarray) -> float:
    """Heading of the horizontal component of a vector."""
    return math.atan2(v[1], v[0])


def elevation_of(v: np.ndarray) -> float:
    """Elevation angle of a vector above the horizontal plane."""
    h = math.hypot(v[0], v[1])
    return math.atan2(v[2], h)


def unit(v: np.ndarray) -> np.ndarray:
    n = float(np.linalg.norm(v))
    if n == 0.0:
        raise ValueError("cannot normalize a zero vector")
    return v / n


def camera_rotation(heading: float, pitch: float) -> np.ndarray:
    """World-from-camera rotation for a camera pointed at (heading, pitch).

    Columns are the camera x (image right), y (image down) and z (optical
    axis) axes expressed in the world frame.
    """
    fwd = boresight(heading, pitch)
    right = np.array([math.sin(heading), -math.cos(heading), 0.0])
    down = np.cross(fwd, right)
    return np.column_stack([right, down, fwd])


@dataclass
class UavState:
    """Pose of one vehicle: position plus camera heading and pitch."""

    p: np.ndarray
    heading: float
    pitch: float

    def __post_init__(self):
        self.p = np.asarray(self.p, dtype=float)
        if self.p.shape != (3,) or not np.all(np.isfinite(self.p)):
            raise ValueError("position must be a finite 3-vector")
        self.heading = wrap_angle(self.heading)
        if not math.isfinite(self.pitch) or abs(self.pitch) > math.pi / 2 + 1e-12:
            raise ValueError(f"pitch must lie in [-pi/2, pi/2], got {self.pitch!r}")

    def copy(self) -> "UavState":
        return UavState(self.p.copy(), self.heading, self.pitch)


@dataclass
class HumanState:
    """Worker pose: position, velocity and body heading."""

    p: np.ndarray
    v: np.ndarray = field(default_factory=lambda: np.zeros(3))
    heading: float = 0.0

    def __post_init__(self):
        self.p = np.asarray(self.p, dtype=float)
        self.v = np.asarray(self.v, dtype=float)
        self.heading = wrap_angle(self.heading)


@dataclass
class FormationParams:
    """Adaptive observation parameters of one vehicle.

    beta is the horizontal observation angle, gamma the vertical one,
    distance the desired range to the worker. beta is periodic; gamma and
    distance are kept inside configured limits by the command layer.
    """

    beta: float
    gamma: float
    distance: float

    def __post_init__(self):
        self.beta = wrap_angle(self.beta)
        if not math.isfinite(self.gamma):
            raise ValueError("gamma must be finite")
        if not (self.distance > 0.0):
            raise ValueError(f"distance must be positive, got {self.distance!r}")

    def copy(self) -> "FormationParams":
        return FormationParams(self.beta, self.gamma, self.distance)


@dataclass
class ParamLimits:
    """Clamp ranges applied to operator and gesture parameter changes."""

    d_min: float = 4.0
    d_max: float = 15.0
    gamma_min: float = 0.0
    gamma_max: float = math.radians(60.0)

    def __post_init__(self):
        if not (0.0 < self.d_min <= self.d_max):
            raise ValueError("need 0 < d_min <= d_max")
        if self.gamma_min > self.gamma_max:
            raise ValueError("need gamma_min <= gamma_max")


@dataclass
class CameraIntrinsics:
    """Pinhole intrinsics in pixels."""

    focal: float = 600.0
    cx: float = 640.0
    cy: float = 360.0
    width: int = 1280
    height: int = 720

    def __post_init__(self):
        if self.focal <= 0 or self.width <= 0 or self.height <= 0:
            raise ValueError("focal length and image size must be positive")


@dataclass
class CameraPose:
    """World pose of a camera: world-from-camera rotation and position."""

    rotation: np.ndarray
    p: np.ndarray
    intrinsics: CameraIntrinsics = field(default_factory=CameraIntrinsics)

    def __post_init__(self):
        self.rotation = np.asarray(self.rotation, dtype=float)
        self.p = np.asarray(self.p, dtype=float)
        if self.rotation.shape != (3, 3):
            raise ValueError("rotation must be 3x3")
        err = np.abs(self.rotation @ self.rotation.T - np.eye(3)).max()
        if err > 1e-6 or np.linalg.det(self.rotation) < 0.0:
            raise ValueError("rotation must be a proper orthonormal matrix")

    @classmethod
    def from_state(cls, state: UavState, intrinsics: CameraIntrinsics | None = None) -> "CameraPose":
        intr = intrinsics if intrinsics is not None else CameraIntrinsics()
        return cls(camera_rotation(state.heading, state.pitch), state.p.copy(), intr)

    @property
    def optical_axis(self) -> np.ndarray:
        return self.rotation[:, 2]
