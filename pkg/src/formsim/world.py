"""Deterministic world simulation: scripted human, vehicle plant, sensors.

The vehicle plant is a tracking double integrator with the same clamp
model the planner assumes, so a feasible plan is followed exactly. All
randomness flows through one seeded generator owned by the world, which
makes identical (scenario, seed) runs bit-identical.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .estimator import PixelBox
from .geometry import (
    CameraIntrinsics,
    CameraPose,
    HumanState,
    UavState,
    angle_diff,
    boresight,
    wrap_angle,
)
from .mapping import OccupancyGrid
from .planner import DynamicLimits, PlannedTrajectory, braking_speed_cap


@dataclass
class Waypoint:
    t: float
    p: np.ndarray
    heading: float = 0.0

    def __post_init__(self):
        self.p = np.asarray(self.p, dtype=float)


@dataclass
class GestureInterval:
    """Scripted gesture: the worker performs `id` during [t_start, t_end)."""

    t_start: float
    t_end: float
    id: int

    def __post_init__(self):
        if self.t_end <= self.t_start:
            raise ValueError("gesture interval must have t_end > t_start")
        if self.id < 1:
            raise ValueError("scripted gesture id must be >= 1")


@dataclass
class HumanMotionScript:
    """Piecewise-linear worker motion plus scripted gesture intervals."""

    waypoints: list[Waypoint]
    gestures: list[GestureInterval] = field(default_factory=list)

    def __post_init__(self):
        if not self.waypoints:
            raise ValueError("script needs at least one waypoint")
        ts = [w.t for w in self.waypoints]
        if any(b <= a for a, b in zip(ts, ts[1:])):
            raise ValueError("waypoint times must strictly increase")

    def state_at(self, t: float) -> HumanState:
        """Interpolated pose; clamps before the first and after the last waypoint."""
        wps = self.waypoints
        if t <= wps[0].t:
            return HumanState(wps[0].p.copy(), np.zeros(3), wps[0].heading)
        if t >= wps[-1].t:
            return HumanState(wps[-1].p.copy(), np.zeros(3), wps[-1].heading)
        i = 0
        while wps[i + 1].t < t:
            i += 1
        a, b = wps[i], wps[i + 1]
        span = b.t - a.t
        w = (t - a.t) / span
        v = (b.p - a.p) / span
        heading = wrap_angle(a.heading + w * angle_diff(b.heading, a.heading))
        return HumanState(a.p + w * (b.p - a.p), v, heading)

    def gesture_at(self, t: float) -> int:
        for g in self.gestures:
            if g.t_start <= t < g.t_end:
                return g.id
        return 0


def step_human(script: HumanMotionScript, t: float) -> HumanState:
    return script.state_at(t)


@dataclass
class SensorModel:
    """Availability, noise and geometry of the leader's sensing suite."""

    intrinsics: CameraIntrinsics = field(default_factory=CameraIntrinsics)
    fov: float = math.radians(90.0)
    bbox_noise_px: float = 1.0
    stereo_availability: float = 0.9
    stereo_range: float = 12.0
    stereo_noise_m: float = 0.3
    stereo_samples: int = 5
    uwb_availability: float = 0.95
    uwb_range: float = 40.0
    uwb_noise_m: float = 0.1
    human_height_m: float = 1.8
    camera_blackouts: list[tuple[float, float]] = field(default_factory=list)

    def __post_init__(self):
        for p in (self.stereo_availability, self.uwb_availability):
            if not (0.0 <= p <= 1.0):
                raise ValueError("availability must lie in [0, 1]")
        if self.stereo_range <= 0 or self.uwb_range <= 0:
            raise ValueError("sensor ranges must be positive")

    def blacked_out(self, t: float) -> bool:
        return any(a <= t < b for a, b in self.camera_blackouts)


@dataclass
class SensorBundle:
    """What one vehicle sensed about the worker this tick."""

    bbox: PixelBox | None = None
    stereo: list[float] | None = None
    uwb: float | None = None


def visibility(cam: CameraPose, target, grid: OccupancyGrid | None, fov: float) -> bool:
    """Target inside the camera FOV cone and not blocked by the grid."""
    offs = np.asarray(target, dtype=float) - cam.p
    rng = float(np.linalg.norm(offs))
    if rng < 1e-9:
        return True
    cosang = float(offs @ cam.optical_axis) / rng
    if cosang < math.cos(fov / 2.0):
        return False
    if grid is not None and not grid.segment_free(cam.p, np.asarray(target, dtype=float)):
        return False
    return True


def _project(cam: CameraPose, point) -> tuple[float, float, float] | None:
    """Pixel coordinates and camera depth of a world point, or None behind."""
    pc = cam.rotation.T @ (np.asarray(point, dtype=float) - cam.p)
    if pc[2] <= 1e-9:
        return None
    intr = cam.intrinsics
    u = intr.cx + intr.focal * pc[0] / pc[2]
    v = intr.cy + intr.focal * pc[1] / pc[2]
    return u, v, float(pc[2])


def sense(
    cam: CameraPose,
    human: HumanState,
    model: SensorModel,
    rng: np.random.Generator,
    grid: OccupancyGrid | None = None,
    t: float = 0.0,
) -> SensorBundle:
    """Sample the leader's sensors against the true worker state.

    The bounding box comes from projecting the worker's body extent and is
    emitted only when the worker is visible; stereo needs the same line of
    sight, while the radio range only needs the worker in range.
    """
    bundle = SensorBundle()
    true_range = float(np.linalg.norm(human.p - cam.p))

    visible = (
        not model.blacked_out(t)
        and visibility(cam, human.p, grid, model.fov)
        and _project(cam, human.p) is not None
    )
    if visible:
        half = np.array([0.0, 0.0, model.human_height_m / 2.0])
        top = _project(cam, human.p + half)
        bot = _project(cam, human.p - half)
        ctr = _project(cam, human.p)
        if top is not None and bot is not None and ctr is not None:
            u, v, _ = ctr
            u += rng.normal(0.0, model.bbox_noise_px)
            v += rng.normal(0.0, model.bbox_noise_px)
            h = abs(bot[1] - top[1]) + rng.normal(0.0, model.bbox_noise_px)
            w = 0.4 * h
            intr = model.intrinsics
            if h > 1.0 and 0 <= u <= intr.width and 0 <= v <= intr.height:
                bundle.bbox = PixelBox(u - w / 2, v - h / 2, u + w / 2, v + h / 2)

    if bundle.bbox is not None and true_range <= model.stereo_range:
        if rng.random() < model.stereo_availability:
            noise = rng.normal(0.0, model.stereo_noise_m, size=model.stereo_samples)
            bundle.stereo = list(true_range + noise)

    if true_range <= model.uwb_range and rng.random() < model.uwb_availability:
        bundle.uwb = max(true_range + rng.normal(0.0, model.uwb_noise_m), 0.01)

    return bundle


def step_uav(
    state: UavState,
    velocity: np.ndarray,
    plan: PlannedTrajectory | None,
    t: float,
    dt: float,
    limits: DynamicLimits,
) -> tuple[UavState, np.ndarray]:
    """Advance the plant one step along its plan.

    The plant chases the plan sample at t + dt with acceleration, speed
    and slew clamps; a feasible plan is therefore tracked exactly. With no
    plan the vehicle holds position.
    """
    if not (dt > 0):
        raise ValueError("dt must be positive")
    velocity = np.asarray(velocity, dtype=float)
    if plan is None or len(plan) == 0:
        return state.copy(), np.zeros(3)
    p_now, _, _, _ = plan.state_at(t)
    p_t, _, want_h, want_x = plan.state_at(t + dt)

    # feed-forward the plan's own advance; brake only the correction of the
    # tracking error so a far vehicle converges without overshooting
    ff = (p_t - p_now) / dt
    err = p_now - state.p
    dist = float(np.linalg.norm(err))
    if dist > 1e-12:
        corr = min(dist / dt, limits.v_max, braking_speed_cap(dist, limits.a_max, dt))
        v_des = ff + err * (corr / dist)
    else:
        v_des = ff
    dv = v_des - velocity
    a_dt = limits.a_max * dt * (1.0 + 1e-9)
    dv_norm = float(np.linalg.norm(dv))
    if dv_norm > a_dt:
        dv *= a_dt / dv_norm
    v_new = velocity + dv
    speed = float(np.linalg.norm(v_new))
    v_cap = limits.v_max * (1.0 + 1e-9)
    if speed > v_cap:
        v_new *= v_cap / speed
    p_new = state.p + v_new * dt

    max_step = limits.ang_rate_max * dt * (1.0 + 1e-9)
    dh = angle_diff(want_h, state.heading)
    heading = wrap_angle(state.heading + max(-max_step, min(max_step, dh)))
    dx = want_x - state.pitch
    pitch = state.pitch + max(-max_step, min(max_step, dx))
    pitch = min(max(pitch, -math.pi / 2), math.pi / 2)
    return UavState(p_new, heading, pitch), v_new


@dataclass
class World:
    """Single-owner simulation state stepped by the mission loop."""

    script: HumanMotionScript
    uav_states: dict[str, UavState]
    uav_velocities: dict[str, np.ndarray]
    grid: OccupancyGrid
    sensors: SensorModel
    limits: DynamicLimits
    rng: np.random.Generator
    t: float = 0.0
    gesture_override: int | None = None

    def __post_init__(self):
        self.human = self.script.state_at(self.t)

    def active_gesture(self) -> int:
        if self.gesture_override is not None:
            return self.gesture_override
        return self.script.gesture_at(self.t)

    def step(self, plans: dict[str, PlannedTrajectory | None], dt: float) -> None:
        """Advance every body by dt. Sensor sampling happens separately."""
        if not (dt > 0):
            raise ValueError("dt must be positive")
        t_next = self.t + dt
        for name, state in self.uav_states.items():
            new_state, new_vel = step_uav(
                state, self.uav_velocities[name], plans.get(name), self.t, dt, self.limits
            )
            self.uav_states[name] = new_state
            self.uav_velocities[name] = new_vel
        self.t = t_next
        self.human = self.script.state_at(t_next)

    def camera_of(self, name: str) -> CameraPose:
        return CameraPose.from_state(self.uav_states[name], self.sensors.intrinsics)

    def sense_from(self, name: str) -> SensorBundle:
        return sense(
            self.camera_of(name), self.human, self.sensors, self.rng, self.grid, self.t
        )
