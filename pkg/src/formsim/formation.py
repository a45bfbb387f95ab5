"""Leader and follower reference states around the tracked worker.

The leader observes the worker from horizontal angle beta, vertical angle
gamma and range d, all measured against the worker's heading. Followers
are placed the same way but relative to the leader's camera heading and
pitch, so one leader-side change re-shapes the whole formation. Every
reference keeps the camera boresight on the worker.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .estimator import HumanEstimate
from .geometry import FormationParams, HumanState, UavState, wrap_angle


@dataclass
class HorizonConfig:
    """Receding-horizon sampling: total length and sample spacing."""

    length: float = 4.0
    dt: float = 0.2

    def __post_init__(self):
        if not (self.length >= self.dt > 0):
            raise ValueError("need horizon length >= dt > 0")

    @property
    def steps(self) -> int:
        return int(round(self.length / self.dt))


@dataclass
class ReferenceTrajectory:
    """Uniformly sampled sequence of desired vehicle states."""

    t: np.ndarray
    pos: np.ndarray
    heading: np.ndarray
    pitch: np.ndarray

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=float)
        self.pos = np.asarray(self.pos, dtype=float)
        self.heading = np.asarray(self.heading, dtype=float)
        self.pitch = np.asarray(self.pitch, dtype=float)
        if len(self.t) == 0:
            raise ValueError("trajectory must hold at least one sample")
        if np.any(np.diff(self.t) <= 0):
            raise ValueError("sample times must strictly increase")

    def __len__(self) -> int:
        return len(self.t)

    def state(self, i: int) -> UavState:
        return UavState(self.pos[i].copy(), float(self.heading[i]), float(self.pitch[i]))


def leader_reference(human: HumanState, prm: FormationParams) -> UavState:
    """Desired leader state for the given worker pose and parameters."""
    az = human.heading - prm.beta
    cg = math.cos(prm.gamma)
    offset = np.array([
        prm.distance * math.cos(az) * cg,
        prm.distance * math.sin(az) * cg,
        prm.distance * -math.sin(prm.gamma),
    ])
    return UavState(human.p - offset, wrap_angle(az), -prm.gamma)


def follower_reference(human: HumanState, leader: UavState, prm: FormationParams) -> UavState:
    """Desired follower state, offset from the leader's camera direction.

    The follower pitch is the leader pitch minus the follower's vertical
    angle; it saturates at straight up/down for parameter combinations
    that would tip past the vertical.
    """
    az = leader.heading - prm.beta
    el = leader.pitch - prm.gamma
    el = min(max(el, -math.pi / 2), math.pi / 2)
    ce = math.cos(el)
    offset = np.array([
        prm.distance * math.cos(az) * ce,
        prm.distance * math.sin(az) * ce,
        prm.distance * math.sin(el),
    ])
    return UavState(human.p - offset, wrap_angle(az), el)


def predict_human_trajectory(
    est: HumanEstimate,
    horizon: HorizonConfig,
    heading_policy: str = "constant",
    heading_value: float = 0.0,
    t0: float = 0.0,
) -> list[HumanState]:
    """Constant-velocity extrapolation of the belief over the horizon.

    Returns horizon.steps + 1 states starting at t0. Heading follows the
    scenario policy: a fixed value, or the estimated motion direction
    (falling back to the fixed value when nearly stationary).
    """
    p0 = est.position
    v = est.velocity
    if heading_policy == "motion":
        speed = math.hypot(v[0], v[1])
        heading = math.atan2(v[1], v[0]) if speed > 1e-3 else heading_value
    elif heading_policy == "constant":
        heading = heading_value
    else:
        raise ValueError(f"unknown heading policy {heading_policy!r}")
    out = []
    for k in range(horizon.steps + 1):
        dt = k * horizon.dt
        out.append(HumanState(p0 + v * dt, v.copy(), heading))
    return out


def horizon_references(
    pred: list[HumanState],
    params: dict[str, FormationParams],
    leader_name: str,
    t0: float,
    dt: float,
    leader_plan: "object | None" = None,
) -> dict[str, ReferenceTrajectory]:
    """Apply the leader/follower equations to every pose on the horizon.

    Followers are referenced against the leader's planned camera pose at
    the same timestamp when a published leader plan covering the horizon
    is given; otherwise they fall back to the leader reference states.
    leader_plan must expose aligned t/heading/pitch arrays (a
    PlannedTrajectory or ReferenceTrajectory).
    """
    n = len(pred)
    times = t0 + dt * np.arange(n)
    leader_states = [leader_reference(h, params[leader_name]) for h in pred]
    # The leader's own reference always comes from its equation; a published
    # leader plan only provides the camera pose the followers key off.
    lead_heading = np.array([s.heading for s in leader_states])
    lead_pitch = np.array([s.pitch for s in leader_states])
    out: dict[str, ReferenceTrajectory] = {}
    out[leader_name] = ReferenceTrajectory(
        times, np.stack([s.p for s in leader_states]), lead_heading.copy(), lead_pitch.copy()
    )
    if leader_plan is not None:
        pt = np.asarray(leader_plan.t, dtype=float)
        if len(pt) != n or np.abs(pt - times).max() > 1e-9:
            raise ValueError("leader plan timestamps are not aligned with the horizon")
        lead_heading = np.asarray(leader_plan.heading, dtype=float)
        lead_pitch = np.asarray(leader_plan.pitch, dtype=float)
    for name, prm in params.items():
        if name == leader_name:
            continue
        pos = np.empty((n, 3))
        heading = np.empty(n)
        pitch = np.empty(n)
        for k, h in enumerate(pred):
            ref = follower_reference(
                h, UavState(np.zeros(3), float(lead_heading[k]), float(lead_pitch[k])), prm
            )
            pos[k] = ref.p
            heading[k] = ref.heading
            pitch[k] = ref.pitch
        out[name] = ReferenceTrajectory(times, pos, heading, pitch)
    return out
