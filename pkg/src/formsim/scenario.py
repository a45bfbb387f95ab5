"""Scenario files: world volume, roster, scripts, sensor and filter config.

Scenarios are JSON with human-friendly units (degrees, meters, seconds);
angles are converted to radians on load. All validation failures raise
ScenarioError naming the offending field or invariant.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .estimator import MeasurementNoiseConfig, ProcessNoiseConfig
from .formation import HorizonConfig
from .geometry import CameraIntrinsics, FormationParams, ParamLimits
from .gestures import DetectorEmulatorModel, GestureFilterConfig, ParamDelta
from .mapping import Box, Cylinder, OccupancyGrid
from .planner import DynamicLimits
from .world import GestureInterval, HumanMotionScript, SensorModel, Waypoint


class ScenarioError(ValueError):
    """Scenario file violates the schema or an invariant."""


@dataclass
class UavConfig:
    name: str
    role: str
    params: FormationParams
    start_p: np.ndarray | None = None
    start_heading: float = 0.0
    start_pitch: float = 0.0


@dataclass
class Command:
    """A replayable input: operator request or worker gesture edge."""

    t: float
    kind: str  # operator_request | gesture_on | gesture_off
    uav: str | None = None
    param: str | None = None
    delta: float | None = None
    absolute: float | None = None
    gesture_id: int | None = None

    def to_json(self) -> dict:
        out = {"t": self.t, "kind": self.kind}
        if self.kind == "operator_request":
            out["uav"] = self.uav
            out["param"] = self.param
            if self.delta is not None:
                out["delta"] = _to_user_units(self.param, self.delta)
            else:
                out["absolute"] = _to_user_units(self.param, self.absolute)
        else:
            out["id"] = self.gesture_id
        return out

    @classmethod
    def from_json(cls, obj: dict) -> "Command":
        kind = obj.get("kind")
        if kind == "operator_request":
            delta = obj.get("delta")
            absolute = obj.get("absolute")
            param = obj["param"]
            return cls(
                t=float(obj["t"]),
                kind=kind,
                uav=obj["uav"],
                param=param,
                delta=_from_user_units(param, delta) if delta is not None else None,
                absolute=_from_user_units(param, absolute) if absolute is not None else None,
            )
        if kind in ("gesture_on", "gesture_off"):
            return cls(t=float(obj["t"]), kind=kind, gesture_id=int(obj.get("id", 0)))
        raise ScenarioError(f"unknown command kind {kind!r}")

    def as_param_delta(self) -> ParamDelta:
        return ParamDelta(self.uav, self.param, delta=self.delta, absolute=self.absolute)


def _to_user_units(param: str, value: float) -> float:
    return math.degrees(value) if param in ("beta", "gamma") else value


def _from_user_units(param: str, value: float) -> float:
    return math.radians(value) if param in ("beta", "gamma") else value


@dataclass
class Scenario:
    name: str
    seed: int
    duration: float
    tick_dt: float
    replan_period: float
    grid: OccupancyGrid
    obstacle_cells: np.ndarray  # occupied centers of scripted obstacles only
    uavs: list[UavConfig]
    human_script: HumanMotionScript
    sensors: SensorModel
    detector: DetectorEmulatorModel
    detector_period: float
    gesture_filter: GestureFilterConfig
    gesture_map: dict[int, ParamDelta]
    process_noise: ProcessNoiseConfig
    measurement_noise: MeasurementNoiseConfig
    limits: DynamicLimits
    param_limits: ParamLimits
    horizon: HorizonConfig
    separation: float
    heading_policy: str
    heading_value: float
    followers_sense: bool = False
    commands: list[Command] = field(default_factory=list)
    obstacles: list[dict] = field(default_factory=list)
    bounds_min: np.ndarray = field(default_factory=lambda: np.zeros(3))
    bounds_max: np.ndarray = field(default_factory=lambda: np.zeros(3))

    @property
    def leader(self) -> UavConfig:
        return next(u for u in self.uavs if u.role == "leader")

    @property
    def followers(self) -> list[UavConfig]:
        return [u for u in self.uavs if u.role != "leader"]


def _req(obj: dict, key: str, where: str):
    if key not in obj:
        raise ScenarioError(f"missing required field '{where}.{key}'")
    return obj[key]


def load_scenario(path: str | Path) -> Scenario:
    """Parse and validate a scenario file."""
    path = Path(path)
    if not path.exists():
        raise ScenarioError(f"scenario file not found: {path}")
    with open(path) as f:
        raw = json.load(f)
    return scenario_from_dict(raw)


def scenario_from_dict(raw: dict) -> Scenario:
    name = raw.get("name", "scenario")
    seed = int(raw.get("seed", 0))
    duration = float(_req(raw, "duration_s", "scenario"))
    if duration <= 0:
        raise ScenarioError("invariant violated: duration_s must be > 0")
    tick_dt = 1.0 / float(raw.get("tick_rate_hz", 10.0))
    replan_period = 1.0 / float(raw.get("replan_rate_hz", 5.0))

    # --- world ---------------------------------------------------------
    world = _req(raw, "world", "scenario")
    lo = np.asarray(_req(world, "bounds_min", "world"), dtype=float)
    hi = np.asarray(_req(world, "bounds_max", "world"), dtype=float)
    if np.any(hi <= lo):
        raise ScenarioError("invariant violated: world.bounds_max must exceed bounds_min")
    cell = float(world.get("cell_size_m", 0.5))
    if cell <= 0:
        raise ScenarioError("invariant violated: world.cell_size_m must be > 0")
    grid = OccupancyGrid.empty(lo, hi - lo, cell)
    for i, obs in enumerate(world.get("obstacles", [])):
        kind = obs.get("type")
        if kind == "box":
            grid.add_box(Box(np.asarray(obs["min"], dtype=float), np.asarray(obs["max"], dtype=float)))
        elif kind == "cylinder":
            grid.add_cylinder(
                Cylinder(
                    np.asarray(obs["center"], dtype=float),
                    float(obs["radius"]),
                    float(obs["z_min"]),
                    float(obs["z_max"]),
                )
            )
        else:
            raise ScenarioError(f"unknown obstacle type {kind!r} in world.obstacles[{i}]")
    obstacle_cells = grid.occupied_centers()
    ground = float(world.get("ground_margin_m", 0.5))
    if ground > 0:
        grid.mark_floor(lo[2] + ground)

    # --- roster ----------------------------------------------------------
    uav_list = _req(raw, "uavs", "scenario")
    if not uav_list:
        raise ScenarioError("invariant violated: at least one UAV required")
    uavs = []
    for i, u in enumerate(uav_list):
        where = f"uavs[{i}]"
        params = FormationParams(
            beta=math.radians(float(_req(u, "beta_deg", where))),
            gamma=math.radians(float(_req(u, "gamma_deg", where))),
            distance=float(_req(u, "distance_m", where)),
        )
        start = u.get("start")
        cfg = UavConfig(
            name=_req(u, "name", where),
            role=u.get("role", "follower"),
            params=params,
            start_p=np.asarray(start["p"], dtype=float) if start and "p" in start else None,
            start_heading=math.radians(float(start.get("heading_deg", 0.0))) if start else 0.0,
            start_pitch=math.radians(float(start.get("pitch_deg", 0.0))) if start else 0.0,
        )
        uavs.append(cfg)
    names = [u.name for u in uavs]
    if len(set(names)) != len(names):
        raise ScenarioError("invariant violated: UAV names must be unique")
    leaders = [u for u in uavs if u.role == "leader"]
    if len(leaders) != 1:
        raise ScenarioError("invariant violated: exactly one leader required")

    # --- human script ---------------------------------------------------
    human = _req(raw, "human", "scenario")
    wps = []
    for i, w in enumerate(_req(human, "waypoints", "human")):
        wps.append(
            Waypoint(
                t=float(_req(w, "t", f"human.waypoints[{i}]")),
                p=np.asarray(_req(w, "p", f"human.waypoints[{i}]"), dtype=float),
                heading=math.radians(float(w.get("heading_deg", 0.0))),
            )
        )
    gestures = [
        GestureInterval(float(g["t_start"]), float(g["t_end"]), int(g["id"]))
        for g in human.get("gestures", [])
    ]
    try:
        script = HumanMotionScript(wps, gestures)
    except ValueError as e:
        raise ScenarioError(f"invalid human script: {e}") from e
    policy = human.get("heading_policy", {"mode": "constant", "value_deg": 0.0})
    heading_policy = policy.get("mode", "constant")
    if heading_policy not in ("constant", "motion"):
        raise ScenarioError(f"unknown human.heading_policy.mode {heading_policy!r}")
    heading_value = math.radians(float(policy.get("value_deg", 0.0)))

    # --- sensors ----------------------------------------------------------
    s = raw.get("sensors", {})
    icfg = s.get("intrinsics", {})
    intrinsics = CameraIntrinsics(
        focal=float(icfg.get("focal_px", 600.0)),
        cx=float(icfg.get("cx_px", icfg.get("width_px", 1280) / 2)),
        cy=float(icfg.get("cy_px", icfg.get("height_px", 720) / 2)),
        width=int(icfg.get("width_px", 1280)),
        height=int(icfg.get("height_px", 720)),
    )
    sensors = SensorModel(
        intrinsics=intrinsics,
        fov=math.radians(float(s.get("fov_deg", 90.0))),
        bbox_noise_px=float(s.get("bbox_noise_px", 1.0)),
        stereo_availability=float(s.get("stereo", {}).get("availability", 0.9)),
        stereo_range=float(s.get("stereo", {}).get("range_max_m", 12.0)),
        stereo_noise_m=float(s.get("stereo", {}).get("noise_m", 0.3)),
        stereo_samples=int(s.get("stereo", {}).get("samples", 5)),
        uwb_availability=float(s.get("uwb", {}).get("availability", 0.95)),
        uwb_range=float(s.get("uwb", {}).get("range_max_m", 40.0)),
        uwb_noise_m=float(s.get("uwb", {}).get("noise_m", 0.1)),
        human_height_m=float(human.get("height_m", 1.8)),
        camera_blackouts=[(float(a), float(b)) for a, b in s.get("camera_blackouts", [])],
    )

    # --- detector emulator -----------------------------------------------
    det = raw.get("detector", {})
    n_ids = int(det.get("num_gestures", 5))
    conf = det.get("confusion", "identity")
    rate = float(det.get("detection_rate", 1.0))
    if conf == "identity":
        detector = DetectorEmulatorModel.identity(n_ids, rate)
    elif isinstance(conf, (int, float)):
        detector = DetectorEmulatorModel.diagonal(n_ids, float(conf), rate)
    elif isinstance(conf, list):
        detector = DetectorEmulatorModel(np.asarray(conf, dtype=float), rate)
    else:
        raise ScenarioError("detector.confusion must be 'identity', a scalar accuracy or a matrix")
    detector_period = float(det.get("period_s", 0.3))
    if detector_period <= 0:
        raise ScenarioError("invariant violated: detector.period_s must be > 0")

    # --- filters and noise ------------------------------------------------
    gf = raw.get("gesture_filter", {})
    gesture_filter = GestureFilterConfig(
        window=int(gf.get("window", 20)),
        stale_after=float(gf.get("stale_after_s", 20.0)),
        ratio_threshold=float(gf.get("ratio_threshold", 0.8)),
        debounce=float(gf.get("debounce_s", 5.0)),
    )
    pn = raw.get("process_noise", {})
    sp = float(pn.get("sigma_p", 0.1))
    sv = float(pn.get("sigma_v", 0.1))
    process_noise = ProcessNoiseConfig((sp, sp, sp), (sv, sv, sv))
    mn = raw.get("measurement_noise", {})
    measurement_noise = MeasurementNoiseConfig(
        sigma_xy=float(mn.get("sigma_xy", 0.05)),
        sigma_z_uwb=float(mn.get("sigma_z_uwb", 0.1)),
        sigma_z_stereo=float(mn.get("sigma_z_stereo", 0.3)),
        sigma_z_apparent=float(mn.get("sigma_z_apparent", 0.6)),
    )

    lim = raw.get("limits", {})
    limits = DynamicLimits(
        v_max=float(lim.get("v_max", 3.0)),
        a_max=float(lim.get("a_max", 2.0)),
        ang_rate_max=math.radians(float(lim.get("ang_rate_max_deg", 90.0))),
    )
    pl = raw.get("param_limits", {})
    param_limits = ParamLimits(
        d_min=float(pl.get("d_min_m", 4.0)),
        d_max=float(pl.get("d_max_m", 15.0)),
        gamma_min=math.radians(float(pl.get("gamma_min_deg", 0.0))),
        gamma_max=math.radians(float(pl.get("gamma_max_deg", 60.0))),
    )
    hz = raw.get("horizon", {})
    horizon = HorizonConfig(length=float(hz.get("length_s", 4.0)), dt=float(hz.get("dt_s", 0.2)))
    separation = float(raw.get("safety", {}).get("separation_m", 2.5))
    if separation <= 0:
        raise ScenarioError("invariant violated: safety.separation_m must be > 0")

    # --- gesture map -------------------------------------------------------
    gmap: dict[int, ParamDelta] = {}
    for key, m in raw.get(
        "gesture_map",
        {
            "1": {"uav": "leader", "param": "beta", "delta_deg": -30.0},
            "2": {"uav": "leader", "param": "beta", "delta_deg": 30.0},
            "3": {"uav": "leader", "param": "gamma", "delta_deg": -5.0},
            "4": {"uav": "leader", "param": "gamma", "delta_deg": 5.0},
        },
    ).items():
        param = _req(m, "param", f"gesture_map[{key}]")
        uav = m.get("uav", "leader")
        if uav != "all" and uav not in names and uav != "leader":
            raise ScenarioError(f"gesture_map[{key}].uav {uav!r} is not in the roster")
        if "delta_deg" in m:
            delta = math.radians(float(m["delta_deg"]))
        elif "delta_m" in m:
            delta = float(m["delta_m"])
        else:
            raise ScenarioError(f"gesture_map[{key}] needs delta_deg or delta_m")
        gmap[int(key)] = ParamDelta(uav, param, delta=delta)

    # --- command stream -----------------------------------------------------
    commands: list[Command] = []
    for i, op in enumerate(raw.get("operator_script", [])):
        where = f"operator_script[{i}]"
        param = _req(op, "param", where)
        if param not in ("beta", "gamma", "distance"):
            raise ScenarioError(f"{where}.param must be beta, gamma or distance")
        uav = _req(op, "uav", where)
        if uav not in names and uav != "all":
            raise ScenarioError(f"{where}.uav {uav!r} is not in the roster")
        if ("delta" in op) == ("absolute" in op):
            raise ScenarioError(f"{where} needs exactly one of delta/absolute")
        commands.append(
            Command(
                t=float(_req(op, "t", where)),
                kind="operator_request",
                uav=uav,
                param=param,
                delta=_from_user_units(param, float(op["delta"])) if "delta" in op else None,
                absolute=_from_user_units(param, float(op["absolute"])) if "absolute" in op else None,
            )
        )
    # Scripted worker gestures become replayable on/off command edges so the
    # run and replay paths share one ground-truth source.
    for g in script.gestures:
        commands.append(Command(t=g.t_start, kind="gesture_on", gesture_id=g.id))
        commands.append(Command(t=g.t_end, kind="gesture_off"))
    commands.sort(key=lambda c: (c.t, c.kind))

    return Scenario(
        name=name,
        seed=seed,
        duration=duration,
        tick_dt=tick_dt,
        replan_period=replan_period,
        grid=grid,
        obstacle_cells=obstacle_cells,
        uavs=uavs,
        human_script=HumanMotionScript(wps, []),
        sensors=sensors,
        detector=detector,
        detector_period=detector_period,
        gesture_filter=gesture_filter,
        gesture_map=gmap,
        process_noise=process_noise,
        measurement_noise=measurement_noise,
        limits=limits,
        param_limits=param_limits,
        horizon=horizon,
        separation=separation,
        heading_policy=heading_policy,
        heading_value=heading_value,
        followers_sense=bool(s.get("followers_sense", False)),
        commands=commands,
        obstacles=[dict(o) for o in world.get("obstacles", [])],
        bounds_min=lo,
        bounds_max=hi,
    )


def bundled_scenario_path(name: str = "powerline") -> Path:
    """Filesystem path of a scenario shipped with the package."""
    ref = resources.files("formsim.data") / f"{name}.scenario.json"
    return Path(str(ref))
