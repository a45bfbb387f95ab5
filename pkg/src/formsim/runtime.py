"""Closed mission loop: sense, estimate, filter, reference, plan, step.

The loop is single-writer and fully deterministic for a given (scenario,
seed): scripted operator requests and worker gesture edges flow through
the same command queue live sessions use, so a recorded command log can
be replayed to reproduce a run's metrics stream byte for byte.
"""

from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.spatial import cKDTree

from .estimator import DistanceSources, HumanTracker, apparent_distance, stereo_distance
from .formation import (
    follower_reference,
    horizon_references,
    leader_reference,
    predict_human_trajectory,
)
from .geometry import FormationParams, UavState, azimuth_of, elevation_of, wrap_angle
from .gestures import GestureFilter, apply_operator_request, emulate_detection, map_gesture
from .planner import PlannedTrajectory, replan
from .scenario import Command, Scenario, load_scenario
from .world import SensorBundle, World

CSV_HEADER = (
    "t,uav_id,d_t,d_o,d_m_min,beta_ref_deg,beta_act_deg,"
    "gamma_ref_deg,gamma_act_deg,g_gt,g_d,g_f,f_d,est_err_m"
)

SOURCE_WORKER = "WORKER_GESTURE"
SOURCE_OPERATOR = "OPERATOR"


@dataclass
class CommandEvent:
    """A confirmed or applied command, as surfaced to logs and telemetry."""

    t: float
    source: str
    payload: dict
    status: str = "applied"

    def to_json(self) -> dict:
        return {"t": self.t, "source": self.source, "status": self.status, **self.payload}


@dataclass
class RunSummary:
    scenario: str
    seed: int
    duration: float
    ticks: int
    min_d_m: float
    min_d_o: float
    operator_commands: int
    worker_confirmations: int
    gesture_successes: int
    planner_faults: int
    fault_notes: list[str] = field(default_factory=list)

    @property
    def gesture_success_rate(self) -> float | None:
        if self.worker_confirmations == 0:
            return None
        return self.gesture_successes / self.worker_confirmations

    def to_json(self) -> dict:
        def fin(x):
            return x if math.isfinite(x) else None

        return {
            "scenario": self.scenario,
            "seed": self.seed,
            "duration_s": self.duration,
            "ticks": self.ticks,
            "min_mutual_distance_m": fin(self.min_d_m),
            "min_obstacle_distance_m": fin(self.min_d_o),
            "operator_commands": self.operator_commands,
            "worker_confirmations": self.worker_confirmations,
            "gesture_success_rate": self.gesture_success_rate,
            "planner_faults": self.planner_faults,
            "fault_notes": self.fault_notes[:20],
        }


def _fmt(x: float) -> str:
    return f"{x:.6f}"


class MissionLoop:
    """Steps one scenario tick by tick; shared by run, replay and serve."""

    def __init__(self, scenario: Scenario, seed: int | None = None,
                 command_feed: list[Command] | None = None):
        self.scenario = scenario
        self.seed = scenario.seed if seed is None else seed
        ss = np.random.SeedSequence(self.seed)
        world_rng, det_rng = (np.random.default_rng(s) for s in ss.spawn(2))
        self._det_rng = det_rng

        start_states, start_vels = self._initial_states()
        self.world = World(
            script=scenario.human_script,
            uav_states=start_states,
            uav_velocities=start_vels,
            grid=scenario.grid,
            sensors=scenario.sensors,
            limits=scenario.limits,
            rng=world_rng,
        )
        self.tracker = HumanTracker(scenario.process_noise, scenario.measurement_noise)
        self.filter = GestureFilter(scenario.gesture_filter)
        self.params: dict[str, FormationParams] = {
            u.name: u.params.copy() for u in scenario.uavs
        }
        self.plans: dict[str, PlannedTrajectory | None] = {u.name: None for u in scenario.uavs}
        feed = scenario.commands if command_feed is None else command_feed
        self.pending = deque(sorted(feed, key=lambda c: c.t))
        self.t = 0.0
        self._next_detection = scenario.detector_period
        self._next_replan = 0.0
        self.latest_detection_id = -1
        self._obstacle_tree = (
            cKDTree(scenario.obstacle_cells) if len(scenario.obstacle_cells) else None
        )
        self.metrics_rows: list[str] = []
        self.latest_metrics: list[dict] = []
        self.events: list[CommandEvent] = []
        self.applied_commands: list[Command] = []
        self.fault_notes: list[str] = []
        self._min_d_m = math.inf
        self._min_d_o = math.inf
        self._gesture_successes = 0
        self._worker_confirmations = 0
        self._operator_count = 0
        self._planner_faults = 0
        self.ticks = 0

    # -- setup -------------------------------------------------------------

    def _initial_states(self):
        """Start poses: explicit when given, else the formation slots around
        the worker's scripted start pose."""
        sc = self.scenario
        h0 = sc.human_script.state_at(0.0)
        h0.heading = sc.heading_value if sc.heading_policy == "constant" else h0.heading
        leader_ref = leader_reference(h0, sc.leader.params)
        states: dict[str, UavState] = {}
        vels: dict[str, np.ndarray] = {}
        for u in sc.uavs:
            if u.start_p is not None:
                states[u.name] = UavState(u.start_p.copy(), u.start_heading, u.start_pitch)
            elif u.role == "leader":
                states[u.name] = leader_ref.copy()
            else:
                states[u.name] = follower_reference(h0, leader_ref, u.params)
            vels[u.name] = np.zeros(3)
        return states, vels

    # -- command handling ---------------------------------------------------

    def inject(self, command: Command) -> None:
        """Queue a live command; it applies at the next tick boundary.

        The pending queue stays time-ordered so scripted commands still in
        the future never shadow a live one.
        """
        command.t = self.t
        i = 0
        for i, queued in enumerate(self.pending):
            if queued.t > command.t:
                self.pending.insert(i, command)
                return
        self.pending.append(command)

    def _resolve_targets(self, selector: str) -> list[str]:
        if selector == "all":
            return [u.name for u in self.scenario.uavs]
        if selector == "leader":
            return [self.scenario.leader.name]
        return [selector]

    def _apply_command(self, cmd: Command) -> None:
        if cmd.kind == "operator_request":
            delta = cmd.as_param_delta()
            for name in self._resolve_targets(cmd.uav):
                self.params[name] = apply_operator_request(
                    self.params[name], delta, self.scenario.param_limits
                )
            self._operator_count += 1
            self.events.append(
                CommandEvent(self.t, SOURCE_OPERATOR, cmd.to_json(), status="applied")
            )
        elif cmd.kind == "gesture_on":
            self.world.gesture_override = cmd.gesture_id
        elif cmd.kind == "gesture_off":
            self.world.gesture_override = None
        else:
            raise ValueError(f"unknown command kind {cmd.kind!r}")
        recorded = Command(**{**cmd.__dict__, "t": self.t})
        self.applied_commands.append(recorded)

    def _drain_commands(self) -> None:
        while self.pending and self.pending[0].t <= self.t + 1e-9:
            self._apply_command(self.pending.popleft())

    # -- planning -------------------------------------------------------------

    def _replan_all(self) -> None:
        sc = self.scenario
        est = self.tracker.estimate
        if est is None:
            for name in self.plans:
                self.plans[name] = None
            return
        pred = predict_human_trajectory(
            est, sc.horizon, sc.heading_policy, sc.heading_value, t0=self.t
        )
        look_at = np.stack([h.p for h in pred])
        leader = sc.leader.name
        leader_params = {leader: self.params[leader]}
        leader_ref = horizon_references(pred, leader_params, leader, self.t, sc.horizon.dt)[leader]
        teammates = [p for n, p in self.plans.items() if n != leader and p is not None]
        plan, notes = replan(
            self.world.uav_states[leader],
            self.world.uav_velocities[leader],
            leader_ref,
            sc.grid,
            teammates,
            sc.separation,
            sc.limits,
            look_at,
        )
        self.plans[leader] = plan
        self._note_faults(leader, notes)

        refs = horizon_references(
            pred, self.params, leader, self.t, sc.horizon.dt, leader_plan=plan
        )
        for u in sc.followers:
            teammates = [p for n, p in self.plans.items() if n != u.name and p is not None]
            plan_i, notes = replan(
                self.world.uav_states[u.name],
                self.world.uav_velocities[u.name],
                refs[u.name],
                sc.grid,
                teammates,
                sc.separation,
                sc.limits,
                look_at,
            )
            self.plans[u.name] = plan_i
            self._note_faults(u.name, notes)

    def _note_faults(self, name: str, notes: list[str]) -> None:
        for note in notes:
            self._planner_faults += 1
            if len(self.fault_notes) < 100:
                self.fault_notes.append(f"t={self.t:.1f} {name}: {note}")

    # -- gesture pipeline ------------------------------------------------------

    def _gesture_tick(self) -> None:
        sc = self.scenario
        det = None
        if self.t + 1e-9 >= self._next_detection:
            self._next_detection += sc.detector_period
            det = emulate_detection(
                self.world.active_gesture(), self.t, sc.detector, self._det_rng
            )
            if det is not None:
                self.latest_detection_id = det.id
        confirmed = self.filter.update(det, self.t)
        if confirmed is None:
            return
        delta = map_gesture(confirmed, sc.gesture_map)
        success = self.world.active_gesture() == confirmed
        self._worker_confirmations += 1
        if success:
            self._gesture_successes += 1
        payload = {"gesture_id": confirmed, "executed_while_performed": success}
        if delta is None:
            payload["note"] = "gesture not mapped; no parameter change"
        else:
            for name in self._resolve_targets(delta.uav):
                self.params[name] = apply_operator_request(
                    self.params[name], delta, sc.param_limits
                )
            payload["uav"] = delta.uav
            payload["param"] = delta.param
            payload["delta"] = delta.delta
        self.events.append(CommandEvent(self.t, SOURCE_WORKER, payload, status="confirmed"))

    # -- metrics -----------------------------------------------------------------

    def _reference_human_heading(self) -> float:
        sc = self.scenario
        if sc.heading_policy == "constant":
            return sc.heading_value
        est = self.tracker.estimate
        if est is None:
            return sc.heading_value
        v = est.velocity
        if math.hypot(v[0], v[1]) <= 1e-3:
            return sc.heading_value
        return math.atan2(v[1], v[0])

    def metrics_sample(self) -> list[dict]:
        """Per-vehicle metric records for the current instant."""
        sc = self.scenario
        human_p = self.world.human.p
        est = self.tracker.estimate
        est_err = math.nan if est is None else float(np.linalg.norm(est.position - human_p))
        g_gt = self.world.active_gesture()
        g_f, f_d = self.filter.dominant()
        phi_h = self._reference_human_heading()
        leader = sc.leader.name
        leader_state = self.world.uav_states[leader]

        positions = {n: s.p for n, s in self.world.uav_states.items()}
        records = []
        for u in sc.uavs:
            p = positions[u.name]
            offs = human_p - p
            d_t = float(np.linalg.norm(offs))
            if self._obstacle_tree is not None:
                d_o = float(self._obstacle_tree.query(p)[0])
            else:
                d_o = math.inf
            others = [np.linalg.norm(p - q) for n, q in positions.items() if n != u.name]
            d_m = float(min(others)) if others else math.inf
            prm = self.params[u.name]
            if d_t > 1e-9:
                if u.role == "leader":
                    beta_act = wrap_angle(phi_h - azimuth_of(offs))
                    gamma_act = -elevation_of(offs)
                else:
                    beta_act = wrap_angle(leader_state.heading - azimuth_of(offs))
                    gamma_act = leader_state.pitch - elevation_of(offs)
            else:
                beta_act = 0.0
                gamma_act = 0.0
            self._min_d_m = min(self._min_d_m, d_m)
            self._min_d_o = min(self._min_d_o, d_o)
            records.append(
                {
                    "t": self.t,
                    "uav_id": u.name,
                    "d_t": d_t,
                    "d_o": d_o,
                    "d_m_min": d_m,
                    "beta_ref_deg": math.degrees(prm.beta),
                    "beta_act_deg": math.degrees(beta_act),
                    "gamma_ref_deg": math.degrees(prm.gamma),
                    "gamma_act_deg": math.degrees(gamma_act),
                    "g_gt": g_gt,
                    "g_d": self.latest_detection_id,
                    "g_f": g_f,
                    "f_d": f_d,
                    "est_err_m": est_err,
                }
            )
        return records

    @staticmethod
    def metrics_row_csv(rec: dict) -> str:
        return ",".join(
            [
                f"{rec['t']:.3f}",
                rec["uav_id"],
                _fmt(rec["d_t"]),
                _fmt(rec["d_o"]),
                _fmt(rec["d_m_min"]),
                _fmt(rec["beta_ref_deg"]),
                _fmt(rec["beta_act_deg"]),
                _fmt(rec["gamma_ref_deg"]),
                _fmt(rec["gamma_act_deg"]),
                str(rec["g_gt"]),
                str(rec["g_d"]),
                str(rec["g_f"]),
                _fmt(rec["f_d"]),
                _fmt(rec["est_err_m"]),
            ]
        )

    # -- loop ---------------------------------------------------------------------

    def _sources_from(self, bundle: SensorBundle) -> DistanceSources:
        sc = self.scenario
        stereo = stereo_distance(bundle.stereo) if bundle.stereo is not None else None
        apparent = None
        if bundle.bbox is not None and bundle.bbox.height > 0:
            apparent = apparent_distance(
                bundle.bbox.height, sc.sensors.human_height_m, sc.sensors.intrinsics.focal
            )
        return DistanceSources(
            uwb=bundle.uwb,
            stereo=stereo if stereo is not None and stereo > 0 else None,
            apparent=apparent,
        )

    def step(self) -> None:
        """Advance the mission by one tick."""
        sc = self.scenario
        self._drain_commands()
        if self.t + 1e-9 >= self._next_replan:
            self._replan_all()
            self._next_replan += sc.replan_period
        self.world.step(self.plans, sc.tick_dt)
        self.t = self.world.t

        sensing = [sc.leader.name]
        if sc.followers_sense:
            sensing.extend(u.name for u in sc.followers)
        first = True
        for name in sensing:
            cam = self.world.camera_of(name)
            bundle = self.world.sense_from(name)
            sources = self._sources_from(bundle)
            if first:
                self.tracker.tick(sc.tick_dt, bundle.bbox, cam, sources)
                first = False
            else:
                self.tracker.observe(bundle.bbox, cam, sources)

        self._gesture_tick()
        self.latest_metrics = self.metrics_sample()
        self.metrics_rows.extend(self.metrics_row_csv(r) for r in self.latest_metrics)
        self.ticks += 1

    def run_to_end(self, duration: float | None = None) -> RunSummary:
        total = self.scenario.duration if duration is None else duration
        n = int(round(total / self.scenario.tick_dt))
        for _ in range(n):
            self.step()
        return self.summary()

    def summary(self) -> RunSummary:
        return RunSummary(
            scenario=self.scenario.name,
            seed=self.seed,
            duration=self.t,
            ticks=self.ticks,
            min_d_m=self._min_d_m,
            min_d_o=self._min_d_o,
            operator_commands=self._operator_count,
            worker_confirmations=self._worker_confirmations,
            gesture_successes=self._gesture_successes,
            planner_faults=self._planner_faults,
            fault_notes=self.fault_notes,
        )

    def metrics_csv(self) -> str:
        return "\n".join([CSV_HEADER, *self.metrics_rows]) + "\n"


def _write_outputs(loop: MissionLoop, summary: RunSummary, out_dir: str | Path) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "metrics.csv").write_text(loop.metrics_csv())
    (out / "events.json").write_text(
        json.dumps([e.to_json() for e in loop.events], indent=2) + "\n"
    )
    (out / "commands.json").write_text(
        json.dumps([c.to_json() for c in loop.applied_commands], indent=2) + "\n"
    )
    (out / "summary.json").write_text(json.dumps(summary.to_json(), indent=2) + "\n")


def run(
    scenario: Scenario | str | Path,
    seed: int | None = None,
    duration: float | None = None,
    out_dir: str | Path | None = None,
) -> tuple[RunSummary, MissionLoop]:
    """Execute a scenario offline and optionally write its artifacts."""
    if not isinstance(scenario, Scenario):
        scenario = load_scenario(scenario)
    loop = MissionLoop(scenario, seed=seed)
    summary = loop.run_to_end(duration)
    if out_dir is not None:
        _write_outputs(loop, summary, out_dir)
    return summary, loop


def replay(
    scenario: Scenario | str | Path,
    commands_path: str | Path,
    seed: int | None = None,
    duration: float | None = None,
    out_dir: str | Path | None = None,
) -> tuple[RunSummary, MissionLoop]:
    """Re-execute a scenario against a recorded command log.

    The recorded commands replace the scenario's scripted ones and flow
    through the same queue a live session uses, which reproduces the
    original metrics stream exactly for the same seed.
    """
    if not isinstance(scenario, Scenario):
        scenario = load_scenario(scenario)
    with open(commands_path) as f:
        feed = [Command.from_json(obj) for obj in json.load(f)]
    loop = MissionLoop(scenario, seed=seed, command_feed=feed)
    summary = loop.run_to_end(duration)
    if out_dir is not None:
        _write_outputs(loop, summary, out_dir)
    return summary, loop
