"""Wire protocol of the live telemetry / command service.

Frames are single JSON objects carried one-per-message over a full-duplex
WebSocket channel (the transport provides the length delimiting). Every
frame has a "type"; server-sent frames carry the protocol version in the
hello and snapshot. Angles cross the wire in degrees, distances in
meters, mirroring the scenario file units.

Client -> server:
    hello            {type, protocol, role: controller|observer}
    gesture_inject   {type, id, on}
    operator_request {type, uav, param, delta | absolute}

Server -> client:
    hello     {type, protocol, role, scenario, tick_dt, t}
    snapshot  {type, protocol, t, world, params, history, config}
    delta     {type, t, world, params, gesture, metrics}
    confirm   {type, t, source, command}
    error     {type, message}
    end       {type, t, summary}
"""

from __future__ import annotations

import json
import math
from typing import Any

from .runtime import CommandEvent, MissionLoop
from .scenario import Command

PROTOCOL_VERSION = 1

ROLE_CONTROLLER = "controller"
ROLE_OBSERVER = "observer"

CLIENT_TYPES = ("hello", "gesture_inject", "operator_request")


class ProtocolError(ValueError):
    """Malformed or inadmissible client frame."""


def encode(frame: dict) -> str:
    return json.dumps(frame, separators=(",", ":"), allow_nan=False)


def decode(payload: str | bytes) -> dict:
    try:
        frame = json.loads(payload)
    except json.JSONDecodeError as e:
        raise ProtocolError(f"frame is not valid JSON: {e}") from e
    if not isinstance(frame, dict) or "type" not in frame:
        raise ProtocolError("frame must be a JSON object with a 'type'")
    return frame


def parse_client_frame(payload: str | bytes) -> dict:
    """Validate a client frame and normalize its fields."""
    frame = decode(payload)
    ftype = frame["type"]
    if ftype == "hello":
        role = frame.get("role", ROLE_OBSERVER)
        if role not in (ROLE_CONTROLLER, ROLE_OBSERVER):
            raise ProtocolError(f"unknown role {role!r}")
        protocol = frame.get("protocol")
        if protocol != PROTOCOL_VERSION:
            raise ProtocolError(
                f"protocol mismatch: server speaks {PROTOCOL_VERSION}, client sent {protocol!r}"
            )
        return {"type": "hello", "role": role}
    if ftype == "gesture_inject":
        try:
            gid = int(frame["id"])
            on = bool(frame["on"])
        except (KeyError, TypeError, ValueError) as e:
            raise ProtocolError("gesture_inject needs integer 'id' and boolean 'on'") from e
        if gid < 0:
            raise ProtocolError("gesture id must be >= 0")
        return {"type": "gesture_inject", "id": gid, "on": on}
    if ftype == "operator_request":
        uav = frame.get("uav")
        param = frame.get("param")
        if not isinstance(uav, str) or param not in ("beta", "gamma", "distance"):
            raise ProtocolError("operator_request needs 'uav' and param beta|gamma|distance")
        has_delta = "delta" in frame
        has_abs = "absolute" in frame
        if has_delta == has_abs:
            raise ProtocolError("operator_request needs exactly one of delta/absolute")
        try:
            value = float(frame["delta"] if has_delta else frame["absolute"])
        except (TypeError, ValueError) as e:
            raise ProtocolError("delta/absolute must be a number") from e
        if not math.isfinite(value):
            raise ProtocolError("delta/absolute must be finite")
        out = {"type": "operator_request", "uav": uav, "param": param}
        out["delta" if has_delta else "absolute"] = value
        return out
    raise ProtocolError(f"unknown client frame type {ftype!r}")


def command_from_frame(frame: dict) -> Command:
    """Translate a validated client frame into a loop command."""
    if frame["type"] == "gesture_inject":
        if frame["on"]:
            return Command(t=0.0, kind="gesture_on", gesture_id=frame["id"])
        return Command(t=0.0, kind="gesture_off")
    if frame["type"] == "operator_request":
        return Command.from_json({"t": 0.0, "kind": "operator_request", **{
            k: frame[k] for k in ("uav", "param", "delta", "absolute") if k in frame
        }})
    raise ProtocolError(f"frame type {frame['type']!r} carries no command")


# --- server frame builders ---------------------------------------------------


def _world_view(loop: MissionLoop) -> dict:
    est = loop.tracker.estimate
    human = loop.world.human
    return {
        "human": {
            "p": [round(float(x), 4) for x in human.p],
            "heading_deg": round(math.degrees(human.heading), 3),
            "gesture": loop.world.active_gesture(),
        },
        "estimate": None
        if est is None
        else {
            "p": [round(float(x), 4) for x in est.position],
            "v": [round(float(x), 4) for x in est.velocity],
        },
        "uavs": [
            {
                "name": name,
                "role": "leader" if name == loop.scenario.leader.name else "follower",
                "p": [round(float(x), 4) for x in state.p],
                "heading_deg": round(math.degrees(state.heading), 3),
                "pitch_deg": round(math.degrees(state.pitch), 3),
            }
            for name, state in loop.world.uav_states.items()
        ],
    }


def _params_view(loop: MissionLoop) -> dict:
    return {
        name: {
            "beta_deg": round(math.degrees(p.beta), 4),
            "gamma_deg": round(math.degrees(p.gamma), 4),
            "distance_m": round(p.distance, 4),
        }
        for name, p in loop.params.items()
    }


def _metrics_view(loop: MissionLoop) -> list[dict]:
    out = []
    for rec in loop.latest_metrics:
        clean: dict[str, Any] = {}
        for k, v in rec.items():
            if isinstance(v, float):
                clean[k] = None if not math.isfinite(v) else round(v, 4)
            else:
                clean[k] = v
        out.append(clean)
    return out


def hello_frame(loop: MissionLoop, role: str) -> dict:
    return {
        "type": "hello",
        "protocol": PROTOCOL_VERSION,
        "role": role,
        "scenario": loop.scenario.name,
        "tick_dt": loop.scenario.tick_dt,
        "t": loop.t,
    }


def snapshot_frame(loop: MissionLoop) -> dict:
    sc = loop.scenario
    g_f, f_d = loop.filter.dominant()
    return {
        "type": "snapshot",
        "protocol": PROTOCOL_VERSION,
        "t": loop.t,
        "world": _world_view(loop),
        "params": _params_view(loop),
        "gesture": {"g_d": loop.latest_detection_id, "g_f": g_f, "f_d": round(f_d, 4)},
        "metrics": _metrics_view(loop),
        "history": [e.to_json() for e in loop.events[-50:]],
        "config": {
            "bounds_min": [float(x) for x in sc.bounds_min],
            "bounds_max": [float(x) for x in sc.bounds_max],
            "obstacles": sc.obstacles,
            "separation_m": sc.separation,
            "uav_names": [u.name for u in sc.uavs],
            "leader": sc.leader.name,
            "gesture_ids": sorted(sc.gesture_map.keys()),
            "duration_s": sc.duration,
        },
    }


def delta_frame(loop: MissionLoop) -> dict:
    g_f, f_d = loop.filter.dominant()
    return {
        "type": "delta",
        "t": loop.t,
        "world": _world_view(loop),
        "params": _params_view(loop),
        "gesture": {"g_d": loop.latest_detection_id, "g_f": g_f, "f_d": round(f_d, 4)},
        "metrics": _metrics_view(loop),
    }


def confirm_frame(event: CommandEvent) -> dict:
    return {"type": "confirm", "t": event.t, "source": event.source,
            "status": event.status, "command": event.payload}


def error_frame(message: str) -> dict:
    return {"type": "error", "message": message}


def end_frame(loop: MissionLoop) -> dict:
    return {"type": "end", "t": loop.t, "summary": loop.summary().to_json()}
