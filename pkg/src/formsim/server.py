"""Live simulation service: telemetry out, worker/operator commands in.

One controller session may inject commands; any number of observers can
watch. The simulation loop is the single writer; client frames are
validated on the network task and queued into the loop between ticks, so
the closed loop never races its inputs.
"""

from __future__ import annotations

import asyncio
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path

from websockets.asyncio.server import serve as ws_serve

from . import protocol
from .protocol import ProtocolError
from .runtime import MissionLoop, RunSummary, _write_outputs
from .scenario import Scenario, load_scenario

log = logging.getLogger("formsim.server")


@dataclass
class LiveSession:
    """Shared state between the stepping task and the client handlers."""

    loop: MissionLoop
    rtf: float = 1.0
    telemetry_every: int = 1
    clients: dict = field(default_factory=dict)  # websocket -> role
    controller: object | None = None
    finished: asyncio.Event = field(default_factory=asyncio.Event)
    _events_sent: int = 0

    async def broadcast(self, frame: dict) -> None:
        if not self.clients:
            return
        payload = protocol.encode(frame)
        stale = []
        for ws in list(self.clients):
            try:
                await ws.send(payload)
            except Exception:
                stale.append(ws)
        for ws in stale:
            self.drop(ws)

    def drop(self, ws) -> None:
        self.clients.pop(ws, None)
        if self.controller is ws:
            self.controller = None

    async def pump(self, duration: float | None = None) -> RunSummary:
        """Step the mission in (scaled) real time, broadcasting telemetry."""
        sc = self.loop.scenario
        total = sc.duration if duration is None else duration
        ticks = int(round(total / sc.tick_dt))
        start_wall = time.monotonic()
        start_t = self.loop.t
        for k in range(ticks):
            if self.rtf > 0:
                target = start_wall + (self.loop.t + sc.tick_dt - start_t) / self.rtf
                delay = target - time.monotonic()
                if delay > 0:
                    await asyncio.sleep(delay)
                else:
                    await asyncio.sleep(0)
            else:
                await asyncio.sleep(0)
            self.loop.step()
            for event in self.loop.events[self._events_sent:]:
                await self.broadcast(protocol.confirm_frame(event))
            self._events_sent = len(self.loop.events)
            if k % self.telemetry_every == 0:
                await self.broadcast(protocol.delta_frame(self.loop))
        summary = self.loop.summary()
        await self.broadcast(protocol.end_frame(self.loop))
        self.finished.set()
        return summary

    async def handle(self, ws) -> None:
        """Per-connection protocol: hello, snapshot, then duplex frames."""
        role = None
        try:
            raw = await ws.recv()
            try:
                hello = protocol.parse_client_frame(raw)
                if hello["type"] != "hello":
                    raise ProtocolError("first frame must be hello")
            except ProtocolError as e:
                await ws.send(protocol.encode(protocol.error_frame(str(e))))
                return
            role = hello["role"]
            if role == protocol.ROLE_CONTROLLER:
                if self.controller is not None:
                    await ws.send(
                        protocol.encode(
                            protocol.error_frame("controller already connected; rejoin as observer")
                        )
                    )
                    role = protocol.ROLE_OBSERVER
                else:
                    self.controller = ws
            self.clients[ws] = role
            await ws.send(protocol.encode(protocol.hello_frame(self.loop, role)))
            await ws.send(protocol.encode(protocol.snapshot_frame(self.loop)))

            async for raw in ws:
                try:
                    frame = protocol.parse_client_frame(raw)
                    if frame["type"] == "hello":
                        raise ProtocolError("hello already exchanged")
                    if self.clients.get(ws) != protocol.ROLE_CONTROLLER:
                        raise ProtocolError("only the controller can send commands")
                    self.loop.inject(protocol.command_from_frame(frame))
                except ProtocolError as e:
                    await ws.send(protocol.encode(protocol.error_frame(str(e))))
        finally:
            self.drop(ws)


async def serve_async(
    scenario: Scenario | str | Path,
    host: str = "127.0.0.1",
    port: int = 8765,
    rtf: float = 1.0,
    seed: int | None = None,
    duration: float | None = None,
    out_dir: str | Path | None = None,
    ready: asyncio.Event | None = None,
) -> RunSummary:
    """Run one live mission on a WebSocket endpoint until it completes."""
    if not isinstance(scenario, Scenario):
        scenario = load_scenario(scenario)
    session = LiveSession(MissionLoop(scenario, seed=seed), rtf=rtf)
    async with ws_serve(session.handle, host, port, max_queue=64):
        log.info("serving %s on ws://%s:%d (rtf=%s)", scenario.name, host, port, rtf)
        if ready is not None:
            ready.set()
        summary = await session.pump(duration)
    if out_dir is not None:
        _write_outputs(session.loop, summary, out_dir)
    return summary


def serve(
    scenario: Scenario | str | Path,
    host: str = "127.0.0.1",
    port: int = 8765,
    rtf: float = 1.0,
    seed: int | None = None,
    duration: float | None = None,
    out_dir: str | Path | None = None,
) -> RunSummary:
    """Blocking wrapper around serve_async."""
    return asyncio.run(
        serve_async(scenario, host=host, port=port, rtf=rtf, seed=seed,
                    duration=duration, out_dir=out_dir)
    )
