"""Operator-facing streaming service.

One session runs inside an asyncio loop; subscribers receive a JSON message
stream over WebSocket (current map slice on subscribe, state at the
estimator rate, plans as they are published) and at most one connection
holds operator rights to issue commands.  Every command is answered by
exactly one ACK or ERROR carrying the command id.
"""

from __future__ import annotations

import asyncio
import json
import logging
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np
import websockets

from .maps import encode_map_slice
from .scenario import Injection, SessionRunner, SubjectMode

log = logging.getLogger(__name__)

PROTOCOL_VERSION = 1


class SessionMode(Enum):
    IDLE = "IDLE"
    RUNNING = "RUNNING"
    PAUSED = "PAUSED"
    FAULTED = "FAULTED"


class CommandError(Exception):
    def __init__(self, code: str, message: str):
        super().__init__(message)
        self.code = code


@dataclass
class Subscriber:
    socket: object
    seq: int = 0
    operator: bool = False
    queue: asyncio.Queue = field(default_factory=lambda: asyncio.Queue(maxsize=512))


class ScenarioService:
    """Session owner: steps the runner, fans out messages, takes commands."""

    def __init__(self, runner: SessionRunner, host: str = "127.0.0.1",
                 port: int = 8787, live: bool = False,
                 ticks_per_yield: int = 10):
        self.runner = runner
        runner.listener = self._on_runner_event
        self.host = host
        self.port = port
        self.live = live
        self.ticks_per_yield = ticks_per_yield
        self.mode = SessionMode.IDLE
        self.subscribers: list[Subscriber] = []
        self._operator_taken = False
        self._latest_map_payload: dict | None = None
        self._latest_plan_payload: dict | None = None
        self._server = None
        self._runner_task = None
        self.bound_port: int | None = None

    # -- fan-out ---------------------------------------------------------------

    def _on_runner_event(self, kind: str, payload: dict) -> None:
        if kind == "map":
            payload = encode_map_slice(payload["map"])
            self._latest_map_payload = payload
            self._broadcast("MAP_SLICE", payload)
        elif kind == "state":
            payload = dict(payload)
            payload["mode"] = self.mode.value
            self._broadcast("STATE", payload)
        elif kind == "plan":
            self._latest_plan_payload = payload
            self._broadcast("PLAN", payload)
        elif kind == "estimate":
            self._broadcast("ESTIMATE", payload)
        elif kind == "metric":
            self._broadcast("METRIC", payload)
        elif kind == "fault":
            self.mode = SessionMode.FAULTED
            self._broadcast("ERROR", {"code": "FAULT", "message": payload["message"]})

    def _message(self, sub: Subscriber, msg_type: str, payload: dict) -> dict:
        sub.seq += 1
        return {
            "type": msg_type,
            "seq": sub.seq,
            "t": self.runner.now,
            "payload": payload,
        }

    def _broadcast(self, msg_type: str, payload: dict) -> None:
        for sub in self.subscribers:
            try:
                sub.queue.put_nowait((msg_type, payload))
            except asyncio.QueueFull:
                log.warning("subscriber queue overflow; dropping message")

    # -- commands ----------------------------------------------------------------

    def _apply_command(self, command: dict) -> dict:
        action = command.get("action")
        if self.mode == SessionMode.FAULTED:
            raise CommandError("BAD_STATE", "session faulted")
        if action == "RESUME":
            if self.mode != SessionMode.PAUSED:
                raise CommandError("BAD_STATE", "session is not paused")
            self.mode = SessionMode.RUNNING
            self.runner.set_paused(False)
            return {"mode": self.mode.value}
        if self.mode != SessionMode.RUNNING:
            raise CommandError("BAD_STATE", f"session is {self.mode.value}")

        if action == "PAUSE":
            self.mode = SessionMode.PAUSED
            self.runner.set_paused(True)
            return {"mode": self.mode.value}
        if action == "SET_GOAL":
            try:
                pe = float(command["pe"])
                se = float(command["se"])
            except (KeyError, TypeError, ValueError):
                raise CommandError("BAD_COMMAND", "SET_GOAL needs pe and se")
            bounds = self.runner.model.bounds
            if not (bounds.pe[0] <= pe <= bounds.pe[1]
                    and bounds.se[0] <= se <= bounds.se[1]):
                raise CommandError("OUT_OF_BOUNDS", "goal outside joint bounds")
            target = np.array([pe, se, self.runner.plant.q[2], 0.0, 0.0, 0.0])
            self.runner.set_goal_now(target)
            return {"goal": [pe, se]}
        if action == "INJECT_ACTIVATION":
            kind = command.get("kind", "torque")
            try:
                injection = Injection(
                    time=self.runner.now,
                    duration=float(command.get("duration", 1.0)),
                    kind=kind,
                    magnitude=float(command["magnitude"]),
                    axis=command.get("axis", 2 if kind == "torque" else None),
                    muscle=command.get("muscle"),
                )
            except (KeyError, ValueError) as exc:
                raise CommandError("BAD_COMMAND", str(exc))
            self.runner.inject_now(injection)
            return {"injected": kind}
        if action == "MODE":
            try:
                new_mode = SubjectMode(command["mode"])
            except (KeyError, ValueError):
                raise CommandError("BAD_COMMAND", "MODE needs PASSIVE or ACTIVE")
            self.runner.set_subject_mode(new_mode)
            return {"subject_mode": new_mode.value}
        raise CommandError("BAD_COMMAND", f"unknown action {action!r}")

    # -- connection handling -------------------------------------------------------

    async def _handle(self, socket) -> None:
        sub = Subscriber(socket=socket)
        sender = None
        try:
            async for raw in socket:
                try:
                    msg = json.loads(raw)
                except json.JSONDecodeError:
                    await socket.send(json.dumps(self._message(
                        sub, "ERROR",
                        {"code": "BAD_COMMAND", "message": "invalid JSON"})))
                    continue
                msg_type = msg.get("type")
                if msg_type == "SUBSCRIBE":
                    if msg.get("operator"):
                        if self._operator_taken:
                            await socket.send(json.dumps(self._message(
                                sub, "ERROR",
                                {"code": "OPERATOR_TAKEN",
                                 "message": "another operator is connected"})))
                        else:
                            sub.operator = True
                            self._operator_taken = True
                    if sub not in self.subscribers:
                        self.subscribers.append(sub)
                        sender = asyncio.ensure_future(self._sender(sub))
                    # resync: current map slice, then the latest plan
                    if self._latest_map_payload is not None:
                        await socket.send(json.dumps(self._message(
                            sub, "MAP_SLICE", self._latest_map_payload)))
                    if self._latest_plan_payload is not None:
                        await socket.send(json.dumps(self._message(
                            sub, "PLAN", self._latest_plan_payload)))
                    await socket.send(json.dumps(self._message(
                        sub, "ACK", {"subscribed": True,
                                     "operator": sub.operator,
                                     "protocol": PROTOCOL_VERSION,
                                     "mode": self.mode.value})))
                elif msg_type == "COMMAND":
                    command_id = msg.get("id")
                    if not sub.operator:
                        await socket.send(json.dumps(self._message(
                            sub, "ERROR",
                            {"code": "NOT_OPERATOR", "id": command_id,
                             "message": "connection lacks operator rights"})))
                        continue
                    try:
                        result = self._apply_command(msg.get("command", {}))
                        await socket.send(json.dumps(self._message(
                            sub, "ACK", {"id": command_id, **result})))
                    except CommandError as exc:
                        await socket.send(json.dumps(self._message(
                            sub, "ERROR",
                            {"code": exc.code, "id": command_id,
                             "message": str(exc)})))
                else:
                    await socket.send(json.dumps(self._message(
                        sub, "ERROR",
                        {"code": "BAD_COMMAND",
                         "message": f"unknown type {msg_type!r}"})))
        except websockets.ConnectionClosed:
            pass
        finally:
            if sub in self.subscribers:
                self.subscribers.remove(sub)
            if sub.operator:
                self._operator_taken = False
            if sender:
                sender.cancel()

    async def _sender(self, sub: Subscriber) -> None:
        try:
            while True:
                msg_type, payload = await sub.queue.get()
                await sub.socket.send(json.dumps(self._message(sub, msg_type, payload)))
        except (websockets.ConnectionClosed, asyncio.CancelledError):
            pass

    # -- session loop -----------------------------------------------------------

    async def _run_session(self) -> None:
        self.mode = SessionMode.RUNNING
        dt = self.runner.dt
        next_wall = asyncio.get_event_loop().time()
        alive = True
        while alive:
            if self.mode == SessionMode.PAUSED:
                # plant frozen; state messages keep flowing with the flag
                self.runner.listener("state", self._paused_state_payload())
                await asyncio.sleep(0.05 if self.live else 0)
                continue
            for _ in range(self.ticks_per_yield):
                alive = self.runner.step_once()
                if not alive or self.mode == SessionMode.PAUSED:
                    break
            if self.live:
                next_wall += dt * self.ticks_per_yield
                delay = next_wall - asyncio.get_event_loop().time()
                await asyncio.sleep(max(delay, 0.0))
            else:
                await asyncio.sleep(0)
        if self.mode != SessionMode.FAULTED:
            self.mode = SessionMode.IDLE
        self.runner.finish()

    def _paused_state_payload(self) -> dict:
        q = self.runner._estimate.q if self.runner._estimate is not None \
            else self.runner.plant.q
        return {
            "t": self.runner.now,
            "q": [float(v) for v in q],
            "q_ref": [float(v) for v in q],
            "wrench": [float(v) for v in self.runner._wrench],
            "sigma": 0.0,
            "paused": True,
        }

    async def start(self) -> None:
        self._server = await websockets.serve(self._handle, self.host, self.port)
        self.bound_port = self._server.sockets[0].getsockname()[1]
        self._runner_task = asyncio.ensure_future(self._run_session())
        log.info("serving on ws://%s:%d", self.host, self.bound_port)

    async def stop(self) -> None:
        if self._runner_task:
            self._runner_task.cancel()
        if self._server:
            self._server.close()
            await self._server.wait_closed()

    async def wait_done(self) -> None:
        if self._runner_task:
            try:
                await self._runner_task
            except asyncio.CancelledError:
                pass


def serve(runner: SessionRunner, host: str = "127.0.0.1", port: int = 8787,
          live: bool = False) -> None:
    """Blocking entry point used by the CLI."""

    async def main():
        service = ScenarioService(runner, host, port, live)
        await service.start()
        try:
            await service.wait_done()
            await asyncio.Future()  # keep serving after the session ends
        finally:
            await service.stop()

    asyncio.run(main())
