"""Operator console service.

Exposes the runtime over a websocket speaking newline-free JSON frames:
`state` snapshots flow out at a third of the control rate, and `target`,
`mode`, and `gain` commands flow in. The simulation itself is the bin-packing
loop; in manual mode incoming palm/PCA targets replace the state-machine
output on the next control tick.
"""

from __future__ import annotations

import asyncio
import json
import time
from dataclasses import dataclass, field

import numpy as np
from fastapi import FastAPI, WebSocket, WebSocketDisconnect

from . import fabric as fb
from .geometry import quat_from_rotation
from .runtime import BinPackState, TraceRecord, metrics_from_log, \
    reference_binpack_config, state_machine_step
from .toysim import ScriptedGrasp

GAIN_NAMES = ("damping", "pd_velocity_scale")
MODE_VALUES = ("policy", "manual")


@dataclass
class ServeConfig:
    host: str = "127.0.0.1"
    port: int = 8732
    control_rate: float = 60.0
    state_every: int = 3  # state frame every Nth control tick (60/3 = 20 Hz)
    wall_clock: bool = True
    adr_fraction: float = 0.0
    attempt_timeout: float = 15.0
    seed: int = 0


class RuntimeSession:
    """Owns one simulated robot and the command state for one console.

    All methods are synchronous and deterministic; the transport layer
    decides pacing.
    """

    def __init__(self, model, basis, fabric_cfg, env, adr_sample: dict | None = None,
                 config: ServeConfig | None = None):
        self.model = model
        self.basis = basis
        self.env = env
        self.config = config or ServeConfig()
        self.adr_sample = adr_sample or {}
        self.fabric_cfg = fabric_cfg
        if "fabric_damping_gain" in self.adr_sample:
            self.fabric_cfg = fb.set_runtime_gain(
                self.fabric_cfg, "damping", self.adr_sample["fabric_damping_gain"])

        self.rest_z = env.params.table_height + env.params.spawn_center[2]
        probe = ScriptedGrasp(model, basis, env.episode.goal, rest_z=self.rest_z)
        self.binpack_cfg = reference_binpack_config(probe.curl_pca, probe.open_pca)

        self.tick = 0
        self.mode = "policy"
        self.manual_target: fb.FabricTargets | None = None
        self.trace: list[TraceRecord] = []
        self.attempt_log: list[tuple[bool, float, float]] = []
        self._object_index = 0
        self._begin_attempt()

    # -- simulation -------------------------------------------------------------

    def _begin_attempt(self) -> None:
        seed = self.config.seed + self._object_index
        state = self.env.reset(self.adr_sample, seed)
        if self._object_index == 0:
            self.fstate = fb.FabricState(state.q.copy(), np.zeros(self.model.dof),
                                         np.zeros(self.model.dof))
        else:
            state.q = self.fstate.q.copy()
            state.v = self.fstate.v.copy()
        self.state = state
        self.policy = ScriptedGrasp(self.model, self.basis, self.env.episode.goal,
                                    rest_z=self.rest_z)
        self.obs_rng = np.random.default_rng(seed + 7919)
        self.sm = BinPackState()
        self._attempt_start = self.now
        self._object_index += 1

    @property
    def now(self) -> float:
        return self.tick / self.config.control_rate

    def step(self) -> None:
        env = self.env
        obs = env.observe(self.state, self.adr_sample, self.obs_rng, "actor")
        action = self.policy(obs, self.state.obj.grasped)
        predicted = self.policy.predicted_object
        if self.binpack_cfg.use_prediction is False:
            predicted = self.state.obj.position
        fk = self.model.fk(self.fstate.q)
        palm_pos = fk.frame_transform("palm").pos
        prev_mode = self.sm.mode

        if self.mode == "manual":
            targets = self.manual_target if self.manual_target is not None else action
            if self.manual_target is not None:
                self.trace.append(TraceRecord(
                    tick=int(self.now * 1e6), node="fabric", kind="target",
                    payload={"source": "manual"}))
        else:
            self.sm, targets = state_machine_step(
                self.sm, self.binpack_cfg, predicted, action, palm_pos, self.now)
            if self.sm.mode != prev_mode:
                self.trace.append(TraceRecord(
                    tick=int(self.now * 1e6), node="state_machine", kind="mode",
                    payload={"mode": self.sm.mode}))

        self.fstate, pd = fb.step(self.model, self.fabric_cfg, self.fstate, targets)
        self.state.fabric_q = self.fstate.q
        self.state.fabric_qd = self.fstate.v
        self.state.fabric_acc = self.fstate.a_prev
        env.step_env(self.state, pd, env.dt)
        self.tick += 1

        if self.mode == "policy":
            returned = prev_mode == "ReturnHome" and self.sm.mode == "PolicyActive"
            timed_out = self.now - self._attempt_start >= self.config.attempt_timeout
            if returned or timed_out:
                landed = np.linalg.norm(
                    self.state.obj.position[:2] - self.binpack_cfg.bin_drop_zone[:2]
                ) <= self.binpack_cfg.bin_radius
                success = returned and landed and not self.state.obj.grasped
                self.attempt_log.append((success, self._attempt_start, self.now))
                self._begin_attempt()

    # -- wire frames -------------------------------------------------------------

    def state_frame(self) -> dict:
        fk = self.model.fk(self.state.q)
        palm = fk.frame_transform("palm")
        if self.attempt_log:
            m = metrics_from_log(self.attempt_log)
            metrics = {"cs_mean": m.cs_mean, "ct_mean": m.ct_mean, "sr": m.sr}
        else:
            metrics = {"cs_mean": 0.0, "ct_mean": 0.0, "sr": 0.0}
        predicted = self.policy.predicted_object
        if predicted is None:
            predicted = self.state.obj.position
        return {
            "type": "state",
            "tick": self.tick,
            "q": [float(x) for x in self.state.q],
            "palm_pose": [float(x) for x in np.concatenate(
                [palm.pos, quat_from_rotation(palm.rot)])],
            "obj_pos": [float(x) for x in self.state.obj.position],
            "obj_pred": [float(x) for x in predicted],
            "grasped": bool(self.state.obj.grasped),
            "sm_mode": self.sm.mode,
            "metrics": metrics,
            "adr_fraction": float(self.config.adr_fraction),
        }

    def handle_frame(self, text: str) -> dict | None:
        try:
            doc = json.loads(text)
        except json.JSONDecodeError:
            return {"type": "error", "message": "frame is not valid JSON"}
        if not isinstance(doc, dict):
            return {"type": "error", "message": "frame must be a JSON object"}
        kind = doc.get("type")
        if kind == "target":
            return self._handle_target(doc)
        if kind == "mode":
            return self._handle_mode(doc)
        if kind == "gain":
            return self._handle_gain(doc)
        return {"type": "error", "message": f"unknown frame type {kind!r}",
                "field": "type"}

    @staticmethod
    def _vector(doc: dict, name: str, n: int):
        value = doc.get(name)
        if (not isinstance(value, list) or len(value) != n
                or not all(isinstance(x, (int, float)) for x in value)):
            return None
        return np.asarray(value, dtype=float)

    def _handle_target(self, doc: dict) -> dict | None:
        palm = self._vector(doc, "palm", 6)
        if palm is None:
            return {"type": "error", "message": "target frame needs palm[6]",
                    "field": "palm"}
        pca = self._vector(doc, "pca", 5)
        if pca is None:
            return {"type": "error", "message": "target frame needs pca[5]",
                    "field": "pca"}
        if self.mode != "manual":
            return {"type": "error",
                    "message": "targets are only accepted in manual mode",
                    "field": "type"}
        self.manual_target = fb.FabricTargets(palm_pose=palm, pca=pca)
        return None

    def _handle_mode(self, doc: dict) -> dict | None:
        value = doc.get("value")
        if value not in MODE_VALUES:
            return {"type": "error",
                    "message": f"mode must be one of {MODE_VALUES}",
                    "field": "value"}
        self.mode = value
        if value == "policy":
            self.manual_target = None
        return None

    def _handle_gain(self, doc: dict) -> dict | None:
        name = doc.get("name")
        if name not in GAIN_NAMES:
            return {"type": "error",
                    "message": f"gain name must be one of {GAIN_NAMES}",
                    "field": "name"}
        value = doc.get("value")
        if not isinstance(value, (int, float)):
            return {"type": "error", "message": "gain value must be a number",
                    "field": "value"}
        try:
            self.fabric_cfg = fb.set_runtime_gain(self.fabric_cfg, name, float(value))
        except ValueError as e:
            return {"type": "error", "message": str(e), "field": "value"}
        return None


def build_app(session: RuntimeSession):
    """FastAPI app around one session; separate from serve_console so tests
    can drive it through a test client without binding a port."""
    app = FastAPI()
    app.state.session = session

    @app.websocket("/ws")
    async def ws_endpoint(websocket: WebSocket):
        await websocket.accept()
        cfg = session.config
        send_lock = asyncio.Lock()

        async def pump():
            period = 1.0 / cfg.control_rate
            next_t = time.monotonic()
            while True:
                session.step()
                if session.tick % cfg.state_every == 0:
                    async with send_lock:
                        await websocket.send_text(json.dumps(session.state_frame()))
                if cfg.wall_clock:
                    next_t += period
                    await asyncio.sleep(max(0.0, next_t - time.monotonic()))
                else:
                    await asyncio.sleep(0)

        task = asyncio.create_task(pump())
        try:
            while True:
                text = await websocket.receive_text()
                reply = session.handle_frame(text)
                if reply is not None:
                    async with send_lock:
                        await websocket.send_text(json.dumps(reply))
        except WebSocketDisconnect:
            pass
        finally:
            task.cancel()

    return app


def serve_console(session: RuntimeSession):
    """Run the console service until interrupted (blocking)."""
    import uvicorn

    app = build_app(session)
    uvicorn.run(app, host=session.config.host, port=session.config.port,
                log_level="warning")
