"""Deterministic multi-rate runtime: node scheduler, the pick-and-drop state
machine, transport metrics, and trace records.

The scheduler runs in simulated time. Node k with rate r fires at deadlines
(i+1)/r for every (i+1)/r <= duration, so a run of D seconds fires exactly
floor(D*r) times. Deadlines are exact rationals; ties resolve by the node's
position in the schedule. Nothing reads the wall clock, so two runs of the
same schedule hash identically.
"""

from __future__ import annotations

import hashlib
import heapq
import json
from dataclasses import dataclass, field, replace
from fractions import Fraction
from importlib import resources

import numpy as np
import yaml

from .fabric import FabricTargets


# -- trace records -----------------------------------------------------------


@dataclass(frozen=True)
class TraceRecord:
    tick: int  # microseconds of simulated time
    node: str
    kind: str
    payload: dict

    def to_line(self) -> str:
        doc = {"type": "trace", "tick": self.tick, "node": self.node,
               "kind": self.kind, "payload": self.payload}
        return json.dumps(doc, sort_keys=True, separators=(",", ":"))


def trace_hash(records) -> str:
    h = hashlib.sha256()
    for r in records:
        h.update(r.to_line().encode())
        h.update(b"\n")
    return h.hexdigest()


def write_trace(records, path) -> None:
    with open(path, "w") as f:
        for r in records:
            f.write(r.to_line() + "\n")


# -- scheduler ----------------------------------------------------------------


@dataclass(frozen=True)
class ScheduledNode:
    name: str
    rate: Fraction  # Hz
    callback: object  # called as callback(tick_us, fire_index) -> payload dict or None

    def __post_init__(self):
        if self.rate <= 0:
            raise ValueError(f"node '{self.name}': rate must be > 0")


class NodeSchedule:
    def __init__(self, nodes):
        self.nodes = [
            ScheduledNode(name=n[0], rate=Fraction(n[1]), callback=n[2])
            if not isinstance(n, ScheduledNode) else n
            for n in nodes
        ]
        if not self.nodes:
            raise ValueError("schedule must contain at least one node")
        names = [n.name for n in self.nodes]
        if len(set(names)) != len(names):
            raise ValueError("duplicate node names")


class ScheduleError(RuntimeError):
    """A node callback raised; the message carries the tick context."""


def run_scheduled(schedule: NodeSchedule, duration) -> list[TraceRecord]:
    """Run the schedule for `duration` simulated seconds; returns the trace."""
    duration = Fraction(duration)
    heap = []
    for prio, node in enumerate(schedule.nodes):
        deadline = Fraction(1) / node.rate
        if deadline <= duration:
            heapq.heappush(heap, (deadline, prio, 0))
    trace: list[TraceRecord] = []
    while heap:
        deadline, prio, k = heapq.heappop(heap)
        node = schedule.nodes[prio]
        tick = int(deadline * 1_000_000)
        try:
            payload = node.callback(tick, k)
        except Exception as e:
            raise ScheduleError(
                f"node '{node.name}' failed at tick {tick} us (fire {k}): {e}"
            ) from e
        trace.append(TraceRecord(tick=tick, node=node.name, kind="fire",
                                 payload=payload if isinstance(payload, dict) else {}))
        nxt = Fraction(k + 2) / node.rate
        if nxt <= duration:
            heapq.heappush(heap, (nxt, prio, k + 1))
    return trace


def firing_counts(trace) -> dict[str, int]:
    counts: dict[str, int] = {}
    for r in trace:
        counts[r.node] = counts.get(r.node, 0) + 1
    return counts


# -- bin-packing state machine ---------------------------------------------------


MODES = ("PolicyActive", "LiftToBin", "Deposit", "ReturnHome")


@dataclass(frozen=True)
class BinPackConfig:
    bin_waypoint: np.ndarray  # palm position over the bin [m]
    bin_drop_zone: np.ndarray  # where a deposited object should land [m]
    bin_radius: float  # drop counts as success inside this radius
    ready_pose: np.ndarray  # palm position + rotvec (6,)
    lift_pca: np.ndarray  # hand coordinates holding the object
    open_pca: np.ndarray  # hand coordinates releasing it
    palm_rotvec: np.ndarray
    z_threshold: float  # predicted object height that triggers LiftToBin
    arrival_tolerance: float = 0.10
    deposit_duration: float = 1.5
    use_prediction: bool = True  # False: gate on ground-truth object height


@dataclass(frozen=True)
class BinPackState:
    mode: str = "PolicyActive"
    mode_entry_time: float = 0.0

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown mode '{self.mode}'")


def state_machine_step(sm: BinPackState, cfg: BinPackConfig,
                       predicted_obj: np.ndarray, policy_action: FabricTargets,
                       palm_pos: np.ndarray, now: float):
    """Advance the transport state machine one tick.

    Returns (new state, targets to hand the fabric). Policy actions pass
    through only in PolicyActive; every other mode emits fixed targets.
    """
    palm_pos = np.asarray(palm_pos, dtype=float)
    if sm.mode == "PolicyActive":
        if float(predicted_obj[2]) >= cfg.z_threshold:
            sm = BinPackState(mode="LiftToBin", mode_entry_time=now)
        else:
            return sm, policy_action
    if sm.mode == "LiftToBin":
        if np.linalg.norm(palm_pos - cfg.bin_waypoint) < cfg.arrival_tolerance:
            sm = BinPackState(mode="Deposit", mode_entry_time=now)
        else:
            return sm, FabricTargets(
                palm_pose=np.concatenate([cfg.bin_waypoint, cfg.palm_rotvec]),
                pca=cfg.lift_pca,
            )
    if sm.mode == "Deposit":
        if now - sm.mode_entry_time >= cfg.deposit_duration:
            sm = BinPackState(mode="ReturnHome", mode_entry_time=now)
        else:
            return sm, FabricTargets(
                palm_pose=np.concatenate([cfg.bin_waypoint, cfg.palm_rotvec]),
                pca=cfg.open_pca,
            )
    # ReturnHome
    if np.linalg.norm(palm_pos - cfg.ready_pose[:3]) < cfg.arrival_tolerance:
        return BinPackState(mode="PolicyActive", mode_entry_time=now), policy_action
    return sm, FabricTargets(palm_pose=cfg.ready_pose.copy(), pca=cfg.open_pca)


# -- metrics ---------------------------------------------------------------------


@dataclass(frozen=True)
class Metrics:
    cs_streaks: tuple[int, ...]
    cycle_times: tuple[float, ...]
    successes: int
    attempts: int

    def __post_init__(self):
        if self.successes > self.attempts:
            raise ValueError("successes cannot exceed attempts")

    @property
    def sr(self) -> float:
        return self.successes / self.attempts

    @property
    def cs_mean(self) -> float:
        return float(np.mean(self.cs_streaks)) if self.cs_streaks else 0.0

    @property
    def cs_std(self) -> float:
        return float(np.std(self.cs_streaks)) if self.cs_streaks else 0.0

    @property
    def ct_mean(self) -> float:
        return float(np.mean(self.cycle_times)) if self.cycle_times else 0.0

    @property
    def ct_std(self) -> float:
        return float(np.std(self.cycle_times)) if self.cycle_times else 0.0


def metrics_from_log(log) -> Metrics:
    """Summarize an attempt log of (success, start_time, end_time) tuples.

    CS streaks are maximal runs of consecutive successes; CT is measured per
    successful transport.
    """
    log = list(log)
    if not log:
        raise ValueError("attempt log is empty")
    streaks: list[int] = []
    run = 0
    cts: list[float] = []
    successes = 0
    for success, start, end in log:
        if success:
            run += 1
            successes += 1
            cts.append(float(end) - float(start))
        elif run:
            streaks.append(run)
            run = 0
    if run:
        streaks.append(run)
    return Metrics(cs_streaks=tuple(streaks), cycle_times=tuple(cts),
                   successes=successes, attempts=len(log))


# -- bin-packing harness ------------------------------------------------------------


def load_binpack_config(doc: dict, lift_pca, open_pca) -> BinPackConfig:
    return BinPackConfig(
        bin_waypoint=np.asarray(doc["bin_waypoint"], dtype=float),
        bin_drop_zone=np.asarray(doc["bin_drop_zone"], dtype=float),
        bin_radius=float(doc["bin_radius"]),
        ready_pose=np.asarray(doc["ready_pose"], dtype=float),
        lift_pca=np.asarray(lift_pca, dtype=float),
        open_pca=np.asarray(open_pca, dtype=float),
        palm_rotvec=np.asarray(doc["palm_rotvec"], dtype=float),
        z_threshold=float(doc["z_threshold"]),
        arrival_tolerance=float(doc.get("arrival_tolerance", 0.10)),
        deposit_duration=float(doc.get("deposit_duration", 1.5)),
        use_prediction=bool(doc.get("use_prediction", True)),
    )


def reference_binpack_config(lift_pca, open_pca) -> BinPackConfig:
    text = resources.files("fabricgrasp.data").joinpath("runtime.yaml").read_text()
    return load_binpack_config(yaml.safe_load(text), lift_pca, open_pca)


@dataclass
class BinPackResult:
    metrics: Metrics
    attempt_log: list
    trace: list


def run_binpack(model, basis, fabric_cfg, env, adr_sample: dict, n_objects: int,
                seed: int, binpack_cfg: BinPackConfig | None = None,
                attempt_timeout: float = 15.0) -> BinPackResult:
    """Sequential transports with the scripted grasp policy feeding the state
    machine. An attempt succeeds when the deposited object comes to rest
    inside the bin radius."""
    from . import fabric as fb
    from .toysim import ScriptedGrasp

    if binpack_cfg is None:
        rest_z = env.params.table_height + env.params.spawn_center[2]
        probe = ScriptedGrasp(model, basis, env.episode.goal, rest_z=rest_z)
        binpack_cfg = reference_binpack_config(probe.curl_pca, probe.open_pca)
    rest_z = env.params.table_height + env.params.spawn_center[2]

    cfg = fabric_cfg
    if "fabric_damping_gain" in adr_sample:
        cfg = fb.set_runtime_gain(cfg, "damping", adr_sample["fabric_damping_gain"])
    if "pd_velocity_target" in adr_sample:
        cfg = fb.set_runtime_gain(cfg, "pd_velocity_scale", adr_sample["pd_velocity_target"])

    dt = env.dt
    attempt_log = []
    trace: list[TraceRecord] = []
    fstate = None
    for obj_i in range(n_objects):
        state = env.reset(adr_sample, seed + obj_i)
        if fstate is None:
            fstate = fb.FabricState(state.q.copy(), np.zeros(model.dof), np.zeros(model.dof))
        else:
            # The arm keeps its pose between objects; only the object respawns.
            state.q = fstate.q.copy()
            state.v = fstate.v.copy()
        policy = ScriptedGrasp(model, basis, env.episode.goal, rest_z=rest_z)
        obs_rng = np.random.default_rng(seed + 7919 * obj_i)
        sm = BinPackState()
        start = obj_i * attempt_timeout
        now = start
        success = False
        returned = False
        max_ticks = round(attempt_timeout / dt)
        for tick in range(max_ticks):
            obs = env.observe(state, adr_sample, obs_rng, "actor")
            action = policy(obs, state.obj.grasped)
            if binpack_cfg.use_prediction:
                predicted = policy.predicted_object
            else:
                predicted = state.obj.position
            fk = model.fk(fstate.q)
            palm_pos = fk.frame_transform("palm").pos
            prev_mode = sm.mode
            sm, targets = state_machine_step(sm, binpack_cfg, predicted, action,
                                             palm_pos, now)
            if sm.mode != prev_mode:
                trace.append(TraceRecord(tick=int(now * 1e6), node="state_machine",
                                         kind="mode", payload={"mode": sm.mode}))
            fstate, pd = fb.step(model, cfg, fstate, targets)
            state.fabric_q, state.fabric_qd, state.fabric_acc = fstate.q, fstate.v, fstate.a_prev
            env.step_env(state, pd, dt)
            now += dt
            if prev_mode == "ReturnHome" and sm.mode == "PolicyActive":
                returned = True
                break
        landed = np.linalg.norm(
            state.obj.position[:2] - binpack_cfg.bin_drop_zone[:2]) <= binpack_cfg.bin_radius
        success = returned and landed and not state.obj.grasped
        attempt_log.append((success, start, now))
        trace.append(TraceRecord(tick=int(now * 1e6), node="harness", kind="attempt",
                                 payload={"object": obj_i, "success": bool(success)}))
    return BinPackResult(metrics=metrics_from_log(attempt_log),
                         attempt_log=attempt_log, trace=trace)
