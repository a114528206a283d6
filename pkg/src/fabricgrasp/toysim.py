"""Desk-scale kinematic grasp environment.

The robot is pure kinematics: joints track the PD target with a first-order
lag. The object is a point body that rests on the table, gets shoved by a
disturbance pulse whenever the hand first comes within the activation
distance, and attaches rigidly to the palm once the grasp heuristic fires
(enough task points near the center plus sufficient hand closure). There is
no contact simulation; the heuristic constants are stand-ins and live in the
environment config.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from importlib import resources

import numpy as np
import yaml

from .actions import PcaBasis, pca_to_hand
from .fabric import FabricTargets, PdTarget
from .kinematics import RobotModel
from .reward import hand_obj_distance

OBJECT_ONEHOT_WIDTH = 8

# Actor channels zeroed out when observation annealing reaches 0.
VELOCITY_CHANNELS = ("qd", "task_point_vel", "fabric_qd", "fabric_acc")


@dataclass
class SimObject:
    position: np.ndarray
    velocity: np.ndarray
    mass_scale: float = 1.0
    grasped: bool = False


@dataclass(frozen=True)
class DisturbanceConfig:
    activation_distance: float = 0.3
    accel_magnitude: float = 0.0
    pulse_duration: float = 0.2

    def __post_init__(self):
        if self.activation_distance <= 0:
            raise ValueError("activation_distance must be > 0")


@dataclass(frozen=True)
class EpisodeConfig:
    max_duration: float = 10.0
    hold_success_duration: float = 2.0
    goal: np.ndarray = field(default_factory=lambda: np.array([0.55, 0.0, 0.30]))
    spawn_width: float = 0.0
    spawn_height: float = 0.0
    control_rate: float = 60.0

    def __post_init__(self):
        if self.max_duration <= 0 or self.hold_success_duration <= 0:
            raise ValueError("episode durations must be > 0")

    @property
    def max_ticks(self) -> int:
        return round(self.max_duration * self.control_rate)

    @property
    def hold_ticks_needed(self) -> int:
        return round(self.hold_success_duration * self.control_rate)


@dataclass(frozen=True)
class EnvParams:
    table_height: float = 0.0
    spawn_center: np.ndarray = field(default_factory=lambda: np.array([0.55, 0.0, 0.025]))
    grasp_radius: float = 0.06
    closure_threshold: float = 0.5
    release_threshold: float = 0.35
    lift_height: float = 0.25
    joint_lag_tau: float = 0.05
    ground_friction_tau: float = 0.15
    gravity: float = 9.81


@dataclass
class ObservationSet:
    actor_obs: dict
    critic_obs: dict
    annealing_scale: float


@dataclass
class EpisodeOutcome:
    success: bool
    steps: int
    time_to_lift: float | None = None

    def __post_init__(self):
        if self.success and self.time_to_lift is None:
            raise ValueError("successful outcome must carry time_to_lift")


@dataclass
class SimState:
    q: np.ndarray
    v: np.ndarray
    obj: SimObject
    tick: int = 0
    hold_ticks: int = 0
    last_action: np.ndarray = field(default_factory=lambda: np.zeros(11))
    fabric_q: np.ndarray | None = None
    fabric_qd: np.ndarray | None = None
    fabric_acc: np.ndarray | None = None
    grasp_offset: np.ndarray | None = None  # object position in the palm frame
    disturbance_dir: np.ndarray = field(default_factory=lambda: np.zeros(3))
    disturbance_until: int = -1
    was_near: bool = False
    obs_bias: dict = field(default_factory=dict)
    rng: np.random.Generator = field(default_factory=lambda: np.random.default_rng(0))


class ToyEnv:
    """One environment instance; owns its RNG stream, shares nothing."""

    def __init__(self, model: RobotModel, basis: PcaBasis, params: EnvParams,
                 disturbance: DisturbanceConfig, episode: EpisodeConfig,
                 nominal_posture: np.ndarray):
        self.model = model
        self.basis = basis
        self.params = params
        self.disturbance = disturbance
        self.episode = episode
        self.nominal_posture = np.asarray(nominal_posture, dtype=float)
        self.dt = 1.0 / episode.control_rate

    # -- lifecycle -----------------------------------------------------------

    def reset(self, adr_sample: dict, rng_seed: int) -> SimState:
        rng = np.random.default_rng(rng_seed)
        width = adr_sample.get("object_spawn_width", self.episode.spawn_width)
        height = adr_sample.get("object_spawn_height", self.episode.spawn_height)
        center = self.params.spawn_center
        pos = center + np.array([
            rng.uniform(-0.5, 0.5) * width,
            rng.uniform(-0.5, 0.5) * width,
            rng.uniform(0.0, 1.0) * height,
        ])
        obj = SimObject(
            position=pos,
            velocity=np.zeros(3),
            mass_scale=adr_sample.get("object_mass_scale", 1.0),
        )
        vel_mag = adr_sample.get("robot_init_joint_vel", 0.0)
        v0 = rng.uniform(-vel_mag, vel_mag, self.model.dof) if vel_mag > 0 else np.zeros(self.model.dof)
        bias = {
            "q": self._bias(rng, adr_sample, "robot_pos_bias", self.model.dof),
            "qd": self._bias(rng, adr_sample, "robot_vel_bias", self.model.dof),
            "obj_pos": self._bias(rng, adr_sample, "object_pos_bias", 3),
        }
        return SimState(q=self.nominal_posture.copy(), v=v0, obj=obj,
                        obs_bias=bias, rng=rng)

    @staticmethod
    def _bias(rng, sample, name, n):
        half = sample.get(name, 0.0)
        return rng.uniform(-half, half, n) if half > 0 else np.zeros(n)

    # -- dynamics --------------------------------------------------------------

    def step_env(self, state: SimState, pd_target: PdTarget, dt: float) -> SimState:
        lag = 1.0 - np.exp(-dt / self.params.joint_lag_tau)
        q_new = state.q + lag * (pd_target.q_des - state.q)
        q_new = np.clip(q_new, self.model.joint_lo, self.model.joint_hi)
        state.v = (q_new - state.q) / dt
        state.q = q_new

        fk = self.model.fk(state.q)
        points = self._task_points(fk)
        obj = state.obj

        if not obj.grasped and self.grasp_check(state, points=points):
            palm = fk.frame_transform("palm")
            state.grasp_offset = palm.rot.T @ (obj.position - palm.pos)
            obj.grasped = True
            obj.velocity = np.zeros(3)

        if obj.grasped:
            if self._closure(state.q) < self.params.release_threshold:
                obj.grasped = False
                state.grasp_offset = None
            else:
                palm = fk.frame_transform("palm")
                new_pos = palm.apply(state.grasp_offset)
                obj.velocity = (new_pos - obj.position) / dt
                obj.position = new_pos

        if not obj.grasped:
            self._free_object_step(state, points, dt)

        lift = self.params.table_height + self.params.lift_height
        if obj.position[2] >= lift:
            state.hold_ticks += 1
        else:
            state.hold_ticks = 0
        assert obj.grasped or obj.position[2] >= self.params.table_height - 1e-12
        state.tick += 1
        return state

    def _free_object_step(self, state: SimState, points: np.ndarray, dt: float) -> None:
        obj = state.obj
        d = hand_obj_distance(points, obj.position)
        near = d < self.disturbance.activation_distance
        if near and not state.was_near:
            # New approach: fire a fresh pulse in a random horizontal direction.
            theta = state.rng.uniform(0.0, 2.0 * np.pi)
            state.disturbance_dir = np.array([np.cos(theta), np.sin(theta), 0.0])
            state.disturbance_until = state.tick + round(
                self.disturbance.pulse_duration * self.episode.control_rate
            )
        state.was_near = near
        if near and state.tick < state.disturbance_until:
            obj.velocity = obj.velocity + self.disturbance.accel_magnitude * state.disturbance_dir * dt

        rest = self.params.table_height + self.params.spawn_center[2]
        if obj.position[2] > rest:
            obj.velocity[2] -= self.params.gravity * dt
        decay = np.exp(-dt / self.params.ground_friction_tau)
        obj.velocity[:2] *= decay
        obj.position = obj.position + obj.velocity * dt
        if obj.position[2] <= rest:
            obj.position[2] = rest
            obj.velocity[2] = 0.0

    # -- predicates ------------------------------------------------------------

    def grasp_check(self, state: SimState, points: np.ndarray | None = None) -> bool:
        if points is None:
            points = self._task_points(self.model.fk(state.q))
        dists = np.linalg.norm(points - state.obj.position, axis=1)
        near_count = int(np.sum(dists <= self.params.grasp_radius))
        return near_count >= 3 and self._closure(state.q) > self.params.closure_threshold

    def episode_done(self, state: SimState, mode: str) -> str | None:
        if mode not in ("teacher", "student"):
            raise ValueError(f"unknown mode '{mode}'")
        if mode == "student" and state.hold_ticks >= self.episode.hold_ticks_needed:
            return "success"
        if state.tick >= self.episode.max_ticks:
            return "timeout"
        return None

    # -- observations ------------------------------------------------------------

    def observe(self, state: SimState, adr_sample: dict, rng: np.random.Generator,
                role: str) -> dict:
        fk = self.model.fk(state.q)
        points = self._task_points(fk)
        point_vel = np.array([
            fk.point_jacobian(name) @ state.v for name in self.model.task_frame_names
        ])
        dof = self.model.dof
        exact = {
            "q": state.q.copy(),
            "qd": state.v.copy(),
            "task_points": points.ravel(),
            "task_point_vel": point_vel.ravel(),
            "obj_pos": state.obj.position.copy(),
            "goal": np.asarray(self.episode.goal, dtype=float).copy(),
            "last_action": state.last_action.copy(),
            "fabric_q": np.zeros(dof) if state.fabric_q is None else state.fabric_q.copy(),
            "fabric_qd": np.zeros(dof) if state.fabric_qd is None else state.fabric_qd.copy(),
            "fabric_acc": np.zeros(dof) if state.fabric_acc is None else state.fabric_acc.copy(),
            "object_onehot": np.eye(OBJECT_ONEHOT_WIDTH)[0],
        }
        if role == "critic":
            exact["obj_vel"] = state.obj.velocity.copy()
            # Schema placeholders: no dynamics, so measured wrenches are zero.
            exact["measured_torque"] = np.zeros(dof)
            exact["measured_force"] = np.zeros(3)
            return exact
        if role != "actor":
            raise ValueError(f"unknown role '{role}'")

        obs = exact
        obs["q"] = obs["q"] + state.obs_bias["q"] + self._noise(rng, adr_sample, "robot_pos_noise", dof)
        obs["qd"] = obs["qd"] + state.obs_bias["qd"] + self._noise(rng, adr_sample, "robot_vel_noise", dof)
        obs["obj_pos"] = (obs["obj_pos"] + state.obs_bias["obj_pos"]
                          + self._noise(rng, adr_sample, "object_pos_noise", 3))
        ann = adr_sample.get("observation_annealing", 1.0)
        for name in VELOCITY_CHANNELS:
            obs[name] = ann * obs[name]
        return obs

    @staticmethod
    def _noise(rng, sample, name, n):
        half = sample.get(name, 0.0)
        return rng.uniform(-half, half, n) if half > 0 else np.zeros(n)

    def observation_set(self, state: SimState, adr_sample: dict,
                        rng: np.random.Generator) -> ObservationSet:
        return ObservationSet(
            actor_obs=self.observe(state, adr_sample, rng, "actor"),
            critic_obs=self.observe(state, adr_sample, rng, "critic"),
            annealing_scale=adr_sample.get("observation_annealing", 1.0),
        )

    # -- helpers --------------------------------------------------------------

    def _task_points(self, fk) -> np.ndarray:
        return np.array([fk.frame_transform(n).pos for n in self.model.task_frame_names])

    def _closure(self, q: np.ndarray) -> float:
        return self.basis.closure(q[self.model.hand_joint_indices])


# -- trajectory hashing ---------------------------------------------------------


def state_digest(state: SimState) -> bytes:
    h = hashlib.sha256()
    h.update(state.q.tobytes())
    h.update(state.v.tobytes())
    h.update(state.obj.position.tobytes())
    h.update(state.obj.velocity.tobytes())
    h.update(bytes([state.obj.grasped]))
    return h.digest()


def trajectory_hash(digests) -> str:
    h = hashlib.sha256()
    for d in digests:
        h.update(d)
    return h.hexdigest()


# -- scripted grasp controller ----------------------------------------------------


class ScriptedGrasp:
    """Hand-coded reach-close-lift controller emitting fabric targets.

    Used as the teacher behavior for distillation and as the grasp policy in
    the bin-packing harness. Reads the noisy actor object estimate; a short
    moving average keeps terminal-noise runs usable.
    """

    # Palm pitch by horizontal reach radius: close targets need a steeper,
    # more top-down wrist to stay clear of the elbow limit.
    PITCH_TABLE = ((0.42, 3.0), (0.50, 2.6), (0.70, 2.2), (np.inf, 1.9))
    APPROACH_OFFSET = np.array([-0.04, 0.0, 0.10])
    LIFT_PITCH = 2.2

    def __init__(self, model: RobotModel, basis: PcaBasis, goal: np.ndarray,
                 rest_z: float | None = None, avg_window: int = 45):
        self.model = model
        self.basis = basis
        self.goal = np.asarray(goal, dtype=float)
        self.rest_z = rest_z
        hand = model.hand_joint_indices
        self.open_pca = basis.project(np.zeros(len(hand)))
        curled = np.clip(0.9 * model.joint_hi[hand], basis.hand_lo, basis.hand_hi)
        self.curl_pca = basis.project(curled)
        # Place the palm so the centroid of the curled task points lands on
        # the object center. The centroid is a fixed palm-frame offset.
        from .geometry import rotation_from_rotvec

        q = np.zeros(model.dof)
        q[hand] = pca_to_hand(basis, self.curl_pca)
        fk = model.fk(q)
        palm = fk.frame_transform("palm")
        pts = np.array([fk.frame_transform(n).pos for n in model.task_frame_names])
        centroid_local = (pts.mean(axis=0) - palm.pos) @ palm.rot
        self.grasp_offsets = {
            pitch: -(rotation_from_rotvec(np.array([0.0, pitch, 0.0])) @ centroid_local)
            for _, pitch in self.PITCH_TABLE
        }
        self.avg_window = avg_window
        self.reset()

    def _pitch_for(self, est: np.ndarray) -> float:
        radius = float(np.hypot(est[0], est[1]))
        for cutoff, pitch in self.PITCH_TABLE:
            if radius <= cutoff:
                return pitch
        raise AssertionError("unreachable")

    # Spiral sweep parameters: the curled hand is dragged along an
    # archimedean spiral around the (biased) object estimate until the grasp
    # heuristic latches. Pitch is set by the capture width of the point
    # cloud; speed by what the arm can track.
    SWEEP_PITCH = 0.022  # m radius gain per radian
    SWEEP_SPEED = 0.3  # m/s commanded path speed
    SWEEP_MAX_RADIUS = 0.25

    def reset(self) -> None:
        self._est: list[np.ndarray] = []
        self._phase = "approach"
        self._theta = 0.0
        self.predicted_object: np.ndarray | None = None

    def _estimate(self, obj_pos: np.ndarray, grasped: bool = False) -> np.ndarray:
        self._est.append(np.asarray(obj_pos, dtype=float))
        if len(self._est) > self.avg_window:
            self._est.pop(0)
        est = np.mean(self._est, axis=0)
        if self.rest_z is not None and not grasped:
            # A free object always rests at table height; trusting that beats
            # the biased measured z.
            est = np.array([est[0], est[1], self.rest_z])
        return est

    def _spiral(self, dt: float) -> np.ndarray:
        r = self.SWEEP_PITCH * self._theta
        off = r * np.array([np.cos(self._theta), np.sin(self._theta), 0.0])
        ds = self.SWEEP_SPEED * dt
        self._theta += ds / max(np.hypot(r, self.SWEEP_PITCH), 1e-9)
        if self.SWEEP_PITCH * self._theta > self.SWEEP_MAX_RADIUS:
            self._theta = 0.0
        return off

    def __call__(self, obs: dict, grasped: bool, dt: float = 1.0 / 60.0) -> FabricTargets:
        est = self._estimate(obs["obj_pos"], grasped)
        palm = obs["task_points"][:3]
        if grasped:
            self._phase = "lift"
        elif self._phase == "lift":
            self._phase = "approach"
            self._theta = 0.0
        pitch = self.LIFT_PITCH if self._phase == "lift" else self._pitch_for(est)
        grasp_target = est + self.grasp_offsets[pitch]
        if grasped:
            # A held object sits at a known palm offset, so proprioception
            # beats the biased camera channel outright.
            self.predicted_object = palm - self.grasp_offsets[pitch]
        else:
            self.predicted_object = est
        if self._phase == "approach":
            # No contact physics, so descend curled and go straight to the
            # sweep once the palm is in the neighborhood.
            target = grasp_target
            if np.linalg.norm(palm - target) < 0.06:
                self._phase = "sweep"
            pca = self.curl_pca
        if self._phase == "sweep":
            target = grasp_target + self._spiral(dt)
            pca = self.curl_pca
        elif self._phase == "lift":
            # Aim the palm a little above the goal so the hanging object
            # settles at goal height rather than below it.
            target = self.goal + np.array([0.0, 0.0, 0.06])
            pca = self.curl_pca
        return FabricTargets(
            palm_pose=np.concatenate([target, [0.0, pitch, 0.0]]),
            pca=pca,
        )


# -- episode driver ---------------------------------------------------------------


def run_episode(model, basis, fabric_cfg, env: ToyEnv, policy, adr_sample: dict,
                seed: int, mode: str, record=None):
    """Couple policy, fabric, and environment at the control rate.

    Returns (EpisodeOutcome, trajectory hash). `policy(obs, grasped)` must
    produce FabricTargets. `record`, if given, collects per-tick dicts.
    """
    from . import fabric as fb

    state = env.reset(adr_sample, seed)
    fstate = fb.FabricState(state.q.copy(), state.v.copy(), np.zeros(model.dof))
    obs_rng = np.random.default_rng(seed + 1)
    digests = []
    time_to_lift = None
    cfg = fabric_cfg
    if "fabric_damping_gain" in adr_sample:
        cfg = fb.set_runtime_gain(cfg, "damping", adr_sample["fabric_damping_gain"])
    if "pd_velocity_target" in adr_sample:
        cfg = fb.set_runtime_gain(cfg, "pd_velocity_scale", adr_sample["pd_velocity_target"])

    while True:
        obs = env.observe(state, adr_sample, obs_rng, "actor")
        targets = policy(obs, state.obj.grasped)
        fstate, pd = fb.step(model, cfg, fstate, targets)
        state.fabric_q = fstate.q
        state.fabric_qd = fstate.v
        state.fabric_acc = fstate.a_prev
        env.step_env(state, pd, env.dt)
        digests.append(state_digest(state))
        if time_to_lift is None and state.hold_ticks == 1:
            time_to_lift = state.tick * env.dt
        if record is not None:
            record.append({
                "tick": state.tick,
                "obj_pos": state.obj.position.copy(),
                "palm_pos": model.fk(state.q).frame_transform("palm").pos,
                "grasped": state.obj.grasped,
                "hold_ticks": state.hold_ticks,
            })
        reason = env.episode_done(state, mode)
        if reason is not None:
            success = reason == "success"
            outcome = EpisodeOutcome(
                success=success,
                steps=state.tick,
                time_to_lift=time_to_lift if success else time_to_lift,
            )
            return outcome, trajectory_hash(digests)


# -- config loading ----------------------------------------------------------------


def load_env(text: str, model: RobotModel, basis: PcaBasis,
             nominal_posture: np.ndarray) -> ToyEnv:
    doc = yaml.safe_load(text)
    params = EnvParams(
        table_height=float(doc.get("table_height", 0.0)),
        spawn_center=np.asarray(doc["spawn_center"], dtype=float),
        grasp_radius=float(doc["grasp_radius"]),
        closure_threshold=float(doc["closure_threshold"]),
        release_threshold=float(doc.get("release_threshold", 0.35)),
        lift_height=float(doc["lift_height"]),
        joint_lag_tau=float(doc.get("joint_lag_tau", 0.05)),
        ground_friction_tau=float(doc.get("ground_friction_tau", 0.15)),
        gravity=float(doc.get("gravity", 9.81)),
    )
    dist = doc.get("disturbance", {})
    disturbance = DisturbanceConfig(
        activation_distance=float(dist.get("activation_distance", 0.3)),
        accel_magnitude=float(dist.get("accel_magnitude", 0.0)),
        pulse_duration=float(dist.get("pulse_duration", 0.2)),
    )
    ep = doc.get("episode", {})
    episode = EpisodeConfig(
        max_duration=float(ep.get("max_duration", 10.0)),
        hold_success_duration=float(ep.get("hold_success_duration", 2.0)),
        goal=np.asarray(ep.get("goal", [0.55, 0.0, 0.30]), dtype=float),
        control_rate=float(ep.get("control_rate", 60.0)),
    )
    return ToyEnv(model, basis, params, disturbance, episode, nominal_posture)


def reference_env(model: RobotModel, basis: PcaBasis,
                  nominal_posture: np.ndarray) -> ToyEnv:
    text = resources.files("fabricgrasp.data").joinpath("env.yaml").read_text()
    return load_env(text, model, basis, nominal_posture)
