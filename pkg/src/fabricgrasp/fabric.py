"""Geometric fabric controller.

A fabric is a set of terms, each living on a task map x = phi(q). A term
contributes a priority metric M(x, xd) (SPD) and a desired task acceleration
f(x, xd). The net joint acceleration solves the metric-weighted least-squares
resolve

    qdd = (sum_i J_i^T M_i J_i)^{-1} sum_i J_i^T M_i (f_i - Jdot_i qd)

Geometric terms keep f positively homogeneous of degree 2 in velocity, so a
fabric built only from them traces speed-independent paths. Forcing terms
(goal attractors, barriers, damping) deliberately break that homogeneity to
do work.

The resolved acceleration is clamped to acceleration/jerk limits and
integrated with a midpoint (RK2) scheme at the control rate, optionally in
two substeps per tick. The integrated state doubles as the PD target, with
the velocity target scaled by an annealable gain.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .geometry import rotation_from_rotvec, rotvec_from_rotation
from .kinematics import FkResult, RobotModel

_JDOT_DELTA = 1e-6
_GRAD_EPS = 1e-6
_BARRIER_EPS = 1e-4
_DIST_FLOOR = 1e-3


class FabricError(RuntimeError):
    """Mis-specified term set: singular summed metric or non-finite output."""


# -- state / config ----------------------------------------------------------


@dataclass
class FabricTargets:
    palm_pose: np.ndarray  # (6,) position [m] + orientation rotvec [rad]
    pca: np.ndarray  # (5,) PCA hand coordinates

    def __post_init__(self):
        self.palm_pose = np.asarray(self.palm_pose, dtype=float)
        self.pca = np.asarray(self.pca, dtype=float)
        if not (np.all(np.isfinite(self.palm_pose)) and np.all(np.isfinite(self.pca))):
            raise ValueError("fabric targets must be finite")


@dataclass
class FabricState:
    q: np.ndarray
    v: np.ndarray
    a_prev: np.ndarray

    @classmethod
    def at_rest(cls, q: np.ndarray) -> "FabricState":
        q = np.asarray(q, dtype=float)
        return cls(q=q.copy(), v=np.zeros_like(q), a_prev=np.zeros_like(q))


@dataclass
class PdTarget:
    q_des: np.ndarray
    v_des: np.ndarray


@dataclass(frozen=True)
class FabricConfig:
    terms: tuple
    damping_gain: float = 10.0
    accel_limit: float = 40.0
    jerk_limit: float = 800.0
    dt: float = 1.0 / 60.0
    substeps: int = 2
    pd_velocity_scale: float = 1.0
    nominal_posture: np.ndarray = field(default_factory=lambda: np.zeros(23))
    damping_bounds: tuple[float, float] = (10.0, 20.0)

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be > 0")
        if self.substeps not in (1, 2):
            raise ValueError("substeps must be 1 or 2")
        lo, hi = self.damping_bounds
        if not lo <= self.damping_gain <= hi:
            raise ValueError(f"damping_gain {self.damping_gain} outside [{lo}, {hi}]")
        if not 0.0 <= self.pd_velocity_scale <= 1.0:
            raise ValueError("pd_velocity_scale must lie in [0, 1]")


def set_runtime_gain(config: FabricConfig, name: str, value: float) -> FabricConfig:
    """Return a config with an ADR-driven gain updated; range-checked."""
    if name == "damping":
        lo, hi = config.damping_bounds
        if not lo <= value <= hi:
            raise ValueError(f"damping value {value} outside [{lo}, {hi}]")
        return replace(config, damping_gain=float(value))
    if name == "pd_velocity_scale":
        if not 0.0 <= value <= 1.0:
            raise ValueError(f"pd_velocity_scale value {value} outside [0, 1]")
        return replace(config, pd_velocity_scale=float(value))
    raise ValueError(f"unknown runtime gain '{name}'")


# -- terms -------------------------------------------------------------------


class FabricTerm:
    """Base term. kind is "geometric" or "forcing"."""

    kind = "forcing"
    constant_jacobian = False
    is_barrier = False

    def geometry(self, model: RobotModel, fk: FkResult, q: np.ndarray):
        """Return (x, J) on this term's task map."""
        raise NotImplementedError

    def active(self, x: np.ndarray, xd: np.ndarray) -> bool:
        return True

    def metric(self, x: np.ndarray, xd: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def policy(self, x, xd, fk, targets: FabricTargets, cfg: FabricConfig) -> np.ndarray:
        raise NotImplementedError

    def contribute(self, model, fk, shift_fk, q, v, targets, cfg, lhs, rhs):
        """Pull this term back into the joint-space resolve. Returns
        (was_active, active_barrier_count). shift_fk() lazily provides the FK
        pass at q + delta*v for the Jdot qd finite difference."""
        x, jac = self.geometry(model, fk, q)
        xd = jac @ v
        if not self.active(x, xd):
            return False, 0
        if self.constant_jacobian or not np.any(v != 0.0):
            jdot_qd = np.zeros(len(x))
        else:
            fk2 = shift_fk()
            _, jac_shift = self.geometry(model, fk2, q + _JDOT_DELTA * v)
            jdot_qd = (jac_shift - jac) / _JDOT_DELTA @ v
        metric = self.metric(x, xd)
        f = self.policy(x, xd, fk, targets, cfg=cfg)
        if not np.all(np.isfinite(f)):
            raise FabricError(f"non-finite policy output from {type(self).__name__}")
        pulled = jac.T @ metric
        lhs += pulled @ jac
        rhs += pulled @ (f - jdot_qd)
        return True, 1 if self.is_barrier else 0


class PostureGeometric(FabricTerm):
    """Speed-independent pull toward the nominal (elbow-out, fingers-curled)
    posture; also supplies the base joint-space metric that keeps the resolve
    nonsingular."""

    kind = "geometric"
    constant_jacobian = True

    def __init__(self, weight: float = 1.0, bend: float = 1.0):
        self.weight = weight
        self.bend = bend

    def geometry(self, model, fk, q):
        return q, np.eye(model.dof)

    def metric(self, x, xd):
        return self.weight * np.eye(len(x))

    def policy(self, x, xd, fk, targets, cfg):
        e = x - cfg.nominal_posture[: len(x)]
        speed_sq = float(xd @ xd)
        return -self.bend * speed_sq * e / max(np.linalg.norm(e), _GRAD_EPS)


class JointDamping(FabricTerm):
    """Joint-space damping; gain follows the ADR 10 -> 20 schedule."""

    constant_jacobian = True

    def __init__(self, weight: float = 1.0):
        self.weight = weight

    def geometry(self, model, fk, q):
        return q, np.eye(model.dof)

    def metric(self, x, xd):
        return self.weight * np.eye(len(x))

    def policy(self, x, xd, fk, targets, cfg):
        return -cfg.damping_gain * xd


class JointAttractor(FabricTerm):
    """Forcing attractor to a fixed joint configuration (test scaffolding and
    scripted behaviors)."""

    constant_jacobian = True

    def __init__(self, target: np.ndarray, kp: float, kd: float = 0.0, weight: float = 1.0):
        self.target = np.asarray(target, dtype=float)
        self.kp = kp
        self.kd = kd
        self.weight = weight

    def geometry(self, model, fk, q):
        return q, np.eye(model.dof)

    def metric(self, x, xd):
        return self.weight * np.eye(len(x))

    def policy(self, x, xd, fk, targets, cfg):
        return -self.kp * (x - self.target) - self.kd * xd


class PalmAttractor(FabricTerm):
    """Forcing attractor on the palm frame's 6-DoF pose."""

    def __init__(
        self,
        frame: str = "palm",
        kp_pos: float = 60.0,
        kp_rot: float = 30.0,
        kd: float = 10.0,
        w_pos: float = 8.0,
        w_rot: float = 2.0,
    ):
        self.frame = frame
        self.kp_pos = kp_pos
        self.kp_rot = kp_rot
        self.kd = kd
        self.w_pos = w_pos
        self.w_rot = w_rot

    def geometry(self, model, fk, q):
        t = fk.frame_transform(self.frame)
        x = np.concatenate([t.pos, rotvec_from_rotation(t.rot)])
        return x, fk.jacobian(self.frame)

    def metric(self, x, xd):
        return np.diag([self.w_pos] * 3 + [self.w_rot] * 3)

    def policy(self, x, xd, fk, targets, cfg):
        t = fk.frame_transform(self.frame)
        e_pos = t.pos - targets.palm_pose[:3]
        r_target = rotation_from_rotvec(targets.palm_pose[3:])
        e_rot = rotvec_from_rotation(t.rot @ r_target.T)
        f = np.empty(6)
        f[:3] = -self.kp_pos * e_pos - self.kd * xd[:3]
        f[3:] = -self.kp_rot * e_rot - self.kd * xd[3:]
        return f


class PcaAttractor(FabricTerm):
    """Forcing attractor in the 5-D PCA hand subspace."""

    constant_jacobian = True

    def __init__(self, projection: np.ndarray, mean: np.ndarray, hand_indices: np.ndarray,
                 kp: float = 40.0, kd: float = 8.0, weight: float = 2.0):
        self.projection = np.asarray(projection, dtype=float)  # (5, 16)
        self.mean = np.asarray(mean, dtype=float)
        self.hand_indices = np.asarray(hand_indices, dtype=int)
        self.kp = kp
        self.kd = kd
        self.weight = weight
        self._jac: np.ndarray | None = None

    def geometry(self, model, fk, q):
        if self._jac is None or self._jac.shape[1] != model.dof:
            jac = np.zeros((self.projection.shape[0], model.dof))
            jac[:, self.hand_indices] = self.projection
            self._jac = jac
        c = self.projection @ (q[self.hand_indices] - self.mean)
        return c, self._jac

    def metric(self, x, xd):
        return self.weight * np.eye(len(x))

    def policy(self, x, xd, fk, targets, cfg):
        return -self.kp * (x - targets.pca) - self.kd * xd


class JointLimitBarrierSet(FabricTerm):
    """Vectorized repulsion from both sides of every joint limit. The task
    maps are the per-joint limit distances; their pullbacks are diagonal, so
    the whole set accumulates into the resolve in one pass."""

    constant_jacobian = True
    is_barrier = True

    def __init__(self, model: RobotModel, kb: float = 1.0, weight: float = 4.0,
                 activation: float = 0.05):
        self.kb = kb
        self.weight = weight
        self.activation = activation
        self.lo = model.joint_lo
        self.hi = model.joint_hi

    def contribute(self, model, fk, shift_fk, q, v, targets, cfg, lhs, rhs):
        count = 0
        for d, sign in ((q - self.lo, 1.0), (self.hi - q, -1.0)):
            mask = d < self.activation
            if not np.any(mask):
                continue
            count += int(np.count_nonzero(mask))
            dm = np.maximum(d[mask], _DIST_FLOOR)
            m = self.weight / dm
            f = self.kb / (d[mask] ** 2 + _BARRIER_EPS)
            idx = np.nonzero(mask)[0]
            lhs[idx, idx] += m
            rhs[idx] += sign * m * f
        return count > 0, count


class SphereDistance:
    """Shared geometry for collision-sphere pair terms."""

    def __init__(self, model: RobotModel, pair: tuple[int, int]):
        self.i, self.j = pair
        self.si = model.collision_spheres[self.i]
        self.sj = model.collision_spheres[self.j]
        self.margin = self.si.radius + self.sj.radius

    def distance(self, fk: FkResult) -> float:
        pi = fk.sphere_center(self.si)
        pj = fk.sphere_center(self.sj)
        return float(np.linalg.norm(pi - pj)) - self.margin

    def eval(self, fk: FkResult):
        pi = fk.sphere_center(self.si)
        pj = fk.sphere_center(self.sj)
        delta = pi - pj
        dist = float(np.linalg.norm(delta))
        direction = delta / max(dist, _DIST_FLOOR)
        jac = direction @ (fk.point_jacobian(self.si.frame, self.si.offset)
                           - fk.point_jacobian(self.sj.frame, self.sj.offset))
        return np.array([dist - self.margin]), jac[None, :]


class SphereBarrier(FabricTerm):
    """Forcing repulsion between a collision-sphere pair, active near contact."""

    is_barrier = True

    def __init__(self, model: RobotModel, pair: tuple[int, int],
                 kb: float = 1.0, weight: float = 8.0, activation: float = 0.02):
        self.geom = SphereDistance(model, pair)
        self.kb = kb
        self.weight = weight
        self.activation = activation

    def contribute(self, model, fk, shift_fk, q, v, targets, cfg, lhs, rhs):
        # Cheap distance gate before any Jacobian work.
        if self.geom.distance(fk) >= self.activation:
            return False, 0
        return super().contribute(model, fk, shift_fk, q, v, targets, cfg, lhs, rhs)

    def geometry(self, model, fk, q):
        return self.geom.eval(fk)

    def active(self, x, xd):
        return x[0] < self.activation

    def metric(self, x, xd):
        return np.array([[self.weight / max(x[0], _DIST_FLOOR)]])

    def policy(self, x, xd, fk, targets, cfg):
        return np.array([self.kb / (x[0] ** 2 + _BARRIER_EPS)])


class SphereGeometricRepel(FabricTerm):
    """Geometric (speed-independent) bending away from a sphere pair. Active
    only on approach, which preserves positive homogeneity of degree 2."""

    kind = "geometric"

    def __init__(self, model: RobotModel, pair: tuple[int, int],
                 bend: float = 1.0, weight: float = 2.0, activation: float = 0.10):
        self.geom = SphereDistance(model, pair)
        self.bend = bend
        self.weight = weight
        self.activation = activation

    def contribute(self, model, fk, shift_fk, q, v, targets, cfg, lhs, rhs):
        if self.geom.distance(fk) >= self.activation:
            return False, 0
        return super().contribute(model, fk, shift_fk, q, v, targets, cfg, lhs, rhs)

    def geometry(self, model, fk, q):
        return self.geom.eval(fk)

    def active(self, x, xd):
        return x[0] < self.activation and xd[0] < 0.0

    def metric(self, x, xd):
        return np.array([[self.weight]])

    def policy(self, x, xd, fk, targets, cfg):
        return np.array([self.bend * xd[0] ** 2 / (x[0] ** 2 + _BARRIER_EPS)])


# -- resolve / integrate -----------------------------------------------------


def _resolve(model: RobotModel, config: FabricConfig, state: FabricState,
             targets: FabricTargets):
    """Net fabric acceleration plus diagnostics (active barrier count)."""
    q, v = state.q, state.v
    fk = model.fk(q)
    cache: dict = {}

    def shift_fk():
        if "fk" not in cache:
            cache["fk"] = model.fk(q + _JDOT_DELTA * v)
        return cache["fk"]

    lhs = np.zeros((model.dof, model.dof))
    rhs = np.zeros(model.dof)
    active_barriers = 0
    any_active = False
    for term in config.terms:
        was_active, barriers = term.contribute(
            model, fk, shift_fk, q, v, targets, config, lhs, rhs
        )
        any_active = any_active or was_active
        active_barriers += barriers

    if not any_active:
        raise FabricError("no active fabric terms; summed metric is singular")
    try:
        accel = np.linalg.solve(lhs, rhs)
    except np.linalg.LinAlgError:
        raise FabricError("singular summed metric; term set is mis-specified") from None
    if not np.all(np.isfinite(accel)):
        raise FabricError("non-finite resolved acceleration")
    return accel, {"active_barrier_count": active_barriers, "fk": fk}


def resolve_acceleration(model: RobotModel, config: FabricConfig,
                         state: FabricState, targets: FabricTargets) -> np.ndarray:
    return _resolve(model, config, state, targets)[0]


def apply_limits(a_raw: np.ndarray, a_prev: np.ndarray, accel_limit: float,
                 jerk_limit: float, dt: float) -> np.ndarray:
    """Clamp acceleration into |a| <= accel_limit and |a - a_prev| <= jerk*dt.

    Acceleration clamp is applied first; provided a_prev itself respects the
    acceleration limit, the jerk clamp cannot push the result back out.
    """
    a = np.clip(a_raw, -accel_limit, accel_limit)
    window = jerk_limit * dt
    return np.clip(a, a_prev - window, a_prev + window)


def step(model: RobotModel, config: FabricConfig, state: FabricState,
         targets: FabricTargets, record: list | None = None) -> tuple[FabricState, PdTarget]:
    """Advance the fabric one control tick (midpoint RK2, 1 or 2 substeps)."""
    h = config.dt / config.substeps
    q, v, a_prev = state.q.copy(), state.v.copy(), state.a_prev.copy()
    for _ in range(config.substeps):
        a_raw, info = _resolve(model, config, FabricState(q, v, a_prev), targets)
        a = apply_limits(a_raw, a_prev, config.accel_limit, config.jerk_limit, h)
        v_mid = v + 0.5 * h * a
        q = q + h * v_mid
        v = v + h * a
        a_prev = a
        if record is not None:
            record.append({
                "a": a.copy(),
                "active_barrier_count": info["active_barrier_count"],
            })
    # Belt-and-braces hard clamp on top of the limit barriers.
    clamped_lo = q < model.joint_lo
    clamped_hi = q > model.joint_hi
    clamped = clamped_lo | clamped_hi
    if np.any(clamped):
        q = np.clip(q, model.joint_lo, model.joint_hi)
        v = np.where(clamped, 0.0, v)
    new_state = FabricState(q=q, v=v, a_prev=a_prev)
    pd = PdTarget(q_des=q.copy(), v_des=config.pd_velocity_scale * v)
    return new_state, pd


# -- config building ---------------------------------------------------------


def default_sphere_pairs(model: RobotModel) -> list[tuple[int, int]]:
    """Non-adjacent sphere pairs of the reference model."""
    n = len(model.collision_spheres)
    pairs = []
    for i in range(n):
        for j in range(i + 2, n):  # skip adjacent links
            pairs.append((i, j))
    return pairs


def build_fabric_config(model: RobotModel, doc: dict,
                        pca_projection: np.ndarray | None = None,
                        pca_mean: np.ndarray | None = None) -> FabricConfig:
    """Assemble a FabricConfig from a parsed fabric config mapping."""
    terms: list[FabricTerm] = []
    for entry in doc.get("terms", []):
        kind = entry["type"]
        params = {k: v for k, v in entry.items() if k != "type"}
        if kind == "posture_geometric":
            terms.append(PostureGeometric(**params))
        elif kind == "joint_damping":
            terms.append(JointDamping(**params))
        elif kind == "joint_attractor":
            params["target"] = np.asarray(params["target"], dtype=float)
            terms.append(JointAttractor(**params))
        elif kind == "palm_attractor":
            terms.append(PalmAttractor(**params))
        elif kind == "pca_attractor":
            if pca_projection is None or pca_mean is None:
                raise ValueError("pca_attractor term requires a PCA basis")
            terms.append(PcaAttractor(pca_projection, pca_mean,
                                      model.hand_joint_indices, **params))
        elif kind == "joint_limit_barrier":
            terms.append(JointLimitBarrierSet(model, **params))
        elif kind == "sphere_barrier":
            for pair in default_sphere_pairs(model):
                terms.append(SphereBarrier(model, pair, **params))
        elif kind == "sphere_geometric":
            for pair in default_sphere_pairs(model):
                terms.append(SphereGeometricRepel(model, pair, **params))
        else:
            raise ValueError(f"unknown fabric term type '{kind}'")

    nominal = np.asarray(doc.get("nominal_posture", np.zeros(model.dof)), dtype=float)
    return FabricConfig(
        terms=tuple(terms),
        damping_gain=float(doc.get("damping_gain", 10.0)),
        accel_limit=float(doc.get("accel_limit", 40.0)),
        jerk_limit=float(doc.get("jerk_limit", 800.0)),
        dt=float(doc.get("dt", 1.0 / 60.0)),
        substeps=int(doc.get("substeps", 2)),
        pd_velocity_scale=float(doc.get("pd_velocity_scale", 1.0)),
        nominal_posture=nominal,
    )
