"""Articulated-chain robot model: config loading, forward kinematics, Jacobians.

The model is a tree of links. Every link carries a fixed transform relative to
its parent and, optionally, a revolute joint; the joint rotation is applied
after the fixed transform, about an axis expressed in the link frame. Task
frames name the links whose origins the controller and reward care about
(palm and fingertips on the reference robot).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from importlib import resources

import numpy as np
import yaml

from .geometry import Transform, rotation_about_axis, rotation_from_rpy


class RobotConfigError(ValueError):
    """Raised when a robot config fails validation. Message carries context."""


@dataclass(frozen=True)
class JointSpec:
    name: str
    lo: float
    hi: float
    vel_limit: float
    group: str = "arm"  # "arm" or "hand"

    def __post_init__(self):
        if not self.lo < self.hi:
            raise RobotConfigError(
                f"joint '{self.name}': lo ({self.lo}) must be < hi ({self.hi})"
            )
        if not self.vel_limit > 0:
            raise RobotConfigError(f"joint '{self.name}': vel_limit must be > 0")


@dataclass(frozen=True)
class LinkSpec:
    name: str
    parent: str  # parent link name, or "base"
    transform: Transform
    joint: str | None = None
    axis: np.ndarray | None = None

    def __post_init__(self):
        if self.joint is not None:
            if self.axis is None:
                raise RobotConfigError(f"link '{self.name}': joint without axis")
            if abs(np.linalg.norm(self.axis) - 1.0) > 1e-9:
                raise RobotConfigError(f"link '{self.name}': axis must have unit norm")


@dataclass(frozen=True)
class CollisionSphere:
    frame: str
    offset: np.ndarray
    radius: float


@dataclass
class JointState:
    q: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        self.q = np.asarray(self.q, dtype=float)
        self.v = np.asarray(self.v, dtype=float)
        if not (np.all(np.isfinite(self.q)) and np.all(np.isfinite(self.v))):
            raise ValueError("joint state entries must be finite")


class RobotModel:
    """Immutable after construction; FK and Jacobians are pure functions."""

    def __init__(
        self,
        joints: list[JointSpec],
        links: list[LinkSpec],
        task_frames: dict[str, str],
        collision_spheres: list[CollisionSphere],
    ):
        self.joints = list(joints)
        self.links = list(links)
        self.task_frames = dict(task_frames)
        self.collision_spheres = list(collision_spheres)

        self._joint_index = {j.name: i for i, j in enumerate(self.joints)}
        if len(self._joint_index) != len(self.joints):
            raise RobotConfigError("duplicate joint names")
        self._link_index = {l.name: i for i, l in enumerate(self.links)}
        if len(self._link_index) != len(self.links):
            raise RobotConfigError("duplicate link names")

        self._parent_idx: list[int] = []
        self._link_joint: list[int] = []  # joint index per link, -1 if fixed
        seen_joints: set[str] = set()
        for l in self.links:
            if l.parent == "base":
                self._parent_idx.append(-1)
            elif l.parent in self._link_index and self._link_index[l.parent] < self._link_index[l.name]:
                self._parent_idx.append(self._link_index[l.parent])
            else:
                raise RobotConfigError(
                    f"link '{l.name}': parent '{l.parent}' unknown or defined later"
                )
            if l.joint is not None:
                if l.joint not in self._joint_index:
                    raise RobotConfigError(f"link '{l.name}': unknown joint '{l.joint}'")
                if l.joint in seen_joints:
                    raise RobotConfigError(f"joint '{l.joint}' used by more than one link")
                seen_joints.add(l.joint)
                self._link_joint.append(self._joint_index[l.joint])
            else:
                self._link_joint.append(-1)
        missing = set(self._joint_index) - seen_joints
        if missing:
            raise RobotConfigError(f"joints never attached to a link: {sorted(missing)}")

        for name, link in self.task_frames.items():
            if link not in self._link_index:
                raise RobotConfigError(f"task frame '{name}': unknown link '{link}'")
        for s in self.collision_spheres:
            if s.frame not in self._link_index:
                raise RobotConfigError(f"collision sphere references unknown frame '{s.frame}'")

        # Joint chain (ordered base-to-tip joint indices) per link.
        self._chain: list[tuple[int, ...]] = []
        for i, l in enumerate(self.links):
            chain = () if self._parent_idx[i] < 0 else self._chain[self._parent_idx[i]]
            if self._link_joint[i] >= 0:
                chain = chain + (self._link_joint[i],)
            self._chain.append(chain)
        self._chain_idx = [np.array(c, dtype=int) for c in self._chain]

        self.joint_lo = np.array([j.lo for j in self.joints])
        self.joint_hi = np.array([j.hi for j in self.joints])
        self.vel_limits = np.array([j.vel_limit for j in self.joints])

    # -- structure ---------------------------------------------------------

    @property
    def dof(self) -> int:
        return len(self.joints)

    @property
    def arm_joints(self) -> list[JointSpec]:
        return [j for j in self.joints if j.group == "arm"]

    @property
    def hand_joints(self) -> list[JointSpec]:
        return [j for j in self.joints if j.group == "hand"]

    @property
    def hand_joint_indices(self) -> np.ndarray:
        return np.array([i for i, j in enumerate(self.joints) if j.group == "hand"], dtype=int)

    @property
    def task_frame_names(self) -> list[str]:
        return list(self.task_frames)

    def link_for_frame(self, frame: str) -> str:
        """Resolve a frame name (task frame or link) to its link name."""
        if frame in self.task_frames:
            return self.task_frames[frame]
        if frame in self._link_index:
            return frame
        raise KeyError(f"unknown frame '{frame}'")

    # -- kinematics --------------------------------------------------------

    def fk(self, q: np.ndarray) -> "FkResult":
        q = np.asarray(q, dtype=float)
        if q.shape != (self.dof,):
            raise ValueError(f"expected q of length {self.dof}, got shape {q.shape}")
        n_links = len(self.links)
        transforms: list[Transform] = [None] * n_links  # type: ignore[list-item]
        joint_origin = np.zeros((self.dof, 3))
        joint_axis_w = np.zeros((self.dof, 3))
        for i, l in enumerate(self.links):
            parent = Transform() if self._parent_idx[i] < 0 else transforms[self._parent_idx[i]]
            t = parent @ l.transform
            j = self._link_joint[i]
            if j >= 0:
                joint_origin[j] = t.pos
                axis_w = t.rot @ l.axis
                joint_axis_w[j] = axis_w
                t = Transform(t.rot @ rotation_about_axis(l.axis, q[j]), t.pos)
            transforms[i] = t
        return FkResult(self, transforms, joint_origin, joint_axis_w)

    def forward_kinematics(self, q: np.ndarray) -> dict[str, Transform]:
        """World transform for every link and every task frame."""
        res = self.fk(q)
        out = {l.name: res.transforms[i] for i, l in enumerate(self.links)}
        for name, link in self.task_frames.items():
            out[name] = out[link]
        return out

    def task_points(self, q: np.ndarray) -> np.ndarray:
        """Origins of the task frames, in declaration order, shape (k, 3)."""
        res = self.fk(q)
        return np.array([res.frame_transform(n).pos for n in self.task_frames])

    def jacobian(self, q: np.ndarray, frame: str) -> np.ndarray:
        """6 x dof geometric Jacobian of a frame origin (linear rows first)."""
        return self.fk(q).jacobian(frame)


class FkResult:
    """One FK pass; serves cheap Jacobian queries against the cached pose."""

    def __init__(self, model: RobotModel, transforms, joint_origin, joint_axis_w):
        self.model = model
        self.transforms = transforms
        self.joint_origin = joint_origin
        self.joint_axis_w = joint_axis_w

    def frame_transform(self, frame: str) -> Transform:
        link = self.model.link_for_frame(frame)
        return self.transforms[self.model._link_index[link]]

    def point_jacobian(self, frame: str, offset: np.ndarray | None = None) -> np.ndarray:
        """3 x dof Jacobian of a point rigidly attached to a frame."""
        model = self.model
        link_i = model._link_index[model.link_for_frame(frame)]
        t = self.transforms[link_i]
        p = t.pos if offset is None else t.apply(offset)
        jac = np.zeros((3, model.dof))
        chain = model._chain_idx[link_i]
        if len(chain):
            jac[:, chain] = np.cross(self.joint_axis_w[chain], p - self.joint_origin[chain]).T
        return jac

    def jacobian(self, frame: str) -> np.ndarray:
        model = self.model
        link_i = model._link_index[model.link_for_frame(frame)]
        p = self.transforms[link_i].pos
        jac = np.zeros((6, model.dof))
        chain = model._chain_idx[link_i]
        if len(chain):
            jac[:3, chain] = np.cross(self.joint_axis_w[chain], p - self.joint_origin[chain]).T
            jac[3:, chain] = self.joint_axis_w[chain].T
        return jac

    def sphere_center(self, sphere: CollisionSphere) -> np.ndarray:
        return self.frame_transform(sphere.frame).apply(sphere.offset)


# -- config loading ---------------------------------------------------------


def _link_from_entry(entry: dict) -> LinkSpec:
    try:
        name = entry["name"]
        parent = entry["parent"]
    except KeyError as e:
        raise RobotConfigError(f"link entry missing field {e}: {entry}") from None
    translation = np.asarray(entry.get("translation", [0.0, 0.0, 0.0]), dtype=float)
    rpy = entry.get("rpy", [0.0, 0.0, 0.0])
    transform = Transform(rotation_from_rpy(*rpy), translation)
    axis = entry.get("axis")
    return LinkSpec(
        name=name,
        parent=parent,
        transform=transform,
        joint=entry.get("joint"),
        axis=None if axis is None else np.asarray(axis, dtype=float),
    )


def load_robot_model(config_text: str) -> RobotModel:
    """Parse and validate a robot config (YAML text, see data/robot.yaml)."""
    try:
        doc = yaml.safe_load(config_text)
    except yaml.YAMLError as e:
        raise RobotConfigError(f"robot config parse error: {e}") from None
    if not isinstance(doc, dict):
        raise RobotConfigError("robot config must be a mapping")
    for section in ("joints", "links", "task_frames"):
        if section not in doc:
            raise RobotConfigError(f"robot config missing section '{section}'")

    joints = []
    for entry in doc["joints"]:
        try:
            joints.append(
                JointSpec(
                    name=entry["name"],
                    lo=float(entry["lo"]),
                    hi=float(entry["hi"]),
                    vel_limit=float(entry["vel_limit"]),
                    group=entry.get("group", "arm"),
                )
            )
        except KeyError as e:
            raise RobotConfigError(f"joint entry missing field {e}: {entry}") from None

    links = [_link_from_entry(entry) for entry in doc["links"]]

    task_frames = dict(doc["task_frames"])
    spheres = [
        CollisionSphere(
            frame=entry["frame"],
            offset=np.asarray(entry.get("offset", [0.0, 0.0, 0.0]), dtype=float),
            radius=float(entry["radius"]),
        )
        for entry in doc.get("collision_spheres", [])
    ]
    return RobotModel(joints, links, task_frames, spheres)


def load_robot_file(path) -> RobotModel:
    with open(path) as f:
        return load_robot_model(f.read())


def reference_robot() -> RobotModel:
    """The 23-DoF arm-hand reference model shipped with the package.

    Link lengths are plausible but not calibrated against any real robot.
    """
    text = resources.files("fabricgrasp.data").joinpath("robot.yaml").read_text()
    return load_robot_model(text)
