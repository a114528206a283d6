"""Small SO(3) / rigid-transform helpers used by the kinematics and fabric code.

Rotations are plain 3x3 numpy arrays internally; quaternions (w, x, y, z)
only appear at exchange boundaries (wire protocol, config files).
"""

from __future__ import annotations

import numpy as np

_EPS = 1e-12


def rotation_about_axis(axis: np.ndarray, angle: float) -> np.ndarray:
    """Rodrigues rotation about a unit axis."""
    x, y, z = axis
    c, s = np.cos(angle), np.sin(angle)
    cc = 1.0 - c
    return np.array(
        [
            [c + x * x * cc, x * y * cc - z * s, x * z * cc + y * s],
            [y * x * cc + z * s, c + y * y * cc, y * z * cc - x * s],
            [z * x * cc - y * s, z * y * cc + x * s, c + z * z * cc],
        ]
    )


def rotation_from_rpy(roll: float, pitch: float, yaw: float) -> np.ndarray:
    """Extrinsic x-y-z (roll, pitch, yaw) rotation."""
    rx = rotation_about_axis(np.array([1.0, 0.0, 0.0]), roll)
    ry = rotation_about_axis(np.array([0.0, 1.0, 0.0]), pitch)
    rz = rotation_about_axis(np.array([0.0, 0.0, 1.0]), yaw)
    return rz @ ry @ rx


def rotation_from_rotvec(v: np.ndarray) -> np.ndarray:
    """Exponential map: rotation vector (exponential coordinates) -> matrix."""
    angle = float(np.linalg.norm(v))
    if angle < _EPS:
        return np.eye(3)
    return rotation_about_axis(v / angle, angle)


def rotvec_from_rotation(r: np.ndarray) -> np.ndarray:
    """Log map: rotation matrix -> rotation vector. Stable near identity."""
    cos_angle = np.clip((np.trace(r) - 1.0) / 2.0, -1.0, 1.0)
    angle = float(np.arccos(cos_angle))
    if angle < 1e-9:
        return np.zeros(3)
    if np.pi - angle < 1e-6:
        # Near pi the off-diagonal extraction degenerates; recover the axis
        # from the symmetric part.
        m = (r + np.eye(3)) / 2.0
        axis = np.sqrt(np.clip(np.diag(m), 0.0, None))
        # Fix signs using the largest component.
        k = int(np.argmax(axis))
        if axis[k] > 0:
            for i in range(3):
                if i != k and m[k, i] < 0:
                    axis[i] = -axis[i]
        axis = axis / max(np.linalg.norm(axis), _EPS)
        return angle * axis
    w = np.array([r[2, 1] - r[1, 2], r[0, 2] - r[2, 0], r[1, 0] - r[0, 1]])
    return angle / (2.0 * np.sin(angle)) * w


def quat_from_rotation(r: np.ndarray) -> np.ndarray:
    """Rotation matrix -> quaternion (w, x, y, z), w >= 0."""
    t = np.trace(r)
    if t > 0:
        s = np.sqrt(t + 1.0) * 2.0
        q = np.array(
            [
                0.25 * s,
                (r[2, 1] - r[1, 2]) / s,
                (r[0, 2] - r[2, 0]) / s,
                (r[1, 0] - r[0, 1]) / s,
            ]
        )
    else:
        i = int(np.argmax(np.diag(r)))
        j, k = (i + 1) % 3, (i + 2) % 3
        s = np.sqrt(max(1.0 + r[i, i] - r[j, j] - r[k, k], 0.0)) * 2.0
        q = np.empty(4)
        q[0] = (r[k, j] - r[j, k]) / s
        q[1 + i] = 0.25 * s
        q[1 + j] = (r[j, i] + r[i, j]) / s
        q[1 + k] = (r[k, i] + r[i, k]) / s
    if q[0] < 0:
        q = -q
    return q


class Transform:
    """Rigid transform (rotation matrix + translation)."""

    __slots__ = ("rot", "pos")

    def __init__(self, rot: np.ndarray | None = None, pos: np.ndarray | None = None):
        self.rot = np.eye(3) if rot is None else np.asarray(rot, dtype=float)
        self.pos = np.zeros(3) if pos is None else np.asarray(pos, dtype=float)

    def __matmul__(self, other: "Transform") -> "Transform":
        return Transform(self.rot @ other.rot, self.rot @ other.pos + self.pos)

    def apply(self, point: np.ndarray) -> np.ndarray:
        return self.rot @ np.asarray(point, dtype=float) + self.pos

    def copy(self) -> "Transform":
        return Transform(self.rot.copy(), self.pos.copy())
