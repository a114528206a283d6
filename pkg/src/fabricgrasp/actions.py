"""11-D action space: palm pose box + 5-D PCA hand subspace.

The PCA basis shipped in data/pca_basis.yaml is synthetic: it is computed
from a procedurally generated family of curl/spread hand poses (see
build_synthetic_basis). The downstream math is basis-agnostic.
"""

from __future__ import annotations

from dataclasses import dataclass
from importlib import resources

import numpy as np
import yaml

from .fabric import FabricTargets
from .kinematics import RobotModel


@dataclass(frozen=True)
class PcaBasis:
    basis: np.ndarray  # (5, 16), orthonormal rows, rad per unit coordinate
    mean: np.ndarray  # (16,) rad
    coord_bounds: np.ndarray  # (5, 2) per-coordinate (lo, hi)
    hand_lo: np.ndarray  # (16,) hand joint limits used for the final clamp
    hand_hi: np.ndarray

    def __post_init__(self):
        if np.linalg.matrix_rank(self.basis) != self.basis.shape[0]:
            raise ValueError("PCA basis rows must be linearly independent")

    def project(self, q_hand: np.ndarray) -> np.ndarray:
        """Least-squares coordinates of a hand configuration."""
        return np.linalg.lstsq(self.basis.T, np.asarray(q_hand) - self.mean, rcond=None)[0]

    def closure(self, q_hand: np.ndarray) -> float:
        """Range-weighted mean of the normalized PCA coordinates; ~0.2 for an
        open hand, ~0.9 fully curled. The weighting keeps the curl-dominated
        first coordinate from being diluted by the low-variance ones."""
        c = self.project(q_hand)
        lo, hi = self.coord_bounds[:, 0], self.coord_bounds[:, 1]
        return float(np.sum(c - lo) / np.sum(hi - lo))


@dataclass(frozen=True)
class ActionBox:
    palm_pos_bounds: np.ndarray  # (3, 2) meters
    palm_rot_bounds: np.ndarray  # (3, 2) rad (exponential coordinates)
    pca_bounds: np.ndarray  # (5, 2)

    def __post_init__(self):
        for b in (self.palm_pos_bounds, self.palm_rot_bounds, self.pca_bounds):
            if np.any(b[:, 1] <= b[:, 0]):
                raise ValueError("action box intervals must be nonempty")

    @property
    def bounds(self) -> np.ndarray:
        return np.vstack([self.palm_pos_bounds, self.palm_rot_bounds, self.pca_bounds])


def pca_to_hand(basis: PcaBasis, c: np.ndarray) -> np.ndarray:
    """Map PCA coordinates to 16 hand joint targets; clamps twice (coordinate
    bounds first, then hand joint limits)."""
    c = np.clip(np.asarray(c, dtype=float), basis.coord_bounds[:, 0], basis.coord_bounds[:, 1])
    q = basis.mean + basis.basis.T @ c
    return np.clip(q, basis.hand_lo, basis.hand_hi)


def decode_action(a: np.ndarray, box: ActionBox) -> FabricTargets:
    """Affine map of a normalized [-1, 1] action onto the target box."""
    a = np.clip(np.asarray(a, dtype=float), -1.0, 1.0)
    b = box.bounds
    center = 0.5 * (b[:, 0] + b[:, 1])
    half = 0.5 * (b[:, 1] - b[:, 0])
    target = center + a * half
    return FabricTargets(palm_pose=target[:6], pca=target[6:])


def encode_action(targets: FabricTargets, box: ActionBox) -> np.ndarray:
    """Inverse of decode_action on the open box."""
    b = box.bounds
    center = 0.5 * (b[:, 0] + b[:, 1])
    half = 0.5 * (b[:, 1] - b[:, 0])
    flat = np.concatenate([targets.palm_pose, targets.pca])
    return (flat - center) / half


# -- synthetic basis construction ---------------------------------------------


def build_synthetic_basis(model: RobotModel, n_samples: int = 2000, seed: int = 7) -> PcaBasis:
    """PCA over a procedural curl/spread family of hand poses.

    Components are sign-flipped so the fully curled pose projects positively
    on every coordinate, which makes the normalized closure measure monotone
    in finger curl.
    """
    hand = model.hand_joint_indices
    lo = model.joint_lo[hand]
    hi = model.joint_hi[hand]
    n = len(hand)
    rng = np.random.default_rng(seed)

    flex = np.array([i for i, name in enumerate(j.name for j in model.hand_joints)
                     if not name.endswith("_abd")])
    abd = np.array([i for i, name in enumerate(j.name for j in model.hand_joints)
                    if name.endswith("_abd")])

    samples = np.zeros((n_samples, n))
    curl = rng.uniform(0.0, 1.0, n_samples)
    spread = rng.uniform(-1.0, 1.0, n_samples)
    finger_gain = rng.uniform(0.7, 1.0, (n_samples, len(flex)))
    samples[:, flex] = curl[:, None] * finger_gain * (0.9 * hi[flex])
    abd_pattern = np.linspace(1.0, -1.0, len(abd))
    samples[:, abd] = spread[:, None] * abd_pattern * 0.8 * hi[abd]
    samples += rng.normal(0.0, 0.03, samples.shape)
    samples = np.clip(samples, lo, hi)

    mean = samples.mean(axis=0)
    _, _, vt = np.linalg.svd(samples - mean, full_matrices=False)
    basis = vt[:5]

    curled = np.clip(mean * 0 + 0.9 * hi, lo, hi)
    signs = np.sign(basis @ (curled - mean))
    signs[signs == 0] = 1.0
    basis = basis * signs[:, None]

    coords = (samples - mean) @ basis.T
    bounds = np.stack([coords.min(axis=0), coords.max(axis=0)], axis=1)
    return PcaBasis(basis=basis, mean=mean, coord_bounds=bounds, hand_lo=lo, hand_hi=hi)


# -- serialization -------------------------------------------------------------


def basis_to_yaml(basis: PcaBasis) -> str:
    doc = {
        "basis": [[float(x) for x in row] for row in basis.basis],
        "mean": [float(x) for x in basis.mean],
        "coord_bounds": [[float(a), float(b)] for a, b in basis.coord_bounds],
        "hand_lo": [float(x) for x in basis.hand_lo],
        "hand_hi": [float(x) for x in basis.hand_hi],
    }
    return yaml.safe_dump(doc, sort_keys=False)


def basis_from_yaml(text: str) -> PcaBasis:
    doc = yaml.safe_load(text)
    return PcaBasis(
        basis=np.asarray(doc["basis"], dtype=float),
        mean=np.asarray(doc["mean"], dtype=float),
        coord_bounds=np.asarray(doc["coord_bounds"], dtype=float),
        hand_lo=np.asarray(doc["hand_lo"], dtype=float),
        hand_hi=np.asarray(doc["hand_hi"], dtype=float),
    )


def reference_basis() -> PcaBasis:
    text = resources.files("fabricgrasp.data").joinpath("pca_basis.yaml").read_text()
    return basis_from_yaml(text)


def box_from_doc(doc: dict) -> ActionBox:
    return ActionBox(
        palm_pos_bounds=np.asarray(doc["palm_pos_bounds"], dtype=float),
        palm_rot_bounds=np.asarray(doc["palm_rot_bounds"], dtype=float),
        pca_bounds=np.asarray(doc["pca_bounds"], dtype=float),
    )
