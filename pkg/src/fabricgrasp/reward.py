"""Four-term grasp reward: hand-object proximity, goal reaching, lift, and a
finger-curl regularizer. Beta coefficients are stored as positive magnitudes;
the minus signs live in the formulas."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class RewardConfig:
    beta_obj_goal: float = 15.0  # ADR 15 -> 20
    beta_lift: float = 20.0  # unpublished; same scale as beta_obj_goal
    beta_curl: float = 0.01  # ADR 0.01 -> 0.05
    w_hand_obj: float = 1.0
    w_obj_goal: float = 2.0
    w_lift: float = 1.0
    w_curl: float = 1.0
    q_curl: np.ndarray = field(default_factory=lambda: np.zeros(16))

    def __post_init__(self):
        if min(self.beta_obj_goal, self.beta_lift, self.beta_curl) <= 0:
            raise ValueError("all beta coefficients must be positive")


@dataclass(frozen=True)
class RewardBreakdown:
    d_hand_obj: float
    r_hand_obj: float
    r_obj_goal: float
    r_lift: float
    r_curl: float
    total: float


def hand_obj_distance(points: np.ndarray, x_obj: np.ndarray) -> float:
    """Max Euclidean distance from the hand task points to the object center."""
    points = np.asarray(points, dtype=float)
    return float(np.max(np.linalg.norm(points - np.asarray(x_obj, dtype=float), axis=1)))


def compute_reward(cfg: RewardConfig, points: np.ndarray, q_hand: np.ndarray,
                   x_obj: np.ndarray, x_goal: np.ndarray) -> RewardBreakdown:
    x_obj = np.asarray(x_obj, dtype=float)
    x_goal = np.asarray(x_goal, dtype=float)
    d = hand_obj_distance(points, x_obj)
    r_hand_obj = float(np.exp(-10.0 * d))
    r_obj_goal = float(np.exp(-cfg.beta_obj_goal * np.linalg.norm(x_obj - x_goal)))
    r_lift = float(np.exp(-cfg.beta_lift * (x_obj[2] - x_goal[2]) ** 2))
    dq = np.asarray(q_hand, dtype=float) - cfg.q_curl
    r_curl = float(-cfg.beta_curl * (dq @ dq))
    total = (cfg.w_hand_obj * r_hand_obj + cfg.w_obj_goal * r_obj_goal
             + cfg.w_lift * r_lift + cfg.w_curl * r_curl)
    return RewardBreakdown(
        d_hand_obj=d,
        r_hand_obj=r_hand_obj,
        r_obj_goal=r_obj_goal,
        r_lift=r_lift,
        r_curl=r_curl,
        total=total,
    )
