import math

import numpy as np
import pytest

from fabricgrasp.reward import RewardConfig, compute_reward, hand_obj_distance


def oracle(cfg, points, q_hand, x_obj, x_goal):
    """Straight transcription of the four reward formulas, scalar math only."""
    d = max(
        math.sqrt(sum((p[k] - x_obj[k]) ** 2 for k in range(3))) for p in points
    )
    r_ho = math.exp(-10.0 * d)
    r_og = math.exp(
        -cfg.beta_obj_goal
        * math.sqrt(sum((x_obj[k] - x_goal[k]) ** 2 for k in range(3)))
    )
    r_l = math.exp(-cfg.beta_lift * (x_obj[2] - x_goal[2]) ** 2)
    r_c = -cfg.beta_curl * sum((a - b) ** 2 for a, b in zip(q_hand, cfg.q_curl))
    return (
        cfg.w_hand_obj * r_ho
        + cfg.w_obj_goal * r_og
        + cfg.w_lift * r_l
        + cfg.w_curl * r_c
    )


def test_matches_oracle_on_random_inputs():
    cfg = RewardConfig()
    rng = np.random.default_rng(9)
    for _ in range(1000):
        points = rng.uniform(-1, 1, (5, 3))
        q_hand = rng.uniform(-0.5, 1.8, 16)
        x_obj = rng.uniform(-1, 1, 3)
        x_goal = rng.uniform(-1, 1, 3)
        got = compute_reward(cfg, points, q_hand, x_obj, x_goal)
        assert abs(got.total - oracle(cfg, points, q_hand, x_obj, x_goal)) < 1e-12


def test_hand_obj_distance_is_max_over_points():
    pts = np.array([[0.0, 0, 0], [3.0, 0, 0], [0, 4.0, 0]])
    assert hand_obj_distance(pts, np.zeros(3)) == 4.0


def test_perfect_pose_rewards():
    cfg = RewardConfig()
    pts = np.zeros((5, 3))
    out = compute_reward(cfg, pts, np.zeros(16), np.zeros(3), np.zeros(3))
    assert out.r_hand_obj == 1.0
    assert out.r_obj_goal == 1.0
    assert out.r_lift == 1.0
    assert out.r_curl == 0.0
    assert out.total == cfg.w_hand_obj + cfg.w_obj_goal + cfg.w_lift


def test_proximity_decays_with_distance():
    cfg = RewardConfig()
    goal = np.zeros(3)
    vals = []
    for d in (0.0, 0.1, 0.3, 0.6):
        pts = np.tile([d, 0, 0], (5, 1))
        vals.append(compute_reward(cfg, pts, np.zeros(16), goal, goal).r_hand_obj)
    assert all(b < a for a, b in zip(vals, vals[1:]))
    assert abs(vals[1] - math.exp(-1.0)) < 1e-14


def test_curl_penalty_nonpositive():
    cfg = RewardConfig()
    rng = np.random.default_rng(1)
    for _ in range(100):
        out = compute_reward(cfg, np.zeros((5, 3)), rng.normal(0, 1, 16),
                             np.zeros(3), np.zeros(3))
        assert out.r_curl <= 0.0


def test_lift_uses_height_gap_only():
    cfg = RewardConfig()
    pts = np.zeros((5, 3))
    a = compute_reward(cfg, pts, np.zeros(16), np.array([0.0, 0, 0.1]), np.array([0.0, 0, 0.3]))
    b = compute_reward(cfg, pts, np.zeros(16), np.array([0.5, 0.5, 0.1]), np.array([0.0, 0, 0.3]))
    assert a.r_lift == b.r_lift
    assert abs(a.r_lift - math.exp(-cfg.beta_lift * 0.04)) < 1e-14


def test_nonpositive_beta_rejected():
    with pytest.raises(ValueError):
        RewardConfig(beta_obj_goal=-15.0)
    with pytest.raises(ValueError):
        RewardConfig(beta_curl=0.0)
