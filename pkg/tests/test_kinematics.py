import numpy as np
import pytest

from fabricgrasp.kinematics import RobotConfigError, load_robot_model

from conftest import PLANAR_1LINK


def test_minimal_planar_model_loads(planar_1link):
    assert planar_1link.dof == 1
    assert planar_1link.task_frame_names == ["tip"]


def test_limit_inversion_rejected():
    bad = PLANAR_1LINK.replace("lo: -3.14, hi: 3.14", "lo: 1.0, hi: 1.0")
    with pytest.raises(RobotConfigError, match="lo"):
        load_robot_model(bad)


def test_dangling_frame_reference_rejected():
    bad = PLANAR_1LINK.replace("tip: tip_link", "tip: no_such_link")
    with pytest.raises(RobotConfigError, match="no_such_link"):
        load_robot_model(bad)


def test_parse_error_reported():
    with pytest.raises(RobotConfigError, match="parse"):
        load_robot_model("joints: [unclosed")


def test_non_unit_axis_rejected():
    bad = PLANAR_1LINK.replace("axis: [0, 0, 1]", "axis: [0, 0, 2]")
    with pytest.raises(RobotConfigError, match="unit"):
        load_robot_model(bad)


def test_reference_model_shape(model):
    assert model.dof == 23
    assert len(model.arm_joints) == 7
    assert len(model.hand_joints) == 16
    assert len(model.task_frames) == 5
    assert "palm" in model.task_frames


def test_fk_zero_configuration_is_fixed_composition(model):
    fk = model.forward_kinematics(np.zeros(model.dof))
    # With q = 0 the reference arm is a straight stack of z translations.
    total_z = 0.1575 + 0.2025 + 0.2045 + 0.2155 + 0.1845 + 0.2155 + 0.081 + 0.09
    np.testing.assert_allclose(fk["palm"].pos, [0.0, 0.0, total_z], atol=1e-12)
    np.testing.assert_allclose(fk["palm"].rot, np.eye(3), atol=1e-12)


def test_planar_1link_closed_form(planar_1link):
    for theta in (0.0, 0.3, -1.2, 2.5):
        fk = planar_1link.forward_kinematics(np.array([theta]))
        np.testing.assert_allclose(
            fk["tip"].pos, [np.cos(theta), np.sin(theta), 0.0], atol=1e-12
        )


def test_rotations_orthonormal_determinant_one(model):
    rng = np.random.default_rng(3)
    for _ in range(1000):
        q = rng.uniform(model.joint_lo, model.joint_hi)
        res = model.fk(q)
        for t in res.transforms:
            r = t.rot
            assert np.abs(r @ r.T - np.eye(3)).max() < 1e-9
            assert abs(np.linalg.det(r) - 1.0) < 1e-9


def test_task_points_match_fk_origins(model):
    q = np.zeros(model.dof)
    pts = model.task_points(q)
    fk = model.forward_kinematics(q)
    for i, name in enumerate(model.task_frame_names):
        np.testing.assert_allclose(pts[i], fk[name].pos, atol=1e-15)


def test_task_points_finite_at_lower_limits(model):
    pts = model.task_points(model.joint_lo)
    assert np.all(np.isfinite(pts))


def test_fingertip_joint_only_moves_its_own_point(model):
    q = np.zeros(model.dof)
    base = model.task_points(q)
    k = model._joint_index["ring_pip"]
    q2 = q.copy()
    q2[k] += 0.3
    moved = model.task_points(q2)
    delta = np.linalg.norm(moved - base, axis=1)
    names = model.task_frame_names
    for i, name in enumerate(names):
        if name == "ring_tip":
            assert delta[i] > 1e-3
        else:
            assert delta[i] == 0.0


def test_planar_1link_jacobian_closed_form(planar_1link):
    jac = planar_1link.jacobian(np.array([0.0]), "tip")
    np.testing.assert_allclose(jac[:3, 0], [0.0, 1.0, 0.0], atol=1e-12)
    np.testing.assert_allclose(jac[3:, 0], [0.0, 0.0, 1.0], atol=1e-12)


def test_jacobian_matches_finite_differences(model, planar_2link):
    rng = np.random.default_rng(11)
    cases = []
    for _ in range(80):
        cases.append((model, rng.uniform(model.joint_lo, model.joint_hi),
                      rng.choice(model.task_frame_names)))
    for _ in range(20):
        cases.append((planar_2link, rng.uniform(-3, 3, size=2), "tip"))
    h = 1e-6
    for mdl, q, frame in cases:
        jac = mdl.jacobian(q, frame)[:3]
        fd = np.zeros_like(jac)
        for i in range(mdl.dof):
            e = np.zeros(mdl.dof)
            e[i] = h
            fd[:, i] = (
                mdl.fk(q + e).frame_transform(frame).pos
                - mdl.fk(q - e).frame_transform(frame).pos
            ) / (2 * h)
        assert np.abs(jac - fd).max() < 1e-5


def test_jacobian_chain_topology(model):
    q = np.random.default_rng(5).uniform(model.joint_lo, model.joint_hi)
    hand = set(model.hand_joint_indices.tolist())
    j_tip = model.jacobian(q, "index_tip")
    # Arm joints move the fingertips.
    assert np.linalg.norm(j_tip[:3, :7]) > 1e-6
    # Hand joints never move the palm.
    j_palm = model.jacobian(q, "palm")
    for k in hand:
        np.testing.assert_allclose(j_palm[:, k], 0.0, atol=1e-15)
    # Other fingers' joints never move this fingertip.
    k = model._joint_index["thumb_mcp"]
    np.testing.assert_allclose(j_tip[:, k], 0.0, atol=1e-15)


def test_unknown_frame_raises(model):
    with pytest.raises(KeyError):
        model.jacobian(np.zeros(model.dof), "nope")


def test_dimension_mismatch_raises(model):
    with pytest.raises(ValueError):
        model.fk(np.zeros(5))


def test_task_points_lipschitz(model):
    # Each task point moves at most (summed link length) * |dq|_1.
    total_len = sum(np.linalg.norm(l.transform.pos) for l in model.links)
    rng = np.random.default_rng(17)
    for _ in range(200):
        q = rng.uniform(model.joint_lo, model.joint_hi)
        dq = rng.normal(0, 0.01, model.dof)
        d_pts = model.task_points(q + dq) - model.task_points(q)
        bound = total_len * np.abs(dq).sum() + 1e-12
        assert np.linalg.norm(d_pts, axis=1).max() <= bound
