import numpy as np
import pytest

from fabricgrasp.distill import (
    DaggerConfig,
    GaussianAction,
    LinearPolicy,
    MaskSpec,
    MlpPolicy,
    ToyLineEnv,
    aux_loss,
    build_stereo_attention_mask,
    dagger_iteration,
    fd_gradient,
    kl_action_loss,
    load_checkpoint,
    run_distillation,
    save_checkpoint,
    scripted_line_teacher,
)


def g(mean, std):
    return GaussianAction(np.asarray(mean, dtype=float), np.asarray(std, dtype=float))


# -- KL ----------------------------------------------------------------------


def test_kl_zero_for_identical():
    a = g(np.arange(11.0), np.full(11, 0.1))
    assert kl_action_loss(a, g(a.mean.copy(), a.stddev.copy())) == pytest.approx(0.0, abs=1e-15)


def test_kl_unit_sigma_unit_mean_diff():
    mu = np.zeros(11)
    mu2 = mu.copy()
    mu2[0] += 1.0
    assert kl_action_loss(g(mu2, np.ones(11)), g(mu, np.ones(11))) == pytest.approx(0.5)


def test_kl_inverse_variance_weighting():
    std = np.ones(11)
    std[0] = 2.0
    mu = np.zeros(11)
    mu2 = mu.copy()
    mu2[0] += 2.0
    # sigma^2 = 4, mean gap 2 -> (1/2) * 4/4 = 1/2
    assert kl_action_loss(g(mu2, std), g(mu, std)) == pytest.approx(0.5)


def test_kl_matches_reduced_form_when_stddevs_equal():
    rng = np.random.default_rng(0)
    for _ in range(2000):
        d = rng.integers(1, 12)
        std = rng.uniform(0.05, 2.0, d)
        m1, m2 = rng.normal(0, 1, (2, d))
        full = kl_action_loss(g(m1, std), g(m2, std))
        reduced = 0.5 * np.sum((m1 - m2) ** 2 / std ** 2)
        assert abs(full - reduced) < 1e-9


def test_kl_nonnegative_zero_iff_identical():
    rng = np.random.default_rng(1)
    for _ in range(2000):
        d = rng.integers(1, 12)
        s = g(rng.normal(0, 1, d), rng.uniform(0.05, 2.0, d))
        t = g(rng.normal(0, 1, d), rng.uniform(0.05, 2.0, d))
        kl = kl_action_loss(s, t)
        assert kl >= 0.0
        if kl < 1e-12:
            np.testing.assert_allclose(s.mean, t.mean, atol=1e-5)
            np.testing.assert_allclose(s.stddev, t.stddev, atol=1e-5)


def test_kl_lower_variance_error_costs_more():
    std = np.array([0.05, 0.5])
    base = np.zeros(2)
    err_low = base.copy()
    err_low[0] += 0.1
    err_high = base.copy()
    err_high[1] += 0.1
    teacher = g(base, std)
    assert kl_action_loss(g(err_low, std), teacher) > kl_action_loss(g(err_high, std), teacher)


def test_kl_validation():
    with pytest.raises(ValueError):
        g(np.zeros(3), np.array([0.1, 0.0, 0.1]))
    with pytest.raises(ValueError):
        kl_action_loss(g(np.zeros(3), np.ones(3)), g(np.zeros(4), np.ones(4)))


# -- aux loss -------------------------------------------------------------------


def test_aux_loss_values():
    assert aux_loss(np.ones(3), np.ones(3)) == 0.0
    assert aux_loss(np.array([3.0, 4.0, 0.0]), np.zeros(3)) == pytest.approx(5.0)


def test_aux_loss_homogeneous():
    rng = np.random.default_rng(2)
    d = rng.normal(0, 1, 3)
    for alpha in (0.0, 0.3, 2.5):
        assert aux_loss(alpha * d, np.zeros(3)) == pytest.approx(alpha * np.linalg.norm(d))


# -- attention mask ---------------------------------------------------------------


def brute_force_mask(n):
    total = 2 * n + 1
    side = ["embed"] + ["left"] * n + ["right"] * n
    m = np.zeros((total, total), dtype=bool)
    for i in range(total):
        for j in range(total):
            if side[i] == "embed":
                m[i, j] = True
            elif side[i] == "left":
                m[i, j] = side[j] in ("embed", "right")
            else:
                m[i, j] = side[j] in ("embed", "left")
    return m


@pytest.mark.parametrize("n", [1, 2, 8, 128])
def test_mask_matches_brute_force(n):
    got = build_stereo_attention_mask(MaskSpec(n))
    np.testing.assert_array_equal(got, brute_force_mask(n))


def test_mask_n1_explicit():
    np.testing.assert_array_equal(
        build_stereo_attention_mask(MaskSpec(1)),
        np.array([[True, True, True], [True, False, True], [True, True, False]]),
    )


def test_mask_left_right_swap_symmetry():
    for n in (1, 3, 7):
        m = build_stereo_attention_mask(MaskSpec(n))
        perm = np.r_[0, np.arange(1 + n, 2 * n + 1), np.arange(1, 1 + n)]
        np.testing.assert_array_equal(m, m[np.ix_(perm, perm)])


def test_mask_rejects_bad_n():
    with pytest.raises(ValueError):
        MaskSpec(0)


# -- gradients ----------------------------------------------------------------


@pytest.mark.parametrize("cls,kwargs", [
    (LinearPolicy, {}),
    (MlpPolicy, {"hidden": 8}),
])
def test_analytic_gradients_match_fd(cls, kwargs):
    rng = np.random.default_rng(3)
    policy = cls(obs_dim=2, act_dim=1, aux_dim=3, rng=rng, **kwargs)
    for _ in range(100):
        policy.set_params(rng.normal(0, 0.5, policy.get_params().size))
        obs = rng.normal(0, 1, 2)
        teacher = g(rng.normal(0, 1, 1), np.array([0.1]))
        x_obj = rng.normal(0, 1, 3)
        ga = policy.grad(obs, teacher, x_obj)
        gf = fd_gradient(policy, obs, teacher, x_obj)
        denom = max(np.linalg.norm(gf), 1.0)
        assert np.linalg.norm(ga - gf) / denom < 1e-4


# -- DAgger -------------------------------------------------------------------


def test_student_cloned_from_teacher_has_zero_action_loss():
    env = ToyLineEnv(seed=5)
    teacher = scripted_line_teacher(kp=2.0)
    student = LinearPolicy(obs_dim=2, act_dim=1, aux_dim=3)
    student.set_params(np.concatenate([[-2.0, 2.0], [0.0], np.zeros(6), np.zeros(3)]))
    m = dagger_iteration(env, teacher, student, DaggerConfig(batch=32, learning_rate=0.0))
    assert m.l_action == pytest.approx(0.0, abs=1e-20)


def test_zero_learning_rate_leaves_params_unchanged():
    env = ToyLineEnv(seed=6)
    teacher = scripted_line_teacher()
    student = LinearPolicy(obs_dim=2, act_dim=1, rng=np.random.default_rng(9))
    before = student.get_params().copy()
    dagger_iteration(env, teacher, student, DaggerConfig(batch=16, learning_rate=0.0))
    np.testing.assert_array_equal(student.get_params(), before)


def test_rollouts_tagged_as_student_driven():
    trace = []
    run_distillation(iterations=2, batch=8, trace=trace)
    assert len(trace) == 16
    assert all(r["action_source"] == "student" for r in trace)


def test_linear_student_converges_to_normal_equations():
    trace = []
    history, student = run_distillation(iterations=50, batch=64, lr=0.01,
                                        seed=0, trace=trace)
    assert history[-1].l_action < 1e-3
    # Normal equations on the visited observations with the teacher's labels.
    obs = np.array([r["obs"] for r in trace])
    X = np.hstack([obs, np.ones((len(obs), 1))])
    teacher = scripted_line_teacher()
    y = np.array([teacher(o)[0].mean[0] for o in obs])
    sol, *_ = np.linalg.lstsq(X, y, rcond=None)
    got = np.r_[student.W.ravel(), student.b]
    np.testing.assert_allclose(got, sol, atol=1e-2)


def test_mlp_student_loss_decreases():
    env = ToyLineEnv(seed=7)
    teacher = scripted_line_teacher()
    student = MlpPolicy(obs_dim=2, act_dim=1, hidden=16, rng=np.random.default_rng(4))
    cfg = DaggerConfig(batch=32, learning_rate=0.005)
    losses = [dagger_iteration(env, teacher, student, cfg).l_action for _ in range(60)]
    assert losses[-1] < 0.1 * losses[0]


def test_loss_total_is_sum():
    env = ToyLineEnv(seed=8)
    teacher = scripted_line_teacher()
    student = LinearPolicy(obs_dim=2, act_dim=1)
    m = dagger_iteration(env, teacher, student, DaggerConfig(batch=8, learning_rate=0.0))
    assert m.total == pytest.approx(m.l_action + m.l_aux)
    assert m.l_action >= 0 and m.l_aux >= 0


def test_checkpoint_roundtrip(tmp_path):
    student = LinearPolicy(obs_dim=2, act_dim=1, rng=np.random.default_rng(11))
    path = tmp_path / "ckpt.yaml"
    save_checkpoint(student, path)
    other = LinearPolicy(obs_dim=2, act_dim=1, rng=np.random.default_rng(12))
    load_checkpoint(other, path)
    np.testing.assert_array_equal(other.get_params(), student.get_params())
    wrong = MlpPolicy(obs_dim=2, act_dim=1)
    with pytest.raises(ValueError):
        load_checkpoint(wrong, path)
