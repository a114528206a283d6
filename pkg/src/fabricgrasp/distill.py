"""Teacher-student distillation: diagonal-Gaussian KL action loss, auxiliary
object-position loss, online DAgger over pluggable policies, small gradient-
checked approximators, and the stereo cross-attention mask.

The KL here is the full divergence including the conventional 1/2 factor;
with matched fixed variances it reduces to (1/2) sum dmu_i^2 / sigma_i^2, a
constant multiple of the common reduced form, so the minimizer is unchanged.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import yaml


@dataclass
class GaussianAction:
    mean: np.ndarray
    stddev: np.ndarray

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=float)
        self.stddev = np.asarray(self.stddev, dtype=float)
        if self.mean.shape != self.stddev.shape:
            raise ValueError("mean and stddev dimensions must match")
        if np.any(self.stddev <= 0):
            raise ValueError("stddev must be strictly positive")


@dataclass
class LossBreakdown:
    l_action: float
    l_aux: float

    @property
    def total(self) -> float:
        return self.l_action + self.l_aux


def kl_action_loss(student: GaussianAction, teacher: GaussianAction) -> float:
    if student.mean.shape != teacher.mean.shape:
        raise ValueError("student/teacher dimensions must match")
    s2 = student.stddev ** 2
    t2 = teacher.stddev ** 2
    dmu = student.mean - teacher.mean
    return float(np.sum(np.log(teacher.stddev / student.stddev)
                        + (s2 + dmu ** 2) / (2.0 * t2) - 0.5))


def aux_loss(x_hat: np.ndarray, x_obj: np.ndarray) -> float:
    return float(np.linalg.norm(np.asarray(x_hat, dtype=float) - np.asarray(x_obj, dtype=float)))


# -- attention mask -------------------------------------------------------------


@dataclass(frozen=True)
class MaskSpec:
    tokens_per_image: int

    def __post_init__(self):
        if self.tokens_per_image < 1:
            raise ValueError("tokens_per_image must be >= 1")

    @property
    def total(self) -> int:
        return 2 * self.tokens_per_image + 1


def build_stereo_attention_mask(spec: MaskSpec) -> np.ndarray:
    """Token order [embed, left 1..N, right 1..N]; mask[i, j] means i may
    attend to j. The embed token attends everywhere; image tokens attend to
    the embed token and the other image only."""
    n = spec.tokens_per_image
    total = spec.total
    mask = np.zeros((total, total), dtype=bool)
    mask[0, :] = True
    left = slice(1, 1 + n)
    right = slice(1 + n, total)
    mask[left, 0] = True
    mask[right, 0] = True
    mask[left, right] = True
    mask[right, left] = True
    return mask


# -- toy approximators ------------------------------------------------------------


class LinearPolicy:
    """Affine action mean and aux head; fixed stddev."""

    def __init__(self, obs_dim: int, act_dim: int, aux_dim: int = 3,
                 stddev: float = 0.1, rng: np.random.Generator | None = None):
        rng = rng or np.random.default_rng(0)
        self.W = 0.1 * rng.normal(size=(act_dim, obs_dim))
        self.b = np.zeros(act_dim)
        self.A = 0.1 * rng.normal(size=(aux_dim, obs_dim))
        self.c = np.zeros(aux_dim)
        self.stddev = np.full(act_dim, stddev)

    def __call__(self, obs: np.ndarray):
        obs = np.asarray(obs, dtype=float)
        return GaussianAction(self.W @ obs + self.b, self.stddev.copy()), self.A @ obs + self.c

    def get_params(self) -> np.ndarray:
        return np.concatenate([self.W.ravel(), self.b, self.A.ravel(), self.c])

    def set_params(self, theta: np.ndarray) -> None:
        theta = np.asarray(theta, dtype=float)
        i = 0
        for arr in (self.W, self.b, self.A, self.c):
            arr[...] = theta[i:i + arr.size].reshape(arr.shape)
            i += arr.size
        if i != theta.size:
            raise ValueError("parameter vector size mismatch")

    def grad(self, obs, teacher: GaussianAction, x_obj) -> np.ndarray:
        """Analytic gradient of kl + aux at one sample, flattened like
        get_params. Assumes the teacher stddev is fixed (no grad through it)."""
        obs = np.asarray(obs, dtype=float)
        mu = self.W @ obs + self.b
        dmu = (mu - teacher.mean) / teacher.stddev ** 2
        gW = np.outer(dmu, obs)
        gb = dmu
        r = (self.A @ obs + self.c) - np.asarray(x_obj, dtype=float)
        nr = np.linalg.norm(r)
        u = r / nr if nr > 1e-12 else np.zeros_like(r)
        gA = np.outer(u, obs)
        gc = u
        return np.concatenate([gW.ravel(), gb, gA.ravel(), gc])


class MlpPolicy:
    """One hidden tanh layer; same interface as LinearPolicy."""

    def __init__(self, obs_dim: int, act_dim: int, aux_dim: int = 3,
                 hidden: int = 64, stddev: float = 0.1,
                 rng: np.random.Generator | None = None):
        rng = rng or np.random.default_rng(0)
        self.W1 = rng.normal(scale=1.0 / np.sqrt(obs_dim), size=(hidden, obs_dim))
        self.b1 = np.zeros(hidden)
        self.W2 = rng.normal(scale=1.0 / np.sqrt(hidden), size=(act_dim, hidden))
        self.b2 = np.zeros(act_dim)
        self.A = rng.normal(scale=1.0 / np.sqrt(hidden), size=(aux_dim, hidden))
        self.c = np.zeros(aux_dim)
        self.stddev = np.full(act_dim, stddev)

    def _forward(self, obs):
        z = self.W1 @ obs + self.b1
        h = np.tanh(z)
        return h, self.W2 @ h + self.b2, self.A @ h + self.c

    def __call__(self, obs: np.ndarray):
        obs = np.asarray(obs, dtype=float)
        _, mu, aux = self._forward(obs)
        return GaussianAction(mu, self.stddev.copy()), aux

    def get_params(self) -> np.ndarray:
        return np.concatenate([self.W1.ravel(), self.b1, self.W2.ravel(),
                               self.b2, self.A.ravel(), self.c])

    def set_params(self, theta: np.ndarray) -> None:
        theta = np.asarray(theta, dtype=float)
        i = 0
        for arr in (self.W1, self.b1, self.W2, self.b2, self.A, self.c):
            arr[...] = theta[i:i + arr.size].reshape(arr.shape)
            i += arr.size
        if i != theta.size:
            raise ValueError("parameter vector size mismatch")

    def grad(self, obs, teacher: GaussianAction, x_obj) -> np.ndarray:
        obs = np.asarray(obs, dtype=float)
        h, mu, aux = self._forward(obs)
        dmu = (mu - teacher.mean) / teacher.stddev ** 2
        r = aux - np.asarray(x_obj, dtype=float)
        nr = np.linalg.norm(r)
        u = r / nr if nr > 1e-12 else np.zeros_like(r)
        gW2 = np.outer(dmu, h)
        gb2 = dmu
        gA = np.outer(u, h)
        gc = u
        dh = self.W2.T @ dmu + self.A.T @ u
        dz = dh * (1.0 - h ** 2)
        gW1 = np.outer(dz, obs)
        gb1 = dz
        return np.concatenate([gW1.ravel(), gb1, gW2.ravel(), gb2, gA.ravel(), gc])


def loss_at(policy, obs, teacher: GaussianAction, x_obj) -> float:
    action, aux = policy(obs)
    return kl_action_loss(action, teacher) + aux_loss(aux, x_obj)


def fd_gradient(policy, obs, teacher, x_obj, h: float = 1e-5) -> np.ndarray:
    """Central finite differences over the flattened parameters."""
    theta = policy.get_params()
    g = np.zeros_like(theta)
    for i in range(theta.size):
        for sign in (1.0, -1.0):
            t = theta.copy()
            t[i] += sign * h
            policy.set_params(t)
            g[i] += sign * loss_at(policy, obs, teacher, x_obj)
    policy.set_params(theta)
    return g / (2.0 * h)


# -- DAgger --------------------------------------------------------------------


@dataclass
class DaggerConfig:
    batch: int = 64
    learning_rate: float = 0.1


@dataclass
class IterationMetrics:
    l_action: float
    l_aux: float
    total: float
    steps: int


class ToyLineEnv:
    """1-D point mass on a line, driven directly by the action mean.

    Observation is [position, target]; the "object" whose position the aux
    head predicts sits at the target. Teacher and student see the same
    observation, which keeps the DAgger regression convex for linear
    students.
    """

    def __init__(self, seed: int = 0, gain: float = 0.1, horizon: int = 8):
        self._rng = np.random.default_rng(seed)
        self.gain = gain
        self.horizon = horizon
        self._age = 0
        self.reset()

    def reset(self) -> np.ndarray:
        self.x = self._rng.uniform(-1.0, 1.0)
        self.target = self._rng.uniform(-1.0, 1.0)
        self._age = 0
        return self.observe()

    def observe(self) -> np.ndarray:
        return np.array([self.x, self.target])

    def object_position(self) -> np.ndarray:
        return np.array([self.target, 0.0, 0.0])

    def step(self, action: float) -> np.ndarray:
        self.x += self.gain * float(action)
        self._age += 1
        # Short episodes keep position and target decorrelated, which keeps
        # the induced regression well conditioned.
        if self._age >= self.horizon or abs(self.x - self.target) < 1e-3:
            self.reset()
        return self.observe()


def scripted_line_teacher(kp: float = 2.0, stddev: float = 0.1):
    """Proportional controller toward the target; the reference teacher for
    the toy convergence experiments."""

    def teacher(obs: np.ndarray):
        obs = np.asarray(obs, dtype=float)
        mean = np.array([kp * (obs[1] - obs[0])])
        return GaussianAction(mean, np.array([stddev])), np.array([obs[1], 0.0, 0.0])

    return teacher


def dagger_iteration(env, teacher, student, config: DaggerConfig,
                     trace: list | None = None) -> IterationMetrics:
    """One online DAgger iteration: the student drives the rollout, the
    teacher labels every visited observation, and the accumulated gradient is
    applied in a single step."""
    obs = env.observe()
    grad = np.zeros_like(student.get_params())
    l_action = 0.0
    l_aux = 0.0
    for _ in range(config.batch):
        teacher_action, _ = teacher(obs)
        student_action, aux = student(obs)
        x_obj = env.object_position()
        l_action += kl_action_loss(student_action, teacher_action)
        l_aux += aux_loss(aux, x_obj)
        grad += student.grad(obs, teacher_action, x_obj)
        if trace is not None:
            trace.append({"type": "trace", "kind": "dagger_step",
                          "action_source": "student",
                          "obs": [float(v) for v in np.atleast_1d(obs)]})
        obs = env.step(student_action.mean[0] if student_action.mean.size == 1
                       else student_action.mean)
    n = config.batch
    student.set_params(student.get_params() - config.learning_rate * grad / n)
    return IterationMetrics(l_action=l_action / n, l_aux=l_aux / n,
                            total=(l_action + l_aux) / n, steps=n)


def run_distillation(iterations: int = 50, batch: int = 64, lr: float = 0.01,
                     seed: int = 0, trace: list | None = None):
    """Linear student imitating the scripted line teacher; returns the metric
    history and the trained student."""
    env = ToyLineEnv(seed=seed)
    teacher = scripted_line_teacher()
    student = LinearPolicy(obs_dim=2, act_dim=1, aux_dim=3,
                           rng=np.random.default_rng(seed + 1))
    cfg = DaggerConfig(batch=batch, learning_rate=lr)
    history = [dagger_iteration(env, teacher, student, cfg, trace=trace)
               for _ in range(iterations)]
    return history, student


# -- checkpoints -------------------------------------------------------------------


def save_checkpoint(policy, path) -> None:
    doc = {
        "class": type(policy).__name__,
        "params": [float(x) for x in policy.get_params()],
        "stddev": [float(x) for x in policy.stddev],
    }
    with open(path, "w") as f:
        yaml.safe_dump(doc, f, sort_keys=False)


def load_checkpoint(policy, path) -> None:
    with open(path) as f:
        doc = yaml.safe_load(f)
    if doc["class"] != type(policy).__name__:
        raise ValueError(f"checkpoint is for {doc['class']}, got {type(policy).__name__}")
    policy.set_params(np.asarray(doc["params"], dtype=float))
    policy.stddev = np.asarray(doc["stddev"], dtype=float)
