"""TD3 actor-critic in numpy, replay buffer and the uniform random baseline."""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace

import numpy as np

from .nn import Adam, Mlp, load_mlp_text, save_mlp_text

FORMAT_TAG = "greyshield-td3 v1"


@dataclass(frozen=True)
class Td3Hyperparams:
    gamma: float = 0.7
    learning_rate: float = 0.000583
    batch_size: int = 16
    buffer_size: int = 1_000_000
    train_freq: int = 1
    gradient_steps: int = 1
    noise_std: float = 0.183
    target_noise: float = 0.2
    target_clip: float = 0.5
    policy_delay: int = 2
    polyak: float = 0.995
    hidden: tuple = (256, 256)
    learning_starts: int | None = None

    def __post_init__(self):
        if not 0 < self.gamma < 1:
            raise ValueError("gamma must lie in (0, 1)")
        if self.batch_size > self.buffer_size:
            raise ValueError("batch_size must not exceed buffer_size")
        if min(self.learning_rate, self.train_freq, self.gradient_steps, self.policy_delay) <= 0:
            raise ValueError("rates and frequencies must be positive")
        if not 0 <= self.polyak < 1:
            raise ValueError("polyak must lie in [0, 1)")

    @property
    def warmup(self) -> int:
        return self.batch_size if self.learning_starts is None else self.learning_starts


SAFE_HYPERPARAMS = Td3Hyperparams()
UNSAFE_HYPERPARAMS = Td3Hyperparams(gamma=0.9, learning_rate=0.0003833, batch_size=100,
                                    buffer_size=100_000, train_freq=2000,
                                    gradient_steps=2000, noise_std=0.329)


def hyperparams_for(method: str, **overrides) -> Td3Hyperparams:
    base = UNSAFE_HYPERPARAMS if method == "unsafe" else SAFE_HYPERPARAMS
    return replace(base, **overrides)


class ReplayBuffer:
    """FIFO ring buffer; uniform sampling with replacement."""

    def __init__(self, capacity: int, obs_dim: int, act_dim: int):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = int(capacity)
        self.s = np.zeros((self.capacity, obs_dim))
        self.a = np.zeros((self.capacity, act_dim))
        self.r = np.zeros(self.capacity)
        self.s2 = np.zeros((self.capacity, obs_dim))
        self.d = np.zeros(self.capacity)
        self.ptr = 0
        self.size = 0
        self.total = 0

    def __len__(self):
        return self.size

    def add(self, s, a, r, s2, done) -> None:
        i = self.ptr
        self.s[i], self.a[i], self.r[i], self.s2[i], self.d[i] = s, a, r, s2, float(done)
        self.ptr = (self.ptr + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)
        self.total += 1

    def add_tuple(self, tup) -> None:
        self.add(tup.s, tup.a, tup.r, tup.s2, tup.done)

    def sample(self, n: int, rng: np.random.Generator):
        idx = rng.integers(0, self.size, size=n)
        return self.s[idx], self.a[idx], self.r[idx], self.s2[idx], self.d[idx]


def random_policy(obs, rng: np.random.Generator, act_dim: int = 5) -> np.ndarray:
    return rng.uniform(-1.0, 1.0, size=act_dim)


class RandomAgent:
    def __init__(self, seed: int = 0, act_dim: int = 5):
        self.rng = np.random.default_rng([seed, 7])
        self.act_dim = act_dim

    def act(self, obs, explore: bool = True) -> np.ndarray:
        return random_policy(obs, self.rng, self.act_dim)

    def observe(self, tup) -> None:
        pass

    def train_step(self, k: int):
        return None


def critic_loss_and_grads(critic: Mlp, sa, y):
    q, cache = critic.forward(sa, cache=True)
    err = q[:, 0] - y
    n = err.size
    loss = float(np.mean(err ** 2))
    grads, _ = critic.backward(cache, (2.0 * err / n)[:, None])
    return loss, grads


def actor_loss_and_grads(actor: Mlp, critic: Mlp, s):
    """Loss ``-mean Q1(s, mu(s))`` and its gradient w.r.t. the actor parameters."""
    a, a_cache = actor.forward(s, cache=True)
    q, q_cache = critic.forward(np.hstack([s, a]), cache=True)
    n = s.shape[0]
    loss = -float(np.mean(q))
    _, d_in = critic.backward(q_cache, np.full((n, 1), -1.0 / n))
    grads, _ = actor.backward(a_cache, d_in[:, s.shape[1]:])
    return loss, grads


class Td3Agent:
    """Twin critics, delayed actor updates, target smoothing and polyak targets."""

    def __init__(self, obs_dim: int, act_dim: int, hp: Td3Hyperparams = SAFE_HYPERPARAMS,
                 seed: int = 0):
        self.hp = hp
        self.obs_dim, self.act_dim = obs_dim, act_dim
        init = np.random.default_rng([seed, 1])
        self.rng = np.random.default_rng([seed, 2])
        h = list(hp.hidden)
        self.actor = Mlp([obs_dim, *h, act_dim], output="tanh", rng=init)
        self.critic1 = Mlp([obs_dim + act_dim, *h, 1], rng=init)
        self.critic2 = Mlp([obs_dim + act_dim, *h, 1], rng=init)
        self.actor_t = self.actor.copy()
        self.critic1_t = self.critic1.copy()
        self.critic2_t = self.critic2.copy()
        self.opt_actor = Adam(self.actor.params, hp.learning_rate)
        self.opt_c1 = Adam(self.critic1.params, hp.learning_rate)
        self.opt_c2 = Adam(self.critic2.params, hp.learning_rate)
        self.buffer = ReplayBuffer(hp.buffer_size, obs_dim, act_dim)
        self.updates = 0
        self.diagnostics: list[tuple] = []

    def act(self, obs, explore: bool = True) -> np.ndarray:
        a = self.actor.forward(np.asarray(obs, dtype=float))[0]
        if explore and self.hp.noise_std > 0:
            a = a + self.rng.normal(0.0, self.hp.noise_std, size=a.shape)
        return np.clip(a, -1.0, 1.0)

    def observe(self, tup) -> None:
        self.buffer.add_tuple(tup)

    def train_step(self, k: int):
        """Called after environment step ``k`` (0-indexed); trains per train_freq."""
        if (k + 1) % self.hp.train_freq != 0 or len(self.buffer) < self.hp.warmup:
            return None
        out = None
        for _ in range(self.hp.gradient_steps):
            out = self.update()
        if out is not None:
            self.diagnostics.append((k, out[0], out[1], len(self.buffer)))
        return out

    def targets(self, r, s2, d):
        hp = self.hp
        a2 = self.actor_t.forward(s2)
        eps = np.clip(self.rng.normal(0.0, hp.target_noise, size=a2.shape),
                      -hp.target_clip, hp.target_clip)
        a2 = np.clip(a2 + eps, -1.0, 1.0)
        sa2 = np.hstack([s2, a2])
        q_t = np.minimum(self.critic1_t.forward(sa2)[:, 0], self.critic2_t.forward(sa2)[:, 0])
        return r + hp.gamma * (1.0 - d) * q_t

    def update(self):
        if len(self.buffer) < self.hp.batch_size:
            return None
        s, a, r, s2, d = self.buffer.sample(self.hp.batch_size, self.rng)
        y = self.targets(r, s2, d)
        sa = np.hstack([s, a])
        l1, g1 = critic_loss_and_grads(self.critic1, sa, y)
        l2, g2 = critic_loss_and_grads(self.critic2, sa, y)
        self.critic1.set_params(self.opt_c1.step(self.critic1.params, g1))
        self.critic2.set_params(self.opt_c2.step(self.critic2.params, g2))
        self.updates += 1
        actor_loss = float("nan")
        if self.updates % self.hp.policy_delay == 0:
            actor_loss, ga = actor_loss_and_grads(self.actor, self.critic1, s)
            self.actor.set_params(self.opt_actor.step(self.actor.params, ga))
            for net, tgt in ((self.actor, self.actor_t), (self.critic1, self.critic1_t),
                             (self.critic2, self.critic2_t)):
                polyak_update(net, tgt, self.hp.polyak)
        return 0.5 * (l1 + l2), actor_loss

    def write_diagnostics(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["step", "critic_loss", "actor_loss", "buffer_size"])
            for k, lc, la, n in self.diagnostics:
                w.writerow([k, repr(float(lc)), repr(float(la)), n])

    def save(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(FORMAT_TAG + "\n")
            for name in ("actor", "critic1", "critic2", "actor_t", "critic1_t", "critic2_t"):
                fh.write(f"[{name}]\n")
                save_mlp_text(getattr(self, name), fh)

    def load(self, path) -> None:
        lines = open(path).read().splitlines()
        if not lines or lines[0].strip() != FORMAT_TAG:
            raise ValueError("not a TD3 checkpoint")
        blocks, cur = {}, None
        for line in lines[1:]:
            if line.startswith("[") and line.endswith("]"):
                cur = line[1:-1]
                blocks[cur] = []
            elif cur is not None:
                blocks[cur].append(line)
        for name, body in blocks.items():
            setattr(self, name, load_mlp_text(body)[0])


def polyak_update(net: Mlp, target: Mlp, rho: float) -> None:
    target.set_params([rho * pt + (1.0 - rho) * p for p, pt in zip(net.params, target.params)])
