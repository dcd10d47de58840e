import numpy as np
import pytest

from greyshield.agent import (SAFE_HYPERPARAMS, UNSAFE_HYPERPARAMS, RandomAgent, ReplayBuffer,
                              Td3Agent, Td3Hyperparams, hyperparams_for, polyak_update)
from greyshield.env import ExperienceTuple


def small_hp(**kw):
    base = dict(hidden=(16, 16), batch_size=8, buffer_size=1000)
    base.update(kw)
    return Td3Hyperparams(**base)


def test_hyperparameter_tables():
    assert SAFE_HYPERPARAMS.gamma == 0.7 and SAFE_HYPERPARAMS.batch_size == 16
    assert UNSAFE_HYPERPARAMS.train_freq == 2000 and UNSAFE_HYPERPARAMS.gamma == 0.9
    assert hyperparams_for("unsafe") == UNSAFE_HYPERPARAMS
    assert hyperparams_for("optlayer", batch_size=32).batch_size == 32
    assert SAFE_HYPERPARAMS.warmup == SAFE_HYPERPARAMS.batch_size


def test_hyperparameter_validation():
    with pytest.raises(ValueError):
        Td3Hyperparams(gamma=1.0)
    with pytest.raises(ValueError):
        Td3Hyperparams(batch_size=10, buffer_size=5)
    with pytest.raises(ValueError):
        Td3Hyperparams(learning_rate=0.0)


def test_buffer_is_fifo():
    buf = ReplayBuffer(3, 1, 1)
    for i in range(5):
        buf.add([i], [0], float(i), [i], False)
    assert len(buf) == 3 and buf.total == 5
    assert sorted(buf.r.tolist()) == [2.0, 3.0, 4.0]
    with pytest.raises(ValueError):
        ReplayBuffer(0, 1, 1)


def test_terminal_target_is_reward():
    ag = Td3Agent(3, 2, small_hp(), seed=0)
    r = np.array([-1.5, 2.0])
    s2 = np.random.default_rng(0).normal(size=(2, 3))
    y = ag.targets(r, s2, np.ones(2))
    assert np.array_equal(y, r)


def test_actions_bounded_and_deterministic_without_noise():
    ag = Td3Agent(4, 3, small_hp(), seed=1)
    obs = np.linspace(0, 1, 4)
    a1, a2 = ag.act(obs, explore=False), ag.act(obs, explore=False)
    assert np.array_equal(a1, a2) and np.all(np.abs(a1) <= 1)
    assert np.all(np.abs(ag.act(obs)) <= 1)


def test_training_schedule_and_policy_delay():
    ag = Td3Agent(2, 1, small_hp(policy_delay=2), seed=2)
    rng = np.random.default_rng(0)
    for k in range(20):
        s = rng.uniform(size=2)
        ag.observe(ExperienceTuple(s, rng.uniform(-1, 1, 1), 0.0, s, True))
        ag.train_step(k)
    # warmup equals batch size: updates start once 8 tuples are stored
    assert ag.updates == 13
    actor_losses = [d[2] for d in ag.diagnostics]
    assert np.isnan(actor_losses[0]) and not np.isnan(actor_losses[1])


def test_polyak_update(rng):
    ag = Td3Agent(2, 1, small_hp(), seed=3)
    net, tgt = ag.critic1, ag.critic1_t
    net.set_params([p + 1.0 for p in net.params])
    before = [p.copy() for p in tgt.params]
    polyak_update(net, tgt, 0.9)
    for b, p, t in zip(before, net.params, tgt.params):
        assert np.allclose(t, 0.9 * b + 0.1 * p)


def test_random_agent_uniform():
    ag = RandomAgent(5)
    a = np.array([ag.act(None) for _ in range(20000)])
    assert np.all(np.abs(a) <= 1.0)
    assert np.allclose(a.mean(axis=0), 0.0, atol=0.03)
    assert np.allclose(a.var(axis=0), 1.0 / 3.0, atol=0.02)


def test_checkpoint_round_trip(tmp_path):
    ag = Td3Agent(3, 2, small_hp(), seed=4)
    ag.save(tmp_path / "ck.txt")
    other = Td3Agent(3, 2, small_hp(), seed=99)
    other.load(tmp_path / "ck.txt")
    obs = np.array([0.1, 0.5, 0.9])
    assert np.array_equal(ag.act(obs, False), other.act(obs, False))
    (tmp_path / "bad.txt").write_text("nope\n")
    with pytest.raises(ValueError):
        other.load(tmp_path / "bad.txt")
