import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from greyshield.env import (MesEnv, RewardConfig, denormalize, episode_run, normalize,
                            obs_ranges, reward)
from greyshield.plant import NoiseConfig, Plant, STEPS_PER_DAY
from greyshield.profiles import generate_profiles


def make_env(horizon=96, seed=0):
    return MesEnv(Plant(noise=NoiseConfig(seed=seed)), generate_profiles(seed, 200), horizon)


def test_reward_formula():
    cfg = RewardConfig()
    assert reward(10.0, 5e5, cfg=cfg) == pytest.approx(-(1.0 + 1.0))
    assert reward(10.0, 5e5, True, cfg) == pytest.approx(-3.0)
    with pytest.raises(ValueError):
        reward(1.0, -1.0)
    with pytest.raises(ValueError):
        RewardConfig(x=-1)


@settings(max_examples=50, deadline=None)
@given(raw=st.lists(st.floats(0, 1), min_size=9, max_size=9))
def test_normalize_round_trip(raw):
    r = obs_ranges()
    x = denormalize(np.array(raw), r)
    assert np.allclose(normalize(x, r), raw, atol=1e-12)


def test_observation_layout():
    env = make_env()
    obs = env.reset()
    assert obs.shape == (9,)
    assert obs[7] == 0.0 and obs[8] == 0.0  # Monday 00:00
    for _ in range(STEPS_PER_DAY // 2):
        obs, *_ = env.step(np.zeros(5))
    assert obs[7] == pytest.approx(0.5)


def test_episode_length_and_terminal_obs():
    env = make_env(horizon=10)
    log = episode_run(env, lambda o: np.zeros(5))
    assert len(log) == 10
    last = log.records[-1]
    assert last.done and np.array_equal(last.next_obs, last.obs)
    with pytest.raises(RuntimeError):
        env.step(np.zeros(5))


def test_zero_horizon():
    env = make_env(horizon=0)
    log = episode_run(env, lambda o: np.zeros(5))
    assert len(log) == 0


def test_horizon_beyond_profile():
    with pytest.raises(ValueError):
        make_env(horizon=1000)


def test_logged_rewards_recompute():
    env = make_env(horizon=50)
    rng = np.random.default_rng(0)
    log = episode_run(env, lambda o: rng.uniform(-1, 1, 5))
    for r in log.records:
        assert r.reward == -(0.1 * r.l_cost + 2e-6 * r.l_comfort)


def test_recorder_sees_every_tuple():
    env = make_env(horizon=20)
    seen = []
    episode_run(env, lambda o: np.zeros(5), recorder=seen.append)
    assert len(seen) == 20


def test_trajectory_csv(tmp_path):
    env = make_env(horizon=5)
    log = episode_run(env, lambda o: np.zeros(5))
    log.to_csv(tmp_path / "t.csv")
    lines = (tmp_path / "t.csv").read_text().splitlines()
    assert len(lines) == 6 and lines[0].startswith("step,a_boil")
