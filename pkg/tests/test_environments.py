import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gasil.environments import (
    BLUE,
    GREEN,
    ORANGE,
    DelayedRewardWrapper,
    EnvConfig,
    EnvStep,
    ObservationNoiseWrapper,
    PointMass2D,
    episode_return,
    make_env,
)
from gasil.errors import ConfigError, ProtocolError


class ScriptedRewards:
    """Stand-in environment paying a fixed reward sequence."""

    def __init__(self, rewards):
        self.rewards = list(rewards)
        self.t = 0

    def reset(self):
        self.t = 0
        return np.zeros(1)

    def step(self, action):
        r = self.rewards[self.t]
        self.t += 1
        return EnvStep(np.zeros(1), r, self.t == len(self.rewards))


def run_wrapped(rewards, delay):
    env = DelayedRewardWrapper(ScriptedRewards(rewards), delay)
    env.reset()
    return [env.step(None).reward for _ in rewards]


def empty_env(**kw):
    kw.setdefault("start", (0.5, 0.15))
    return PointMass2D(EnvConfig(objects=(), **kw))


def test_reset_deterministic():
    a = PointMass2D(EnvConfig(), np.random.default_rng(0)).reset()
    b = PointMass2D(EnvConfig(), np.random.default_rng(0)).reset()
    assert np.array_equal(a, b)


def test_reset_random_start_seeded():
    cfg = EnvConfig(random_start=True)
    a = PointMass2D(cfg, np.random.default_rng(3)).reset()
    b = PointMass2D(cfg, np.random.default_rng(3)).reset()
    c = PointMass2D(cfg, np.random.default_rng(4)).reset()
    assert np.array_equal(a, b) and not np.array_equal(a, c)


def test_observation_layout():
    env = PointMass2D()
    obs = env.reset()
    assert obs.shape == (2 + 4 * env.n_objects,)
    assert np.array_equal(obs[:2], env.config.start)
    first = env.config.objects[0]
    np.testing.assert_allclose(obs[2:4], np.array(first.position) - np.array(env.config.start))
    assert obs[4] == 0.0 and obs[5] == first.value / 10.0


def test_default_layout_counts():
    values = [o.value for o in EnvConfig().objects]
    assert values.count(GREEN) == 2 and values.count(BLUE) == 2 and values.count(ORANGE) == 3
    assert {GREEN, BLUE, ORANGE} == {10.0, 5.0, -5.0}


def test_zero_action_no_reward():
    env = PointMass2D()
    env.reset()
    assert env.step(np.zeros(2)).reward == 0.0


def test_actuation_cost():
    env = empty_env()
    env.reset()
    a = np.array([0.03, 0.04])
    assert env.step(a).reward == pytest.approx(-0.1 * 0.05, abs=1e-15)


def test_action_clipped():
    env = empty_env()
    env.reset()
    out = env.step(np.array([1.0, -1.0]))
    np.testing.assert_allclose(out.observation[:2], [0.55, 0.10])
    assert out.reward == pytest.approx(-0.1 * np.sqrt(2) * 0.05)


def test_action_scale():
    env = empty_env(action_scale=0.05)
    env.reset()
    out = env.step(np.array([0.5, 0.0]))
    np.testing.assert_allclose(out.observation[:2], [0.525, 0.15])


def test_enter_green_object():
    cfg = EnvConfig(objects=(((0.5, 0.2), GREEN, 0.06),), start=(0.5, 0.1))
    env = PointMass2D(cfg)
    env.reset()
    a = np.array([0.0, 0.05])
    out = env.step(a)
    assert out.reward == pytest.approx(10.0 - 0.1 * 0.05)
    assert out.info["objects_collected"] == 1
    assert out.observation[4] == 1.0
    # staying inside pays nothing further
    out = env.step(np.zeros(2))
    assert out.reward == 0.0


def test_position_clamped_to_arena():
    env = empty_env(start=(0.02, 0.98))
    env.reset()
    out = env.step(np.array([-0.05, 0.05]))
    assert np.array_equal(out.observation[:2], [0.0, 1.0])


def test_episode_length_and_step_after_done():
    env = PointMass2D(EnvConfig(max_steps=5))
    env.reset()
    dones = [env.step(np.zeros(2)).done for _ in range(5)]
    assert dones == [False] * 4 + [True]
    with pytest.raises(ProtocolError):
        env.step(np.zeros(2))


def test_delay_identity():
    rewards = [1.5, -2.0, 0.25, 3.0]
    assert run_wrapped(rewards, 1) == rewards


def test_delay_hand_simulated():
    assert run_wrapped([1, 2, 3, 4, 5], 2) == [0, 3, 0, 7, 5]


def test_delay_twenty_releases():
    rewards = [1.0] * 45
    out = run_wrapped(rewards, 20)
    nonzero = [i for i, r in enumerate(out) if r != 0]
    assert nonzero == [19, 39, 44]
    assert out[19] == 20 and out[44] == 5


def test_delay_resets_between_episodes():
    env = DelayedRewardWrapper(ScriptedRewards([1, 1, 1]), 2)
    env.reset()
    assert [env.step(None).reward for _ in range(3)] == [0, 2, 1]
    env.reset()
    assert [env.step(None).reward for _ in range(3)] == [0, 2, 1]


@settings(max_examples=200, deadline=None)
@given(st.lists(st.integers(-10, 10), min_size=1, max_size=60), st.integers(1, 25))
def test_delay_conserves_reward(rewards, delay):
    rewards = [float(r) for r in rewards]
    assert sum(run_wrapped(rewards, delay)) == sum(rewards)


def test_noise_zero_is_identity():
    base = PointMass2D()
    wrapped = ObservationNoiseWrapper(PointMass2D(), 0.0, np.random.default_rng(0))
    assert np.array_equal(base.reset(), wrapped.reset())
    a = np.array([0.01, 0.02])
    assert np.array_equal(base.step(a).observation, wrapped.step(a).observation)


def test_noise_variance():
    sigma = 0.1
    env = ObservationNoiseWrapper(empty_env(max_steps=100_000), sigma, np.random.default_rng(1))
    env.reset()
    obs = np.array([env.step(np.zeros(2)).observation for _ in range(100_000)])
    var = obs.var(axis=0)
    assert np.all(np.abs(var - sigma ** 2) < 0.05 * sigma ** 2)


def test_noise_leaves_rewards_and_termination():
    rng = np.random.default_rng(2)
    actions = rng.uniform(-0.05, 0.05, size=(128, 2))
    plain = PointMass2D()
    noisy = ObservationNoiseWrapper(PointMass2D(), 0.5, np.random.default_rng(0))
    plain.reset(), noisy.reset()
    for a in actions:
        p, n = plain.step(a), noisy.step(a)
        assert p.reward == n.reward and p.done == n.done


def test_full_determinism_with_fixed_actions():
    actions = np.random.default_rng(5).uniform(-0.05, 0.05, size=(128, 2))
    cfg = EnvConfig(delay=20, obs_noise=0.1, random_start=True)

    def run():
        env = make_env(cfg, np.random.default_rng(7))
        obs = [env.reset()]
        rewards = []
        for a in actions:
            out = env.step(a)
            obs.append(out.observation)
            rewards.append(out.reward)
        return np.array(obs), np.array(rewards)

    o1, r1 = run()
    o2, r2 = run()
    assert np.array_equal(o1, o2) and np.array_equal(r1, r2)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10_000))
def test_objects_pay_at_most_once(seed):
    rng = np.random.default_rng(seed)
    env = PointMass2D(EnvConfig(actuation_cost=0.0))
    env.reset()
    total = 0.0
    flips = np.zeros(env.n_objects, dtype=int)
    prev = env.collected.copy()
    for _ in range(128):
        total += env.step(rng.uniform(-0.05, 0.05, size=2)).reward
        flips += prev != env.collected
        prev = env.collected.copy()
    assert np.all(flips <= 1)
    assert total == pytest.approx(np.sum(env.obj_value[env.collected]))
    assert total <= np.sum(np.maximum(env.obj_value, 0))


def test_episode_return_examples():
    assert episode_return([0, 0, 0], 0.99) == 0.0
    assert episode_return([1, 1, 1], 1.0) == 3.0
    assert episode_return([1, 2, 3], 0.99) == pytest.approx(5.9203, abs=1e-12)


def test_config_validation():
    with pytest.raises(ConfigError) as e:
        EnvConfig(delay=0)
    assert e.value.field == "delay"
    with pytest.raises(ConfigError):
        EnvConfig(env="hopper")
