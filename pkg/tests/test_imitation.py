import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gasil.errors import NotReadyError
from gasil.imitation import (
    Discriminator,
    GoodTrajectoryBuffer,
    buffer_sample,
    buffer_update,
    discriminator_reward,
    discriminator_train_step,
    load_buffer,
    make_disc_optimizer,
    save_buffer,
)
from gasil.nn_core import AdamState, MlpNetwork
from gasil.rollout import Episode

_next_id = itertools.count(1)


def episode(ret, length, obs_dim=2, act_dim=1, eid=None, fill=0.0):
    """Episode with a prescribed return; rewards are put on the first step."""
    rewards = np.zeros(length)
    rewards[0] = ret
    obs = np.full((length, obs_dim), fill)
    act = np.full((length, act_dim), fill)
    return Episode.from_arrays(obs, act, rewards, 0.99, episode_id=next(_next_id) if eid is None else eid)


def greedy_oracle(pool, capacity):
    """Largest rank-prefix-closed subset that fits the step budget, found by enumeration."""
    ranked = sorted(pool, key=lambda e: (-e.ret, -e.episode_id, len(e)))
    best = []
    for mask in itertools.product([0, 1], repeat=len(ranked)):
        chosen = [e for e, m in zip(ranked, mask) if m]
        prefix_closed = all(mask[i] >= mask[i + 1] for i in range(len(mask) - 1))
        if prefix_closed and sum(len(e) for e in chosen) <= capacity and len(chosen) > len(best):
            best = chosen
    return best


def test_empty_buffer_admits_first():
    buf = GoodTrajectoryBuffer(100)
    ep = episode(3.0, 10)
    buffer_update(buf, [ep])
    assert buf.episodes == [ep]


def test_lower_candidate_rejected_by_capacity():
    buf = GoodTrajectoryBuffer(5)
    good = episode(10.0, 3)
    buf.update([good])
    buf.update([episode(4.0, 3)])
    assert buf.episodes == [good]


def test_greedy_admission_example():
    eps = [episode(10.0, 3), episode(8.0, 2), episode(7.0, 2)]
    buf = GoodTrajectoryBuffer(6).update(eps)
    assert [e.ret for e in buf.episodes] == [10.0, 8.0]
    assert buf.episodes == greedy_oracle(eps, 6)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.integers(-5, 5), st.integers(1, 6)), min_size=1, max_size=8), st.integers(1, 20))
def test_greedy_matches_enumeration_oracle(specs, capacity):
    eps = [episode(float(r), n) for r, n in specs]
    buf = GoodTrajectoryBuffer(capacity).update(eps)
    expected = greedy_oracle(eps, capacity)
    if expected:
        assert buf.episodes == expected
    else:
        assert len(buf.episodes) == 1 and buf.episodes[0].ret == max(e.ret for e in eps)


def test_single_oversized_episode_kept():
    buf = GoodTrajectoryBuffer(5)
    big = episode(1.0, 9)
    buf.update([big])
    assert buf.episodes == [big]
    buf.update([episode(2.0, 3)])
    assert buf.total_steps == 3


def test_tie_breaks_newer_then_shorter():
    old = episode(5.0, 4, eid=1)
    new = episode(5.0, 4, eid=2)
    buf = GoodTrajectoryBuffer(4).update([old, new])
    assert buf.episodes == [new]
    short = episode(5.0, 2, eid=3)
    long_ = episode(5.0, 3, eid=3)
    buf = GoodTrajectoryBuffer(3).update([long_, short])
    assert buf.episodes == [short]


@settings(max_examples=200, deadline=None)
@given(st.lists(st.lists(st.tuples(st.integers(-20, 20), st.integers(1, 40)), max_size=6), min_size=1, max_size=8),
       st.sampled_from([50, 100, 1000]))
def test_monotone_min_and_capacity(stream, capacity):
    buf = GoodTrajectoryBuffer(capacity)
    prev_min = -np.inf
    for specs in stream:
        buf.update([episode(float(r), n) for r, n in specs])
        if buf.episodes:
            assert buf.min_return >= prev_min
            prev_min = buf.min_return
            assert buf.total_steps <= capacity or len(buf.episodes) == 1


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.integers(-3, 3), st.integers(1, 5)), min_size=1, max_size=7), st.randoms())
def test_order_invariance(specs, rnd):
    eps = [episode(float(r), n) for r, n in specs]
    shuffled = list(eps)
    rnd.shuffle(shuffled)
    a = GoodTrajectoryBuffer(8).update(eps)
    b = GoodTrajectoryBuffer(8).update(shuffled)
    assert a.episodes == b.episodes


def test_sample_single_transition():
    buf = GoodTrajectoryBuffer(10).update([episode(1.0, 1, fill=3.0)])
    obs, act = buffer_sample(buf, 3, np.random.default_rng(0))
    assert obs.shape == (3, 2) and np.all(obs == 3.0) and np.all(act == 3.0)


def test_sample_deterministic():
    buf = GoodTrajectoryBuffer(100).update([episode(1.0, 5, fill=1.0), episode(2.0, 5, fill=2.0)])
    a = buf.sample(20, np.random.default_rng(4))
    b = buf.sample(20, np.random.default_rng(4))
    assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])


def test_sample_uniform_over_transitions():
    # 10 transitions, tagged 0..9 in the observation
    eps = []
    for k in range(3):
        n = (4, 3, 3)[k]
        obs = np.arange(sum((4, 3, 3)[:k]), sum((4, 3, 3)[:k + 1]), dtype=float)[:, None]
        eps.append(Episode.from_arrays(obs, np.zeros((n, 1)), np.full(n, float(k)), 0.99, episode_id=k + 1))
    buf = GoodTrajectoryBuffer(10).update(eps)
    assert buf.total_steps == 10
    obs, _ = buf.sample(100_000, np.random.default_rng(1))
    freq = np.bincount(obs[:, 0].astype(int), minlength=10) / 100_000
    se = np.sqrt(0.1 * 0.9 / 100_000)
    assert np.all(np.abs(freq - 0.1) < 3 * se)


def test_sample_empty_not_ready():
    with pytest.raises(NotReadyError):
        GoodTrajectoryBuffer(10).sample(1, np.random.default_rng(0))


def test_buffer_snapshot_roundtrip(tmp_path):
    rng = np.random.default_rng(0)
    eps = [Episode.from_arrays(rng.standard_normal((n, 3)), rng.standard_normal((n, 2)), rng.standard_normal(n),
                               0.99, episode_id=i) for i, n in enumerate((4, 6))]
    buf = GoodTrajectoryBuffer(100).update(eps)
    save_buffer(tmp_path / "b.bin", buf)
    loaded = load_buffer(tmp_path / "b.bin")
    assert len(loaded) == 2
    for a, b in zip(buf.episodes, loaded.episodes):
        assert a.ret == b.ret
        assert np.array_equal(a.observations, b.observations)
        assert np.array_equal(a.actions, b.actions)
        assert np.array_equal(a.rewards, b.rewards)


def zero_disc(obs_dim=2, act_dim=1):
    return Discriminator(obs_dim, act_dim, net=MlpNetwork([obs_dim + act_dim, 8, 1]))


def test_uninformed_discriminator_objective():
    disc = zero_disc()
    pairs = (np.ones((4, 2)), np.ones((4, 1)))
    obj = discriminator_train_step(disc, pairs, pairs, AdamState(disc.net.n_params))
    assert obj == pytest.approx(2 * np.log(0.5), abs=1e-12)
    assert obj == pytest.approx(-1.386294, abs=1e-6)


def test_discriminator_reward_values():
    disc = zero_disc()
    assert discriminator_reward(disc, np.zeros((1, 2)), np.zeros((1, 1)))[0] == pytest.approx(0.693147, abs=1e-6)
    disc.net.biases[-1][0] = np.log(0.1 / 0.9)
    assert discriminator_reward(disc, np.zeros((1, 2)), np.zeros((1, 1)))[0] == pytest.approx(2.302585, abs=1e-6)
    disc.net.biases[-1][0] = 40.0
    r = discriminator_reward(disc, np.zeros((1, 2)), np.zeros((1, 1)))[0]
    assert 0 < r < 1e-8 * 1.01


@settings(max_examples=50, deadline=None)
@given(st.floats(-50, 50), st.floats(-50, 50))
def test_reward_positive_and_monotone(a, b):
    disc = zero_disc()
    disc.net.biases[-1][0] = a
    ra = discriminator_reward(disc, np.zeros((1, 2)), np.zeros((1, 1)))[0]
    disc.net.biases[-1][0] = b
    rb = discriminator_reward(disc, np.zeros((1, 2)), np.zeros((1, 1)))[0]
    assert ra > 0 and rb > 0
    if a < b:
        assert ra >= rb


def finite_diff_objective(disc, pol, buf, h=1e-5):
    p = disc.net.params
    g = np.empty_like(p)
    for i in range(p.size):
        old = p[i]
        p[i] = old + h
        up = disc.objective_and_grad(*pol, *buf)[0]
        p[i] = old - h
        down = disc.objective_and_grad(*pol, *buf)[0]
        p[i] = old
        g[i] = (up - down) / (2 * h)
    return g


def test_objective_gradient_finite_differences():
    rng = np.random.default_rng(3)
    disc = Discriminator(3, 2, hidden=(5, 4), rng=rng)
    pol = (rng.standard_normal((6, 3)), rng.standard_normal((6, 2)))
    buf = (rng.standard_normal((5, 3)), rng.standard_normal((5, 2)))
    _, g = disc.objective_and_grad(*pol, *buf)
    num = finite_diff_objective(disc, pol, buf)
    rel = np.abs(g - num) / np.maximum(1e-8, np.abs(g) + np.abs(num))
    assert rel.max() < 1e-4


def test_ascent_step_does_not_decrease_objective():
    failures = 0
    for seed in range(100):
        rng = np.random.default_rng(seed)
        disc = Discriminator(3, 1, hidden=(16, 16), rng=rng)
        pol = (rng.standard_normal((32, 3)) + 0.5, rng.standard_normal((32, 1)))
        buf = (rng.standard_normal((32, 3)) - 0.5, rng.standard_normal((32, 1)))
        opt = make_disc_optimizer(disc, lr=1e-4)
        before = discriminator_train_step(disc, pol, buf, opt)
        after = disc.objective_and_grad(*pol, *buf)[0]
        failures += after < before
    assert failures == 0


def separable_pairs(rng, n):
    obs = rng.uniform(-1, 1, size=(n, 2))
    act = rng.uniform(-1, 1, size=(n, 1))
    policy = obs[:, 0] + act[:, 0] > 0.2
    buffer = obs[:, 0] + act[:, 0] < -0.2
    return (obs[policy], act[policy]), (obs[buffer], act[buffer])


def test_separable_accuracy():
    rng = np.random.default_rng(0)
    disc = Discriminator(2, 1, rng=rng)
    opt = make_disc_optimizer(disc, lr=1e-3)
    pol, buf = separable_pairs(rng, 4000)
    for _ in range(200):
        i = rng.integers(0, len(pol[0]), 64)
        j = rng.integers(0, len(buf[0]), 64)
        discriminator_train_step(disc, (pol[0][i], pol[1][i]), (buf[0][j], buf[1][j]), opt)
    test_pol, test_buf = separable_pairs(np.random.default_rng(99), 2000)
    correct = np.sum(disc.prob(*test_pol) > 0.5) + np.sum(disc.prob(*test_buf) < 0.5)
    assert correct / (len(test_pol[0]) + len(test_buf[0])) >= 0.95
