"""Good-trajectory buffer and the discriminator that rewards imitating it.

The discriminator ``D(s, a)`` is trained by gradient ascent on

    mean_policy[log D] + mean_buffer[log(1 - D)]

so it outputs values near 1 for state-action pairs from the current policy
and near 0 for pairs from the buffer. ``-log D`` is then a reward that is
large where the policy already behaves like its own best past episodes.
"""

import struct
from dataclasses import dataclass

import numpy as np

from .errors import NotReadyError, NumericError
from .nn_core import AdamState, MlpNetwork, adam_step
from .rollout import D_CLAMP, Episode, finalize_advantages, normalize_advantages, shape_rewards
from .ppo import ppo_update


def _rank_key(ep):
    # higher return, then newer, then shorter
    return (-ep.ret, -ep.episode_id, len(ep))


class GoodTrajectoryBuffer:
    """Highest-return episodes seen so far, bounded by a total step budget.

    Admission is greedy from the best return downward and stops at the first
    episode that no longer fits. Once the buffer holds anything, candidates
    below its current minimum return are not considered, so the minimum never
    decreases. A single episode longer than the whole budget is still kept
    when nothing else fits.
    """

    def __init__(self, capacity_steps):
        if capacity_steps < 1:
            raise ValueError("capacity_steps must be positive")
        self.capacity_steps = int(capacity_steps)
        self.episodes = []
        self._flat = None

    def __len__(self):
        return len(self.episodes)

    @property
    def total_steps(self):
        return sum(len(ep) for ep in self.episodes)

    @property
    def min_return(self):
        return min(ep.ret for ep in self.episodes) if self.episodes else float("nan")

    @property
    def mean_return(self):
        return float(np.mean([ep.ret for ep in self.episodes])) if self.episodes else float("nan")

    def update(self, new_episodes):
        candidates = list(new_episodes)
        if self.episodes:
            floor = self.min_return
            candidates = [ep for ep in candidates if ep.ret >= floor]
        pool = sorted(self.episodes + candidates, key=_rank_key)
        kept = []
        used = 0
        for ep in pool:
            if used + len(ep) > self.capacity_steps:
                break
            kept.append(ep)
            used += len(ep)
        if not kept and pool:
            kept = [pool[0]]
        self.episodes = kept
        self._flat = None
        return self

    def transitions(self):
        """All stored (observations, actions) stacked row-wise."""
        if not self.episodes:
            raise NotReadyError("good-trajectory buffer is empty")
        if self._flat is None:
            self._flat = (np.concatenate([ep.observations for ep in self.episodes]),
                          np.concatenate([ep.actions for ep in self.episodes]))
        return self._flat

    def sample(self, n, rng):
        """``n`` (observation, action) rows drawn uniformly with replacement."""
        obs, act = self.transitions()
        idx = rng.integers(0, len(obs), size=n)
        return obs[idx], act[idx]


def buffer_update(buffer, new_episodes):
    return buffer.update(new_episodes)


def buffer_sample(buffer, n, rng):
    return buffer.sample(n, rng)


def save_buffer(path, buffer, obs_dim=None, act_dim=None):
    with open(path, "wb") as f:
        f.write(buffer_bytes(buffer, obs_dim, act_dim))


def buffer_bytes(buffer, obs_dim=None, act_dim=None):
    """Snapshot layout (little-endian): uint32 episode count, uint32 obs_dim,
    uint32 act_dim, then per episode uint32 length, float64 return, and
    ``length`` rows of ``obs + action + reward`` as float64."""
    if buffer.episodes:
        obs_dim = buffer.episodes[0].observations.shape[1]
        act_dim = buffer.episodes[0].actions.shape[1]
    out = [struct.pack("<III", len(buffer.episodes), obs_dim or 0, act_dim or 0)]
    for ep in buffer.episodes:
        out.append(struct.pack("<Id", len(ep), ep.ret))
        rows = np.column_stack([ep.observations, ep.actions, ep.rewards])
        out.append(rows.astype("<f8").tobytes())
    return b"".join(out)


def load_buffer(path, capacity_steps=None):
    with open(path, "rb") as f:
        data = f.read()
    count, obs_dim, act_dim = struct.unpack_from("<III", data, 0)
    pos = 12
    width = obs_dim + act_dim + 1
    episodes = []
    for _ in range(count):
        length, ret = struct.unpack_from("<Id", data, pos)
        pos += 12
        rows = np.frombuffer(data, dtype="<f8", count=length * width, offset=pos).reshape(length, width)
        pos += 8 * length * width
        obs, act, rew = rows[:, :obs_dim].copy(), rows[:, obs_dim:obs_dim + act_dim].copy(), rows[:, -1].copy()
        ep = Episode(obs, act, rew, True, float(ret), 0)
        for a in (ep.observations, ep.actions, ep.rewards):
            a.setflags(write=False)
        episodes.append(ep)
    total = sum(len(ep) for ep in episodes)
    buffer = GoodTrajectoryBuffer(capacity_steps or max(total, 1))
    buffer.episodes = episodes
    return buffer


def _log_sigmoid(x):
    return -np.logaddexp(0.0, -x)


class Discriminator:
    """MLP over concatenated (observation, action) with a sigmoid output."""

    def __init__(self, obs_dim, act_dim, hidden=(64, 64), rng=None, net=None):
        self.obs_dim = obs_dim
        self.act_dim = act_dim
        self.net = net if net is not None else MlpNetwork([obs_dim + act_dim, *hidden, 1], rng=rng, output_gain=1.0)

    def logits(self, obs, act):
        return self.net.forward(np.concatenate([obs, act], axis=-1))[0][..., 0]

    def prob(self, obs, act):
        x = self.logits(obs, act)
        return np.exp(_log_sigmoid(x))

    def reward(self, obs, act):
        return discriminator_reward(self, obs, act)

    def objective_and_grad(self, policy_obs, policy_act, buffer_obs, buffer_act):
        """Ascent objective ``mean log D(policy) + mean log(1 - D(buffer))`` and its gradient."""
        x = np.concatenate([np.concatenate([policy_obs, policy_act], axis=-1),
                            np.concatenate([buffer_obs, buffer_act], axis=-1)])
        n_pol = len(policy_obs)
        n_buf = len(buffer_obs)
        out, cache = self.net.forward(x)
        logits = out[:, 0]
        lp, lb = logits[:n_pol], logits[n_pol:]
        objective = float(np.mean(_log_sigmoid(lp)) + np.mean(_log_sigmoid(-lb)))
        d = np.exp(_log_sigmoid(logits))
        # d/dx log sigmoid(x) = 1 - D ; d/dx log(1 - sigmoid(x)) = -D
        g = np.concatenate([(1.0 - d[:n_pol]) / n_pol, -d[n_pol:] / n_buf])
        return objective, self.net.backward(cache, g[:, None])


def discriminator_reward(disc, obs, act):
    """``-log D`` with D clamped to ``[1e-8, 1 - 1e-8]``."""
    d = disc.prob(obs, act)
    return -np.log(np.clip(d, D_CLAMP, 1.0 - D_CLAMP))


def discriminator_train_step(disc, policy_pairs, buffer_pairs, optimizer):
    """One ascent step; returns the objective before the step.

    Raises :class:`NumericError` (parameters untouched) if the objective or
    its gradient is not finite.
    """
    objective, grad = disc.objective_and_grad(*policy_pairs, *buffer_pairs)
    if not np.isfinite(objective):
        raise NumericError("non-finite discriminator objective")
    adam_step(disc.net.params, -grad, optimizer)
    return objective


@dataclass
class GasilConfig:
    alpha: float = 0.1
    n_disc: int = 5
    disc_minibatch: int = 128
    reward_mode: str = "combined"
    gamma: float = 0.99
    lambda_gae: float = 0.95


def gasil_iteration(ac, ppo_optimizer, ppo_config, disc, disc_optimizer, buffer, batch, episodes,
                    config, disc_rng, ppo_rng):
    """One training iteration: buffer, discriminator, shaping, GAE, PPO.

    With an empty buffer (nothing to imitate yet) the discriminator and the
    shaping are skipped and the iteration is plain PPO on environment reward.
    Returns a stats dict.
    """
    buffer.update(episodes)
    stats = {"disc_objective": float("nan"), "disc_policy_mean": float("nan"),
             "disc_buffer_mean": float("nan"), "incidents": 0}
    ready = len(buffer) > 0
    if ready and config.n_disc > 0:
        half = config.disc_minibatch // 2
        objectives = []
        for _ in range(config.n_disc):
            idx = disc_rng.integers(0, len(batch), size=half)
            pol = (batch.observations[idx], batch.actions[idx])
            buf = buffer.sample(config.disc_minibatch - half, disc_rng)
            try:
                objectives.append(discriminator_train_step(disc, pol, buf, disc_optimizer))
            except NumericError:
                stats["incidents"] += 1
        if objectives:
            buf_obs, buf_act = buffer.transitions()
            stats["disc_objective"] = float(np.mean(objectives))
            stats["disc_policy_mean"] = float(np.mean(disc.prob(batch.observations, batch.actions)))
            stats["disc_buffer_mean"] = float(np.mean(disc.prob(buf_obs, buf_act)))
    mode = config.reward_mode if ready else "env_only"
    try:
        batch = shape_rewards(batch, disc, config.alpha, mode)
    except NumericError:
        stats["incidents"] += 1
        batch = shape_rewards(batch, None, 0.0, "env_only")
    batch = normalize_advantages(finalize_advantages(batch, config.gamma, config.lambda_gae))
    ppo_stats = ppo_update(ac, batch, ppo_config, ppo_optimizer, ppo_rng)
    stats["incidents"] += ppo_stats.pop("incidents")
    stats.update(ppo_stats)
    stats["shaped_reward_mean"] = float(np.mean(batch.shaped_rewards))
    return stats


def make_disc_optimizer(disc, lr=1e-4):
    return AdamState(disc.net.params.size, lr=lr)
