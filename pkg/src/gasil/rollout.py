"""Trajectory collection, GAE and discriminator reward shaping."""

from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .environments import episode_return
from .errors import NumericError
from .nn_core import DiagonalGaussian, gaussian_log_prob

D_CLAMP = 1e-8
REWARD_MODES = ("env_only", "gasil_only", "combined")


@dataclass(frozen=True)
class Episode:
    """A finished episode. Arrays are read-only once constructed."""

    observations: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    terminal: bool
    ret: float
    episode_id: int = 0

    @classmethod
    def from_arrays(cls, observations, actions, rewards, gamma, terminal=True, episode_id=0):
        obs = np.array(observations, dtype=np.float64)
        act = np.array(actions, dtype=np.float64)
        rew = np.array(rewards, dtype=np.float64)
        if obs.ndim == 1:
            obs = obs[:, None]
        if act.ndim == 1:
            act = act[:, None]
        if not (len(obs) == len(act) == len(rew)):
            raise ValueError("observations, actions and rewards must have equal length")
        for a in (obs, act, rew):
            a.setflags(write=False)
        return cls(obs, act, rew, bool(terminal), episode_return(rew, gamma), int(episode_id))

    def __len__(self):
        return len(self.rewards)

    @property
    def undiscounted_return(self):
        return float(np.sum(self.rewards))


@dataclass
class RolloutBatch:
    observations: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    dones: np.ndarray
    log_probs: np.ndarray
    values: np.ndarray
    bootstrap_value: float
    shaped_rewards: Optional[np.ndarray] = None
    advantages: Optional[np.ndarray] = None
    returns: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.shaped_rewards is None:
            self.shaped_rewards = self.rewards.copy()

    def __len__(self):
        return len(self.rewards)


class RolloutCollector:
    """Runs a policy in one environment for fixed-length batches.

    Episodes that are cut by the batch edge continue in the next call.
    ``rng`` drives action sampling only; the environment owns its own.
    """

    def __init__(self, env, rng, gamma=0.99):
        self.env = env
        self.rng = rng
        self.gamma = gamma
        self.obs = None
        self.steps_taken = 0
        self._ep_obs, self._ep_act, self._ep_rew = [], [], []

    def collect(self, policy, horizon):
        if horizon <= 0:
            raise ValueError("horizon must be positive")
        if self.obs is None:
            self.obs = self.env.reset()
        obs_dim = self.obs.shape[0]
        act_dim = policy.act_dim
        observations = np.empty((horizon, obs_dim))
        actions = np.empty((horizon, act_dim))
        rewards = np.empty(horizon)
        dones = np.zeros(horizon, dtype=bool)
        noise = self.rng.standard_normal((horizon, act_dim))
        std = np.exp(policy.log_std_clamped())
        completed = []
        obs = self.obs
        for t in range(horizon):
            action = policy.mean_action(obs) + std * noise[t]
            out = self.env.step(action)
            observations[t] = obs
            actions[t] = action
            rewards[t] = out.reward
            dones[t] = out.done
            self._ep_obs.append(obs)
            self._ep_act.append(action)
            self._ep_rew.append(out.reward)
            self.steps_taken += 1
            if out.done:
                completed.append(Episode.from_arrays(self._ep_obs, self._ep_act, self._ep_rew, self.gamma,
                                                     terminal=True, episode_id=self.steps_taken))
                self._ep_obs, self._ep_act, self._ep_rew = [], [], []
                obs = self.env.reset()
            else:
                obs = out.observation
        self.obs = obs
        log_probs = gaussian_log_prob(DiagonalGaussian(policy.mean_action(observations), policy.log_std), actions)
        values = policy.value(observations)
        bootstrap = 0.0 if dones[-1] else float(policy.value(obs))
        batch = RolloutBatch(observations, actions, rewards, dones, log_probs, values, bootstrap)
        return batch, completed


def compute_gae(rewards, values, dones, bootstrap, gamma, lambda_gae):
    """Generalized advantage estimates and value targets.

    ``dones[t]`` stops both bootstrapping from ``values[t + 1]`` and the
    backward accumulation at ``t``.
    """
    if not 0.0 <= lambda_gae <= 1.0:
        raise ValueError("lambda_gae must be in [0, 1]")
    rewards = np.asarray(rewards, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    dones = np.asarray(dones, dtype=bool)
    n = rewards.size
    if values.size != n or dones.size != n:
        raise ValueError("rewards, values and dones must have equal length")
    advantages = np.empty(n)
    not_done = 1.0 - dones.astype(np.float64)
    next_values = np.append(values[1:], bootstrap)
    deltas = rewards + gamma * next_values * not_done - values
    decay = gamma * lambda_gae * not_done
    gae = 0.0
    for t in range(n - 1, -1, -1):
        gae = deltas[t] + decay[t] * gae
        advantages[t] = gae
    return advantages, advantages + values


def shape_rewards(batch, discriminator, alpha, mode):
    """Return a copy of ``batch`` with ``shaped_rewards`` set for ``mode``.

    env_only: the environment reward. gasil_only: ``-log D``.
    combined: ``r - alpha * log D``.
    """
    if mode not in REWARD_MODES:
        raise ValueError(f"unknown reward mode {mode!r}")
    if mode == "env_only":
        return replace(batch, shaped_rewards=batch.rewards.copy(), advantages=None, returns=None)
    d = discriminator.prob(batch.observations, batch.actions)
    if not np.all(np.isfinite(d)):
        raise NumericError("discriminator produced non-finite output")
    log_d = np.log(np.clip(d, D_CLAMP, 1.0 - D_CLAMP))
    if mode == "gasil_only":
        shaped = -log_d
    else:
        shaped = batch.rewards - alpha * log_d
    return replace(batch, shaped_rewards=shaped, advantages=None, returns=None)


def finalize_advantages(batch, gamma, lambda_gae):
    adv, ret = compute_gae(batch.shaped_rewards, batch.values, batch.dones, batch.bootstrap_value,
                           gamma, lambda_gae)
    return replace(batch, advantages=adv, returns=ret)


def normalize_advantages(batch, eps=1e-8):
    adv = batch.advantages
    if adv is None or adv.size < 2:
        raise ValueError("need at least two advantages to normalize")
    return replace(batch, advantages=(adv - adv.mean()) / (adv.std() + eps))
