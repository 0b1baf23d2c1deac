"""Clipped-surrogate PPO over separate policy and value networks."""

from dataclasses import dataclass

import numpy as np

from .errors import NumericError
from .nn_core import (
    LOG_STD_MAX,
    LOG_STD_MIN,
    AdamState,
    DiagonalGaussian,
    MlpNetwork,
    adam_step,
    gaussian_entropy,
    gaussian_log_prob,
    gaussian_log_prob_grads,
    param_count,
)


@dataclass
class PpoConfig:
    clip: float = 0.2
    epochs: int = 10
    minibatch_size: int = 64
    lr: float = 3e-4
    value_coef: float = 0.5
    entropy_coef: float = 0.0
    max_grad_norm: float = 0.5

    def __post_init__(self):
        for name in ("clip", "epochs", "minibatch_size", "lr", "value_coef", "max_grad_norm"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.entropy_coef < 0:
            raise ValueError("entropy_coef must be >= 0")


class ActorCritic:
    """Gaussian policy (mean MLP + free log_std) and a value MLP.

    All trainable numbers sit in ``self.params``: policy network, then
    log_std, then value network. One Adam state covers the lot.
    """

    def __init__(self, obs_dim, act_dim, hidden=(64, 64), rng=None):
        self.obs_dim = obs_dim
        self.act_dim = act_dim
        pi_sizes = [obs_dim, *hidden, act_dim]
        v_sizes = [obs_dim, *hidden, 1]
        n_pi = param_count(pi_sizes)
        n_v = param_count(v_sizes)
        self.params = np.zeros(n_pi + act_dim + n_v)
        self.policy_net = MlpNetwork(pi_sizes, self.params[:n_pi], rng, output_gain=0.01)
        self.log_std = self.params[n_pi:n_pi + act_dim]
        self.value_net = MlpNetwork(v_sizes, self.params[n_pi + act_dim:], rng, output_gain=1.0)
        self._pi_slice = slice(0, n_pi)
        self._ls_slice = slice(n_pi, n_pi + act_dim)
        self._v_slice = slice(n_pi + act_dim, self.params.size)

    def log_std_clamped(self):
        return np.clip(self.log_std, LOG_STD_MIN, LOG_STD_MAX)

    def mean_action(self, obs):
        return self.policy_net.forward(obs)[0]

    def distribution(self, obs):
        return DiagonalGaussian(self.mean_action(obs), self.log_std)

    def value(self, obs):
        v = self.value_net.forward(obs)[0]
        return v[..., 0] if v.ndim > 1 else float(v[0])

    def act(self, obs, rng=None, deterministic=False):
        mu = self.mean_action(obs)
        if deterministic:
            return mu
        return mu + np.exp(self.log_std_clamped()) * rng.standard_normal(mu.shape)

    def policy_params(self):
        return self.params[:self._ls_slice.stop]

    def copy(self):
        other = ActorCritic(self.obs_dim, self.act_dim, tuple(self.policy_net.layer_sizes[1:-1]))
        other.params[...] = self.params
        return other


def clipped_surrogate(ratio, advantages, clip):
    """Per-sample ``min(ratio * A, clip(ratio) * A)``."""
    return np.minimum(ratio * advantages, np.clip(ratio, 1.0 - clip, 1.0 + clip) * advantages)


def clip_grad_norm(grad, max_norm):
    norm = float(np.sqrt(grad @ grad))
    if norm > max_norm:
        grad = grad * (max_norm / (norm + 1e-12))
    return grad, norm


def ppo_loss_and_grad(ac, obs, actions, old_log_probs, advantages, returns, config):
    """Loss (to minimize) and its gradient w.r.t. ``ac.params`` for one minibatch."""
    n = len(obs)
    mu, pi_cache = ac.policy_net.forward(obs)
    dist = DiagonalGaussian(mu, ac.log_std)
    log_probs = gaussian_log_prob(dist, actions)
    ratio = np.exp(log_probs - old_log_probs)
    clipped_ratio = np.clip(ratio, 1.0 - config.clip, 1.0 + config.clip)
    unclipped_term = ratio * advantages
    surr = np.minimum(unclipped_term, clipped_ratio * advantages)
    surrogate_loss = -surr.mean()
    entropy = gaussian_entropy(dist)

    v, v_cache = ac.value_net.forward(obs)
    v = v[:, 0]
    value_loss = float(np.mean((v - returns) ** 2))
    loss = surrogate_loss + config.value_coef * value_loss - config.entropy_coef * entropy

    # only samples where the unclipped branch is active carry gradient
    active = unclipped_term <= clipped_ratio * advantages
    dloss_dlogp = np.where(active, -unclipped_term / n, 0.0)
    d_mean, d_log_std = gaussian_log_prob_grads(dist, actions)
    grad = np.zeros_like(ac.params)
    grad[ac._pi_slice] = ac.policy_net.backward(pi_cache, dloss_dlogp[:, None] * d_mean)
    g_ls = dloss_dlogp @ d_log_std - config.entropy_coef
    in_range = (ac.log_std > LOG_STD_MIN) & (ac.log_std < LOG_STD_MAX)
    grad[ac._ls_slice] = np.where(in_range, g_ls, 0.0)
    grad[ac._v_slice] = ac.value_net.backward(v_cache, (config.value_coef * 2.0 / n * (v - returns))[:, None])

    stats = {
        "surrogate_loss": float(surrogate_loss),
        "value_loss": value_loss,
        "entropy": entropy,
        "clip_fraction": float(np.mean(np.abs(ratio - 1.0) > config.clip)),
        "approx_kl": float(np.mean(old_log_probs - log_probs)),
    }
    return float(loss), grad, stats


def ppo_update(ac, batch, config, optimizer, rng):
    """Run ``config.epochs`` passes of shuffled minibatch updates on ``batch``.

    Minibatches with a non-finite loss or gradient are skipped and counted in
    ``stats["incidents"]``.
    """
    if batch.advantages is None or batch.returns is None:
        raise ValueError("batch advantages must be finalized before the PPO update")
    n = len(batch)
    totals = {"surrogate_loss": 0.0, "value_loss": 0.0, "entropy": 0.0, "clip_fraction": 0.0, "approx_kl": 0.0}
    updates = 0
    incidents = 0
    max_post_clip_norm = 0.0
    for _ in range(config.epochs):
        order = rng.permutation(n)
        for start in range(0, n, config.minibatch_size):
            idx = order[start:start + config.minibatch_size]
            loss, grad, stats = ppo_loss_and_grad(
                ac, batch.observations[idx], batch.actions[idx], batch.log_probs[idx],
                batch.advantages[idx], batch.returns[idx], config)
            if not np.isfinite(loss):
                incidents += 1
                continue
            grad, _ = clip_grad_norm(grad, config.max_grad_norm)
            try:
                adam_step(ac.params, grad, optimizer, lr=config.lr)
            except NumericError:
                incidents += 1
                continue
            max_post_clip_norm = max(max_post_clip_norm, float(np.sqrt(grad @ grad)))
            for k in totals:
                totals[k] += stats[k]
            updates += 1
    out = {k: (v / updates if updates else float("nan")) for k, v in totals.items()}
    out["updates"] = updates
    out["incidents"] = incidents
    out["max_grad_norm_after_clip"] = max_post_clip_norm
    return out


def make_optimizer(ac, lr=3e-4):
    return AdamState(ac.params.size, lr=lr)


def vanilla_policy_gradient(ac, batch):
    """Ascent direction of ``mean(log pi(a|s) * A)`` w.r.t. the policy parameters."""
    n = len(batch)
    mu, cache = ac.policy_net.forward(batch.observations)
    dist = DiagonalGaussian(mu, ac.log_std)
    d_mean, d_log_std = gaussian_log_prob_grads(dist, batch.actions)
    w = batch.advantages / n
    g = np.zeros(ac._ls_slice.stop)
    g[ac._pi_slice] = ac.policy_net.backward(cache, w[:, None] * d_mean)
    g[ac._ls_slice] = w @ d_log_std
    return g


def evaluate_policy(env, policy, episodes, rng=None, deterministic=True):
    """Mean undiscounted environment return over ``episodes`` full episodes."""
    if episodes < 1:
        raise ValueError("episodes must be >= 1")
    returns = []
    for _ in range(episodes):
        obs = env.reset()
        total = 0.0
        done = False
        while not done:
            out = env.step(policy.act(obs, rng, deterministic=deterministic))
            total += out.reward
            done = out.done
            obs = out.observation
        returns.append(total)
    return float(np.mean(returns)), returns
