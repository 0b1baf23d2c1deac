"""
Collecting rollouts and computing advantages
============================================

A rollout collector runs the Gaussian policy for a fixed horizon and hands
back a batch plus the episodes that finished inside it. Generalized
advantage estimation turns rewards and value predictions into PPO targets.
"""

import numpy as np

from gasil.environments import EnvConfig, make_env
from gasil.ppo import ActorCritic
from gasil.rollout import RolloutCollector, compute_gae, finalize_advantages, normalize_advantages

env = make_env(EnvConfig(action_scale=0.05), np.random.default_rng(1))
ac = ActorCritic(env.obs_dim, env.act_dim, rng=np.random.default_rng(2))
collector = RolloutCollector(env, np.random.default_rng(3), gamma=0.99)

batch, episodes = collector.collect(ac, 512)
print(f"{len(batch)} steps, {len(episodes)} finished episodes, "
      f"returns {[round(ep.undiscounted_return, 2) for ep in episodes]}")

batch = normalize_advantages(finalize_advantages(batch, gamma=0.99, lambda_gae=0.95))
print(f"advantages: mean {batch.advantages.mean():+.2e}, std {batch.advantages.std():.3f}")

# a three-step episode by hand: with lambda=1 the advantage is return minus value
adv, ret = compute_gae(np.array([0.0, 0.0, 1.0]), np.array([0.5, 0.5, 0.5]),
                       np.array([False, False, True]), 0.0, 0.9, 1.0)
print("hand example advantages", np.round(adv, 4), "returns", np.round(ret, 4))
