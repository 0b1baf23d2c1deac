"""
The good-trajectory buffer and the discriminator
================================================

The buffer keeps the highest-return episodes under a step budget. The
discriminator learns to tell the current policy's state-action pairs
(D near 1) from the buffer's (D near 0), and ``-log D`` becomes an extra
reward that pulls the policy toward the buffer.
"""

import numpy as np

from gasil.imitation import Discriminator, GoodTrajectoryBuffer, discriminator_train_step, make_disc_optimizer
from gasil.rollout import Episode

rng = np.random.default_rng(0)


def episode(ret_level, length=50):
    obs = rng.normal(ret_level, 0.1, size=(length, 2))
    act = rng.normal(ret_level, 0.1, size=(length, 1))
    rewards = np.full(length, ret_level / length)
    return Episode.from_arrays(obs, act, rewards, gamma=1.0)


buffer = GoodTrajectoryBuffer(capacity_steps=150)
buffer.update([episode(level) for level in (0.0, 1.0, 2.0, 3.0, 4.0)])
print("kept returns", [round(ep.ret, 2) for ep in buffer.episodes])

disc = Discriminator(obs_dim=2, act_dim=1, hidden=(32, 32), rng=rng)
optimizer = make_disc_optimizer(disc, lr=3e-4)
policy = episode(0.0, 500)
for step in range(300):
    idx = rng.integers(0, len(policy), 64)
    objective = discriminator_train_step(disc, (policy.observations[idx], policy.actions[idx]),
                                         buffer.sample(64, rng), optimizer)
buf_obs, buf_act = buffer.transitions()
print(f"objective {objective:.3f}; mean D on policy {disc.prob(policy.observations, policy.actions).mean():.3f}, "
      f"on buffer {disc.prob(buf_obs, buf_act).mean():.3f}")
print(f"mean -log D reward: policy {disc.reward(policy.observations, policy.actions).mean():.3f}, "
      f"buffer {disc.reward(buf_obs, buf_act).mean():.3f}")
