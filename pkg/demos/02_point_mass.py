"""
The point-mass environment and its wrappers
===========================================

A point moves in the unit square and collects coloured objects: green is
worth +10, blue +5, orange -5. Each step costs ``0.1 * speed``. Two wrappers
change the reward and observation channels without touching the dynamics.
"""

import numpy as np

from gasil.environments import EnvConfig, make_env

config = EnvConfig(action_scale=0.05)
env = make_env(config, np.random.default_rng(0))
obs = env.reset()
print("observation size", obs.size, "(position, then relative position, collected flag and value per object)")

# drive straight up for a whole episode
total = 0.0
for t in range(config.max_steps):
    out = env.step(np.array([0.0, 1.0]))
    total += out.reward
    if out.done:
        break
print(f"straight up: return {total:.3f} over {t + 1} steps")

# delaying the reward moves it in time but keeps the sum
delayed = make_env(EnvConfig(action_scale=0.05, delay=20), np.random.default_rng(0))
delayed.reset()
rewards = [delayed.step(np.array([0.0, 1.0])).reward for _ in range(config.max_steps)]
nonzero = [t for t, r in enumerate(rewards) if r != 0.0]
print(f"delay=20: return {sum(rewards):.3f}, rewards released at steps {nonzero}")

# observation noise perturbs what the agent sees, not where it is
noisy = make_env(EnvConfig(action_scale=0.05, obs_noise=0.1), np.random.default_rng(0))
print("noisy first observation", np.round(noisy.reset()[:2], 3), "true start", config.start)
