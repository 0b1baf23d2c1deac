"""2D point-mass task and reward/observation wrappers.

The point mass lives in the unit square. Actions are velocities, clipped
componentwise to ``max_speed`` per step. Touching an object pays its value
once; every step also costs ``actuation_cost * ||clipped action||``.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, ProtocolError, ShapeError

GREEN = 10.0
BLUE = 5.0
ORANGE = -5.0

# (x, y), value, radius. The greens sit above a row of oranges with gaps; the
# blues flank the start and pull a greedy policy sideways.
DEFAULT_OBJECTS = (
    ((0.35, 0.70), GREEN, 0.06),
    ((0.65, 0.70), GREEN, 0.06),
    ((0.20, 0.30), BLUE, 0.06),
    ((0.80, 0.30), BLUE, 0.06),
    ((0.20, 0.52), ORANGE, 0.06),
    ((0.50, 0.52), ORANGE, 0.06),
    ((0.80, 0.52), ORANGE, 0.06),
)


@dataclass(frozen=True)
class PointObject:
    position: tuple
    value: float
    radius: float = 0.06


@dataclass
class EnvConfig:
    env: str = "point_mass"
    objects: tuple = DEFAULT_OBJECTS
    start: tuple = (0.5, 0.3)
    random_start: bool = False
    start_noise: float = 0.05
    max_steps: int = 128
    max_speed: float = 0.05
    actuation_cost: float = 0.1
    action_scale: float = 1.0
    delay: int = 1
    obs_noise: float = 0.0
    seed: int = 0

    def __post_init__(self):
        self.objects = tuple(as_object(o) for o in self.objects)
        self.start = tuple(float(x) for x in self.start)
        if self.env != "point_mass":
            raise ConfigError("env", f"unknown environment {self.env!r}")
        if self.delay < 1:
            raise ConfigError("delay", "must be >= 1")
        if self.obs_noise < 0:
            raise ConfigError("obs_noise", "must be >= 0")
        if self.max_steps < 1:
            raise ConfigError("max_steps", "must be >= 1")
        if self.action_scale <= 0:
            raise ConfigError("action_scale", "must be > 0")


def as_object(spec):
    if isinstance(spec, PointObject):
        return spec
    if isinstance(spec, dict):
        return PointObject(tuple(float(x) for x in spec["position"]), float(spec["value"]),
                           float(spec.get("radius", 0.06)))
    position, value, radius = spec
    return PointObject(tuple(float(x) for x in position), float(value), float(radius))


@dataclass
class EnvStep:
    observation: np.ndarray
    reward: float
    done: bool
    info: dict = field(default_factory=dict)


class PointMass2D:
    """Collect green (+10) and blue (+5) objects, avoid orange (-5) ones."""

    def __init__(self, config=None, rng=None):
        self.config = config or EnvConfig()
        self.rng = rng if rng is not None else np.random.default_rng(self.config.seed)
        objs = self.config.objects
        self.obj_pos = np.array([o.position for o in objs], dtype=np.float64).reshape(-1, 2)
        self.obj_value = np.array([o.value for o in objs], dtype=np.float64)
        self.obj_radius = np.array([o.radius for o in objs], dtype=np.float64)
        self.n_objects = len(objs)
        self.obs_dim = 2 + 4 * self.n_objects
        self.act_dim = 2
        self.position = np.array(self.config.start)
        self.collected = np.zeros(self.n_objects, dtype=bool)
        self.steps = 0
        self.done = True
        # per object: relative x, relative y, collected flag, value / 10
        self._template = np.zeros(self.obs_dim)
        self._template[5::4] = self.obj_value / 10.0
        self._radius_sq = self.obj_radius ** 2

    def observe(self):
        obs = self._template.copy()
        obs[:2] = self.position
        rel = self.obj_pos - self.position
        obs[2::4] = rel[:, 0]
        obs[3::4] = rel[:, 1]
        obs[4::4] = self.collected
        return obs

    def reset(self):
        start = np.array(self.config.start)
        if self.config.random_start:
            start = start + self.rng.uniform(-self.config.start_noise, self.config.start_noise, size=2)
        self.position = np.clip(start, 0.0, 1.0)
        self.collected[:] = False
        self.steps = 0
        self.done = False
        return self.observe()

    def step(self, action):
        if self.done:
            raise ProtocolError("step() called on a finished episode; call reset() first")
        action = np.asarray(action, dtype=np.float64)
        if action.shape != (2,):
            raise ShapeError(f"point mass action must have shape (2,), got {action.shape}")
        cfg = self.config
        m = cfg.max_speed
        vx = min(max(float(action[0]) * cfg.action_scale, -m), m)
        vy = min(max(float(action[1]) * cfg.action_scale, -m), m)
        x = min(max(self.position[0] + vx, 0.0), 1.0)
        y = min(max(self.position[1] + vy, 0.0), 1.0)
        self.position = np.array([x, y])
        object_reward = 0.0
        hits = 0
        if self.n_objects:
            rel = self.obj_pos - self.position
            hit = (rel[:, 0] ** 2 + rel[:, 1] ** 2 <= self._radius_sq) & ~self.collected
            if hit.any():
                self.collected |= hit
                object_reward = float(self.obj_value[hit].sum())
                hits = int(hit.sum())
        reward = object_reward - cfg.actuation_cost * math.sqrt(vx * vx + vy * vy)
        self.steps += 1
        self.done = self.steps >= cfg.max_steps
        info = {"objects_collected": hits, "raw_reward": reward}
        return EnvStep(self.observe(), reward, self.done, info)


class DelayedRewardWrapper:
    """Withhold rewards and pay them out every ``delay`` steps or at episode end."""

    def __init__(self, env, delay):
        if delay < 1:
            raise ValueError("delay must be >= 1")
        self.env = env
        self.delay = int(delay)
        self.accumulated = 0.0
        self.since_release = 0

    def __getattr__(self, name):
        # guard keeps copy/pickle from recursing before ``env`` is set
        if name == "env":
            raise AttributeError(name)
        return getattr(self.env, name)

    def reset(self):
        self.accumulated = 0.0
        self.since_release = 0
        return self.env.reset()

    def step(self, action):
        out = self.env.step(action)
        self.accumulated += out.reward
        self.since_release += 1
        if self.since_release == self.delay or out.done:
            reward = self.accumulated
            self.accumulated = 0.0
            self.since_release = 0
        else:
            reward = 0.0
        return EnvStep(out.observation, reward, out.done, out.info)


class ObservationNoiseWrapper:
    """Add i.i.d. Gaussian noise of std ``sigma`` to each observation component."""

    def __init__(self, env, sigma, rng):
        if sigma < 0:
            raise ValueError("sigma must be >= 0")
        self.env = env
        self.sigma = float(sigma)
        self.rng = rng

    def __getattr__(self, name):
        # guard keeps copy/pickle from recursing before ``env`` is set
        if name == "env":
            raise AttributeError(name)
        return getattr(self.env, name)

    def _noisy(self, obs):
        if self.sigma == 0.0:
            return obs
        return obs + self.sigma * self.rng.standard_normal(obs.shape)

    def reset(self):
        return self._noisy(self.env.reset())

    def step(self, action):
        out = self.env.step(action)
        return EnvStep(self._noisy(out.observation), out.reward, out.done, out.info)


def make_env(config, rng):
    """Build the point mass with the delay and noise wrappers the config asks for.

    ``rng`` is split into independent streams for the start position and the
    observation noise, so adding noise leaves the underlying dynamics untouched.
    """
    env_rng, noise_rng = rng.spawn(2)
    env = PointMass2D(config, env_rng)
    if config.delay > 1:
        env = DelayedRewardWrapper(env, config.delay)
    if config.obs_noise > 0:
        env = ObservationNoiseWrapper(env, config.obs_noise, noise_rng)
    return env


def episode_return(rewards, gamma):
    """Discounted return ``sum_t gamma**t * r_t``."""
    rewards = np.asarray(rewards, dtype=np.float64)
    if not 0.0 < gamma <= 1.0:
        raise ValueError("gamma must be in (0, 1]")
    return float(np.sum(rewards * gamma ** np.arange(rewards.size)))
