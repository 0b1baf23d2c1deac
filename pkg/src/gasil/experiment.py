"""Seeded experiment runner: PPO vs PPO+GASIL on the point mass."""

import csv
import dataclasses
import hashlib
import json
import math
import time
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from .environments import DEFAULT_OBJECTS, EnvConfig, as_object, make_env
from .errors import ConfigError
from .imitation import (
    Discriminator,
    GasilConfig,
    GoodTrajectoryBuffer,
    buffer_bytes,
    gasil_iteration,
    make_disc_optimizer,
)
from .nn_core import checkpoint_bytes
from .ppo import ActorCritic, PpoConfig, evaluate_policy, make_optimizer
from .rollout import RolloutCollector

AGENTS = ("ppo", "ppo_gasil")

# hyperparameter grids from the published MuJoCo setup
TABLE1 = {
    "lr": (3e-4, 1e-4, 5e-5, 3e-5),
    "horizon": (2048,),
    "epochs": (10,),
    "minibatch_size": (64,),
    "gamma": (0.99,),
    "lambda_gae": (0.95,),
    "entropy_coef": (0.0,),
    "disc_minibatch": (128,),
    "n_disc": (1, 5, 10, 20),
    "disc_lr": (3e-4, 1e-4, 2e-5, 1e-5),
    "buffer_capacity": (1000, 10000),
    "alpha": (0.02, 0.1, 0.2, 1.0),
}

CSV_COLUMNS = (
    "iteration", "env_steps", "eval_return", "train_return", "episodes",
    "buffer_episodes", "buffer_min_return", "buffer_mean_return",
    "disc_objective", "disc_policy_mean", "disc_buffer_mean",
    "alpha", "shaped_reward_mean",
    "surrogate_loss", "value_loss", "entropy", "clip_fraction", "approx_kl", "incidents",
)

ENV_FIELDS = ("env", "objects", "start", "random_start", "start_noise", "max_steps", "max_speed",
              "actuation_cost", "action_scale", "delay", "obs_noise")


@dataclass
class ExperimentConfig:
    agent: str = "ppo_gasil"
    # environment
    env: str = "point_mass"
    objects: tuple = DEFAULT_OBJECTS
    start: tuple = (0.5, 0.3)
    random_start: bool = False
    start_noise: float = 0.05
    max_steps: int = 128
    max_speed: float = 0.05
    actuation_cost: float = 0.1
    action_scale: float = 0.05
    delay: int = 1
    obs_noise: float = 0.0
    # training budget (98 * 2048 ~ 200k)
    total_steps: int = 98 * 2048
    horizon: int = 2048
    # PPO
    epochs: int = 10
    minibatch_size: int = 64
    lr: float = 1e-4
    gamma: float = 0.99
    lambda_gae: float = 0.95
    entropy_coef: float = 0.0
    clip: float = 0.2
    value_coef: float = 0.5
    max_grad_norm: float = 0.5
    hidden: tuple = (64, 64)
    # GASIL
    disc_minibatch: int = 128
    n_disc: int = 10
    disc_lr: float = 3e-4
    buffer_capacity: int = 1000
    alpha: float = 0.2
    reward_mode: str = "combined"
    alpha_ramp: tuple = ()
    # bookkeeping
    seed: int = 0
    eval_interval: int = 10
    eval_episodes: int = 10
    output_dir: str = ""
    max_incidents: int = 100

    def __post_init__(self):
        try:
            self.objects = tuple((o.position, o.value, o.radius) for o in map(as_object, self.objects))
        except (TypeError, ValueError, KeyError) as exc:
            raise ConfigError("objects", f"expected (position, value, radius) triples: {exc}") from exc
        self.start = tuple(self.start)
        self.hidden = tuple(int(h) for h in self.hidden)
        self.alpha_ramp = tuple(self.alpha_ramp)
        self.validate()

    def validate(self):
        if self.agent not in AGENTS:
            raise ConfigError("agent", f"must be one of {AGENTS}, got {self.agent!r}")
        for name in ("total_steps", "horizon", "epochs", "minibatch_size", "disc_minibatch",
                     "buffer_capacity", "eval_interval", "eval_episodes", "max_steps"):
            if int(getattr(self, name)) < 1:
                raise ConfigError(name, "must be a positive integer")
        if self.total_steps % self.horizon:
            raise ConfigError("total_steps", f"must be divisible by horizon ({self.horizon})")
        for name in ("lr", "disc_lr", "clip", "value_coef", "max_grad_norm", "action_scale"):
            if not getattr(self, name) > 0:
                raise ConfigError(name, "must be positive")
        if not 0 < self.gamma <= 1:
            raise ConfigError("gamma", "must be in (0, 1]")
        if not 0 <= self.lambda_gae <= 1:
            raise ConfigError("lambda_gae", "must be in [0, 1]")
        for name in ("entropy_coef", "alpha", "n_disc", "obs_noise"):
            if getattr(self, name) < 0:
                raise ConfigError(name, "must be >= 0")
        if self.delay < 1:
            raise ConfigError("delay", "must be >= 1")
        if self.reward_mode not in ("env_only", "gasil_only", "combined"):
            raise ConfigError("reward_mode", f"unknown mode {self.reward_mode!r}")
        if self.alpha_ramp and len(self.alpha_ramp) != 3:
            raise ConfigError("alpha_ramp", "expected (start_step, end_step, final_alpha)")
        try:
            self.env_config()
        except ConfigError:
            raise
        except (TypeError, ValueError, KeyError) as exc:
            raise ConfigError("objects", str(exc)) from exc

    def env_config(self):
        return EnvConfig(**{k: getattr(self, k) for k in ENV_FIELDS}, seed=self.seed)

    @property
    def iterations(self):
        return self.total_steps // self.horizon

    def alpha_at(self, env_steps):
        """Shaping scale after ``env_steps`` steps; a linear ramp when ``alpha_ramp`` is set."""
        if not self.alpha_ramp:
            return self.alpha
        start, end, final = self.alpha_ramp
        if env_steps <= start:
            return 0.0
        if env_steps >= end:
            return float(final)
        return float(final) * (env_steps - start) / (end - start)

    def to_dict(self):
        d = dataclasses.asdict(self)
        d["objects"] = [[list(o.position), o.value, o.radius] for o in self.env_config().objects]
        for k in ("start", "hidden", "alpha_ramp"):
            d[k] = list(d[k])
        return d

    def config_hash(self):
        d = self.to_dict()
        d.pop("output_dir")
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()[:16]

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)

    @classmethod
    def from_dict(cls, d):
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(sorted(unknown)[0], "unknown configuration key")
        return cls(**d)


def load_config(path, base=None, **overrides):
    """Read a flat TOML config; keys in the file override ``base`` and ``overrides``."""
    import tomli

    with open(path, "rb") as f:
        data = tomli.load(f)
    base = base or ExperimentConfig()
    merged = {**{k: v for k, v in dataclasses.asdict(base).items()}, **overrides, **data}
    return ExperimentConfig.from_dict(merged)


@dataclass
class RunRecord:
    config: ExperimentConfig
    rows: list = field(default_factory=list)
    metadata: dict = field(default_factory=dict)
    artifacts: dict = field(default_factory=dict, repr=False)

    @property
    def final_eval_return(self):
        evals = [r["eval_return"] for r in self.rows if not _missing(r["eval_return"])]
        return evals[-1] if evals else float("nan")

    def curve(self):
        pts = [(r["env_steps"], r["eval_return"]) for r in self.rows if not _missing(r["eval_return"])]
        return np.array([p[0] for p in pts], dtype=float), np.array([p[1] for p in pts], dtype=float)

    @property
    def incidents(self):
        return sum(int(r["incidents"]) for r in self.rows)


def _missing(x):
    return x is None or (isinstance(x, float) and math.isnan(x))


def format_cell(x):
    if _missing(x):
        return ""
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def csv_text(rows):
    lines = [",".join(CSV_COLUMNS)]
    for r in rows:
        lines.append(",".join(format_cell(r.get(c)) for c in CSV_COLUMNS))
    return "\n".join(lines) + "\n"


def read_csv(path):
    rows = []
    with open(path, newline="") as f:
        for raw in csv.DictReader(f):
            row = {}
            for k, v in raw.items():
                if v == "":
                    row[k] = float("nan")
                elif k in ("iteration", "env_steps", "episodes", "buffer_episodes", "incidents"):
                    row[k] = int(v)
                else:
                    row[k] = float(v)
            rows.append(row)
    return rows


def _streams(seed):
    names = ("policy_init", "disc_init", "env", "action", "ppo", "disc", "eval")
    children = np.random.SeedSequence(seed).spawn(len(names))
    return {n: np.random.default_rng(s) for n, s in zip(names, children)}


class Trainer:
    """Owns the networks, buffer and rng streams of one run."""

    def __init__(self, config):
        self.config = config
        self.rngs = _streams(config.seed)
        self.env_config = config.env_config()
        self.env = make_env(self.env_config, self.rngs["env"])
        obs_dim, act_dim = self.env.obs_dim, self.env.act_dim
        self.ac = ActorCritic(obs_dim, act_dim, config.hidden, rng=self.rngs["policy_init"])
        self.ppo_config = PpoConfig(clip=config.clip, epochs=config.epochs, minibatch_size=config.minibatch_size,
                                    lr=config.lr, value_coef=config.value_coef,
                                    entropy_coef=config.entropy_coef, max_grad_norm=config.max_grad_norm)
        self.optimizer = make_optimizer(self.ac, config.lr)
        self.disc = Discriminator(obs_dim, act_dim, config.hidden, rng=self.rngs["disc_init"])
        self.disc_optimizer = make_disc_optimizer(self.disc, config.disc_lr)
        self.buffer = GoodTrajectoryBuffer(config.buffer_capacity)
        self.collector = RolloutCollector(self.env, self.rngs["action"], config.gamma)
        self.iteration = 0

    @property
    def env_steps(self):
        return self.iteration * self.config.horizon

    def gasil_config(self):
        cfg = self.config
        if cfg.agent == "ppo":
            return GasilConfig(alpha=0.0, n_disc=0, disc_minibatch=cfg.disc_minibatch, reward_mode="env_only",
                               gamma=cfg.gamma, lambda_gae=cfg.lambda_gae)
        return GasilConfig(alpha=cfg.alpha_at(self.env_steps), n_disc=int(cfg.n_disc),
                           disc_minibatch=cfg.disc_minibatch, reward_mode=cfg.reward_mode,
                           gamma=cfg.gamma, lambda_gae=cfg.lambda_gae)

    def step(self):
        """Collect one horizon and update; returns the CSV row (without eval)."""
        cfg = self.config
        gcfg = self.gasil_config()
        batch, episodes = self.collector.collect(self.ac, cfg.horizon)
        stats = gasil_iteration(self.ac, self.optimizer, self.ppo_config, self.disc, self.disc_optimizer,
                                self.buffer, batch, episodes, gcfg, self.rngs["disc"], self.rngs["ppo"])
        self.iteration += 1
        train_return = float(np.mean([ep.undiscounted_return for ep in episodes])) if episodes else float("nan")
        row = {
            "iteration": self.iteration,
            "env_steps": self.env_steps,
            "eval_return": float("nan"),
            "train_return": train_return,
            "episodes": len(episodes),
            "buffer_episodes": len(self.buffer),
            "buffer_min_return": self.buffer.min_return,
            "buffer_mean_return": self.buffer.mean_return,
            "alpha": gcfg.alpha,
        }
        for k in ("disc_objective", "disc_policy_mean", "disc_buffer_mean", "shaped_reward_mean",
                  "surrogate_loss", "value_loss", "entropy", "clip_fraction", "approx_kl", "incidents"):
            row[k] = stats[k]
        return row

    def evaluate(self, episodes=None, deterministic=True):
        cfg = self.config
        rng = self.rngs["eval"].spawn(1)[0]
        env = make_env(self.env_config, rng)
        mean, _ = evaluate_policy(env, self.ac, episodes or cfg.eval_episodes, rng, deterministic)
        return mean

    def artifacts(self):
        """Byte contents of the policy, value and discriminator checkpoints and the buffer snapshot."""
        return {
            "policy.ckpt": checkpoint_bytes(self.ac.policy_net, self.ac.log_std),
            "value.ckpt": checkpoint_bytes(self.ac.value_net),
            "disc.ckpt": checkpoint_bytes(self.disc.net),
            "buffer.bin": buffer_bytes(self.buffer, self.env.obs_dim, self.env.act_dim),
        }


def run_experiment(config, progress=None):
    """Train one agent for ``config.total_steps`` steps.

    When ``config.output_dir`` is set, ``progress.csv`` is written row by row
    and the final checkpoints, buffer snapshot and ``run.json`` metadata land
    next to it.
    """
    started = time.time()
    trainer = Trainer(config)
    out_dir = Path(config.output_dir) if config.output_dir else None
    csv_file = None
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
        csv_file = open(out_dir / "progress.csv", "w", newline="")
        csv_file.write(",".join(CSV_COLUMNS) + "\n")
    record = RunRecord(config)
    try:
        for it in range(1, config.iterations + 1):
            row = trainer.step()
            if it % config.eval_interval == 0 or it == config.iterations:
                row["eval_return"] = trainer.evaluate()
            record.rows.append(row)
            if csv_file is not None:
                csv_file.write(",".join(format_cell(row.get(c)) for c in CSV_COLUMNS) + "\n")
                csv_file.flush()
            if progress is not None:
                progress(row)
    finally:
        if csv_file is not None:
            csv_file.close()
    record.metadata = {
        "config_hash": config.config_hash(),
        "seed": config.seed,
        "agent": config.agent,
        "wall_clock_seconds": time.time() - started,
        "incidents": record.incidents,
        "final_eval_return": record.final_eval_return,
    }
    record.artifacts = trainer.artifacts()
    if out_dir is not None:
        for name, data in record.artifacts.items():
            (out_dir / name).write_bytes(data)
        (out_dir / "run.json").write_text(json.dumps({"metadata": record.metadata, "config": config.to_dict()},
                                                      indent=2, sort_keys=True))
    return record


SWEEP_AXES = ("buffer_capacity", "n_disc", "alpha", "obs_noise", "delay")
SUMMARY_COLUMNS = ("axis", "value", "seed", "agent", "status", "final_eval_return", "incidents",
                   "wall_clock_seconds", "error")


def _sweep_run(job):
    base, axis, value, seed, out = job
    try:
        config = base.replace(**{axis: value}, seed=seed, output_dir=out)
        record = run_experiment(config)
        record.metadata["status"] = "ok"
    except Exception as exc:  # one bad run must not end the sweep
        record = RunRecord(base.replace(seed=seed, output_dir=out),
                           metadata={"status": "failed", "error": f"{type(exc).__name__}: {exc}"})
    record.metadata["sweep_value"] = value
    return record


def run_sweep(base, axis, values, seeds=None, workers=1):
    """One run per ``(value, seed)`` pair along a single hyperparameter axis.

    Runs share no state: each builds its own networks and rng streams from
    its config, so reordering ``values`` leaves every run unchanged. With
    ``base.output_dir`` set, run ``i`` lands in
    ``<output_dir>/<axis>=<value>/seed=<seed>`` and a ``summary.csv`` with one
    line per run is written at the top. A run that raises is recorded as
    failed and the sweep moves on.
    """
    if axis not in SWEEP_AXES:
        raise ConfigError("axis", f"must be one of {SWEEP_AXES}")
    values = list(values)
    if not values:
        raise ConfigError("values", "sweep needs at least one value")
    seeds = [base.seed] if seeds is None else list(seeds)
    root = Path(base.output_dir) if base.output_dir else None
    jobs = []
    for value in values:
        for seed in seeds:
            out = str(root / f"{axis}={value}" / f"seed={seed}") if root else ""
            jobs.append((base, axis, value, seed, out))
    if workers > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(workers) as pool:
            records = list(pool.map(_sweep_run, jobs))
    else:
        records = [_sweep_run(j) for j in jobs]
    if root is not None:
        root.mkdir(parents=True, exist_ok=True)
        (root / "summary.csv").write_text(summary_csv_text(records, axis))
    return records


def summary_csv_text(records, axis):
    lines = [",".join(SUMMARY_COLUMNS)]
    for r in records:
        md = r.metadata
        cells = [axis, str(md["sweep_value"]), str(r.config.seed), r.config.agent, md.get("status", "ok"),
                 format_cell(r.final_eval_return), str(r.incidents), format_cell(md.get("wall_clock_seconds")),
                 md.get("error", "").replace(",", ";").replace("\n", " ")]
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


def load_run(run_dir):
    """Rebuild a :class:`RunRecord` from a run directory (CSV plus ``run.json``)."""
    run_dir = Path(run_dir)
    meta = json.loads((run_dir / "run.json").read_text())
    cfg = ExperimentConfig.from_dict(meta["config"])
    return RunRecord(cfg, read_csv(run_dir / "progress.csv"), meta["metadata"])
