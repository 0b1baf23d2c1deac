"""Command-line driver: ``python -m gasil {train,sweep,plot,snapshot,eval}``.

Every :class:`ExperimentConfig` field has a matching ``--field-name`` flag.
Values from ``--config FILE`` (TOML) override flags. Exit codes: 0 on
success, 2 on an invalid configuration, 3 when a run records more numeric
incidents than ``max_incidents``.
"""

import argparse
import json
import sys
from dataclasses import fields
from pathlib import Path

import numpy as np

from .environments import make_env
from .errors import ConfigError, IncidentLimitError, UnsupportedEnvError, UsageError
from .experiment import ENV_FIELDS, SWEEP_AXES, ExperimentConfig, load_config, load_run, run_experiment, run_sweep
from .nn_core import load_checkpoint
from .plotting import render_curves, render_pointmass_snapshot
from .ppo import evaluate_policy

EXIT_OK, EXIT_CONFIG, EXIT_INCIDENTS = 0, 2, 3


def _parse_bool(text):
    lowered = text.lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"expected a boolean, got {text!r}")


def _add_config_flags(parser):
    defaults = ExperimentConfig()
    for f in fields(ExperimentConfig):
        default = getattr(defaults, f.name)
        flag = "--" + f.name.replace("_", "-")
        if isinstance(default, bool):
            kind, hint = _parse_bool, "BOOL"
        elif isinstance(default, int):
            kind, hint = int, "INT"
        elif isinstance(default, float):
            kind, hint = float, "FLOAT"
        elif isinstance(default, tuple):
            kind, hint = json.loads, "JSON"
        else:
            kind, hint = str, "STR"
        parser.add_argument(flag, dest=f.name, type=kind, default=None, metavar=hint)
    parser.add_argument("--config", type=Path, default=None, help="TOML file; its keys override flags")


def config_from_args(args):
    flags = {f.name: getattr(args, f.name) for f in fields(ExperimentConfig) if getattr(args, f.name) is not None}
    if args.config is not None:
        return load_config(args.config, **flags)
    return ExperimentConfig(**flags)


def _policy_from_checkpoint(path):
    net, _ = load_checkpoint(path)

    class Policy:
        def act(self, obs, rng=None, deterministic=True):
            return net(obs)

    return Policy()


def cmd_train(args):
    config = config_from_args(args)

    def show(row):
        if row["eval_return"] == row["eval_return"]:
            print(f"iter {row['iteration']:4d}  steps {row['env_steps']:7d}  eval {row['eval_return']:8.3f}",
                  flush=True)

    record = run_experiment(config, progress=None if args.quiet else show)
    print(f"final eval return {record.final_eval_return:.4f}  incidents {record.incidents}")
    if record.incidents > config.max_incidents:
        raise IncidentLimitError(f"{record.incidents} incidents > max_incidents={config.max_incidents}")
    return EXIT_OK


def cmd_sweep(args):
    config = config_from_args(args)
    values = [json.loads(v) for v in args.values.split(",")]
    seeds = [int(s) for s in args.seeds.split(",")] if args.seeds else None
    records = run_sweep(config, args.axis, values, seeds=seeds, workers=args.workers)
    for r in records:
        value = r.metadata["sweep_value"]
        print(f"{args.axis}={value} seed={r.config.seed} {r.metadata.get('status')} "
              f"final={r.final_eval_return:.4f}")
    if any(r.incidents > config.max_incidents for r in records):
        raise IncidentLimitError("a sweep run exceeded max_incidents")
    return EXIT_OK


def cmd_plot(args):
    records = []
    for d in args.runs:
        d = Path(d)
        if (d / "run.json").exists():
            records.append(load_run(d))
        else:
            records.extend(load_run(p.parent) for p in sorted(d.rglob("run.json")))
    render_curves(records, args.output)
    print(f"wrote {args.output} from {len(records)} runs")
    return EXIT_OK


def cmd_snapshot(args):
    run_dir = Path(args.run_dir)
    meta = json.loads((run_dir / "run.json").read_text())
    cfg = meta["config"]
    env_config = {k: cfg[k] for k in ENV_FIELDS}
    summary = render_pointmass_snapshot(run_dir / "policy.ckpt", run_dir / "buffer.bin", run_dir / "disc.ckpt",
                                        args.output, grid=args.grid, env_config=env_config,
                                        episodes=args.episodes, seed=args.seed)
    print(f"wrote {args.output}: {summary['panels']} panels, {summary['arrows']} arrows")
    return EXIT_OK


def cmd_eval(args):
    run_dir = Path(args.run_dir)
    config = ExperimentConfig.from_dict(json.loads((run_dir / "run.json").read_text())["config"])
    rng = np.random.default_rng(args.seed)
    env = make_env(config.env_config(), rng)
    mean, returns = evaluate_policy(env, _policy_from_checkpoint(run_dir / "policy.ckpt"), args.episodes, rng)
    print(f"mean return {mean:.4f} over {len(returns)} episodes")
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="gasil", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="run one experiment")
    _add_config_flags(p)
    p.add_argument("--quiet", action="store_true")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("sweep", help="grid sweep along one axis")
    _add_config_flags(p)
    p.add_argument("--axis", required=True, choices=SWEEP_AXES)
    p.add_argument("--values", required=True, help="comma-separated values, e.g. 500,1000,5000")
    p.add_argument("--seeds", default="", help="comma-separated seeds (default: --seed)")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("plot", help="learning curves from run directories")
    p.add_argument("runs", nargs="+", help="run directories, or parents searched for run.json")
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_plot)

    p = sub.add_parser("snapshot", help="three-panel point-mass figure from a run directory")
    p.add_argument("run_dir")
    p.add_argument("--output", required=True)
    p.add_argument("--grid", type=int, default=12)
    p.add_argument("--episodes", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_snapshot)

    p = sub.add_parser("eval", help="deterministic evaluation of a saved policy")
    p.add_argument("run_dir")
    p.add_argument("--episodes", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_eval)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except IncidentLimitError as exc:
        print(f"incident limit: {exc}", file=sys.stderr)
        return EXIT_INCIDENTS
    except (UsageError, UnsupportedEnvError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
