"""
Training PPO and PPO+GASIL on the point mass
============================================

A short comparison on two seeds. The full 200k-step, 10-seed comparison is
run by the acceptance tests; this script keeps the budget small enough to
finish in a few minutes, so expect noisy numbers.
"""

import os
import tempfile

from gasil.experiment import ExperimentConfig, run_experiment
from gasil.plotting import render_curves, render_pointmass_snapshot

iterations = int(os.environ.get("DEMO_ITERATIONS", "30"))
out = tempfile.mkdtemp(prefix="gasil_demo_")
records = []
for agent in ("ppo", "ppo_gasil"):
    for seed in (0, 1):
        cfg = ExperimentConfig(agent=agent, seed=seed, total_steps=iterations * 2048, eval_interval=5,
                               output_dir=os.path.join(out, f"{agent}_{seed}"))
        record = run_experiment(cfg)
        records.append(record)
        print(f"{agent:9s} seed {seed}: final eval return {record.final_eval_return:6.2f}")

render_curves(records, os.path.join(out, "curves.svg"), title="point mass")
gasil_run = os.path.join(out, "ppo_gasil_0")
info = render_pointmass_snapshot(os.path.join(gasil_run, "policy.ckpt"), os.path.join(gasil_run, "buffer.bin"),
                                 os.path.join(gasil_run, "disc.ckpt"), os.path.join(out, "snapshot.svg"),
                                 env_config=ExperimentConfig().env_config())
print(f"wrote curves.svg and snapshot.svg ({info['arrows']} arrows) to {out}")
