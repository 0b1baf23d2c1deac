"""Dependency-free SVG figures: learning curves and point-mass snapshots.

All coordinates are written with fixed precision so the same input always
produces the same bytes.
"""

import math
from pathlib import Path

import numpy as np

from .environments import EnvConfig, PointMass2D
from .errors import UnsupportedEnvError, UsageError
from .imitation import Discriminator, load_buffer
from .nn_core import load_checkpoint

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#8c564b", "#17becf")
OBJECT_COLORS = {10.0: "#2ca02c", 5.0: "#1f77b4", -5.0: "#ff7f0e"}
COMPASS = tuple((math.cos(k * math.pi / 4), math.sin(k * math.pi / 4)) for k in range(8))


def _f(x):
    return f"{x:.2f}"


def _svg(width, height, body):
    head = (f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
            f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">')
    return "\n".join([head, f'<rect width="{width}" height="{height}" fill="white"/>', *body, "</svg>"]) + "\n"


def _nice_ticks(lo, hi, n=5):
    if hi <= lo:
        hi = lo + 1.0
    raw = (hi - lo) / n
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 2.5, 5, 10) if m * mag >= raw), default=10 * mag)
    start = math.ceil(lo / step) * step
    ticks = []
    t = start
    while t <= hi + 1e-9 * step:
        ticks.append(round(t, 10))
        t += step
    return ticks


def _group_curves(records):
    """Per agent: common step grid plus stacked returns (interpolated onto the union grid)."""
    groups = {}
    for r in records:
        groups.setdefault(r.config.agent, []).append(r.curve())
    out = {}
    for agent, curves in groups.items():
        curves = [(x, y) for x, y in curves if len(x)]
        if not curves:
            continue
        grid = np.unique(np.concatenate([x for x, _ in curves]))
        ys = np.array([np.interp(grid, x, y) for x, y in curves])
        out[agent] = (grid, ys)
    return out


def render_curves(records, path, title="mean eval return", width=640, height=400):
    """Mean curve per agent with a min-max band across seeds.

    Raises :class:`UsageError` when ``records`` holds no evaluated rows.
    Returns the SVG text that was written.
    """
    records = list(records)
    groups = _group_curves(records)
    if not groups:
        raise UsageError("render_curves needs at least one record with evaluation rows")
    left, right, top, bottom = 70, 150, 30, 50
    pw, ph = width - left - right, height - top - bottom
    xs = np.concatenate([g for g, _ in groups.values()])
    ys = np.concatenate([y.ravel() for _, y in groups.values()])
    x_lo, x_hi = 0.0, float(xs.max()) or 1.0
    y_lo, y_hi = float(ys.min()), float(ys.max())
    if y_hi - y_lo < 1e-9:
        y_lo, y_hi = y_lo - 1.0, y_hi + 1.0
    pad = 0.05 * (y_hi - y_lo)
    y_lo, y_hi = y_lo - pad, y_hi + pad

    def px(x):
        return left + (x - x_lo) / (x_hi - x_lo) * pw

    def py(y):
        return top + (y_hi - y) / (y_hi - y_lo) * ph

    body = [f'<text x="{_f(left + pw / 2)}" y="18" text-anchor="middle">{title}</text>',
            f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>']
    for t in _nice_ticks(x_lo, x_hi):
        body.append(f'<line x1="{_f(px(t))}" y1="{top + ph}" x2="{_f(px(t))}" y2="{top + ph + 5}" stroke="black"/>')
        body.append(f'<text x="{_f(px(t))}" y="{top + ph + 18}" text-anchor="middle">{t:g}</text>')
    for t in _nice_ticks(y_lo, y_hi):
        body.append(f'<line x1="{left - 5}" y1="{_f(py(t))}" x2="{left}" y2="{_f(py(t))}" stroke="black"/>')
        body.append(f'<text x="{left - 8}" y="{_f(py(t) + 4)}" text-anchor="end">{t:g}</text>')
    body.append(f'<text x="{_f(left + pw / 2)}" y="{height - 10}" text-anchor="middle">environment steps</text>')
    body.append(f'<text x="16" y="{_f(top + ph / 2)}" text-anchor="middle" '
                f'transform="rotate(-90 16 {_f(top + ph / 2)})">eval return</text>')
    for i, (agent, (grid, ys)) in enumerate(sorted(groups.items())):
        color = PALETTE[i % len(PALETTE)]
        if ys.shape[0] > 1:
            upper = [f"{_f(px(x))},{_f(py(y))}" for x, y in zip(grid, ys.max(axis=0))]
            lower = [f"{_f(px(x))},{_f(py(y))}" for x, y in zip(grid[::-1], ys.min(axis=0)[::-1])]
            body.append(f'<polygon class="band" points="{" ".join(upper + lower)}" fill="{color}" '
                        f'fill-opacity="0.2" stroke="none"/>')
        mean = [f"{_f(px(x))},{_f(py(y))}" for x, y in zip(grid, ys.mean(axis=0))]
        body.append(f'<polyline class="mean" points="{" ".join(mean)}" fill="none" stroke="{color}" '
                    f'stroke-width="2"/>')
        ly = top + 15 + 20 * i
        body.append(f'<line x1="{left + pw + 10}" y1="{ly}" x2="{left + pw + 35}" y2="{ly}" stroke="{color}" '
                    f'stroke-width="2"/>')
        body.append(f'<text class="legend" x="{left + pw + 40}" y="{ly + 4}">{agent} (n={ys.shape[0]})</text>')
    text = _svg(width, height, body)
    Path(path).write_text(text)
    return text


def _check_point_mass(env_config, policy_net, disc_net):
    if isinstance(env_config, dict):
        if env_config.get("env", "point_mass") != "point_mass":
            raise UnsupportedEnvError(f"snapshots are only defined for point_mass, got {env_config['env']!r}")
        env_config = EnvConfig(**env_config)
    env_config = env_config or EnvConfig()
    obs_dim = 2 + 4 * len(env_config.objects)
    if policy_net.input_size != obs_dim or policy_net.output_size != 2:
        raise UnsupportedEnvError(
            f"policy maps {policy_net.input_size} -> {policy_net.output_size}; "
            f"a point mass with {len(env_config.objects)} objects needs {obs_dim} -> 2")
    if disc_net.input_size != obs_dim + 2 or disc_net.output_size != 1:
        raise UnsupportedEnvError("discriminator does not match the point-mass observation and action sizes")
    return env_config


def discriminator_field(disc, env_config, grid, reference_obs=None):
    """Best compass action and its reward ``-log D`` at the centre of every grid cell.

    The observation at a cell puts the agent at the cell centre. Which objects
    count as collected is copied from the nearest row of ``reference_obs``
    (usually the buffer's states), so cells along good trajectories are scored
    in the state the agent would be in there. Without references nothing is
    collected. Returns ``(centers, best_index, best_reward)`` with shapes
    ``(grid * grid, 2)``, ``(grid * grid,)`` and ``(grid * grid,)``.
    """
    env = PointMass2D(env_config)
    env.reset()
    ticks = (np.arange(grid) + 0.5) / grid
    centers = np.array([(x, y) for y in ticks for x in ticks])
    speed = env_config.max_speed / env_config.action_scale
    directions = np.array(COMPASS) * speed
    obs = []
    for c in centers:
        env.position = c
        o = env.observe()
        if reference_obs is not None and len(reference_obs):
            nearest = np.argmin(np.sum((reference_obs[:, :2] - c) ** 2, axis=1))
            o[4::4] = reference_obs[nearest, 4::4]
        obs.append(o)
    obs = np.repeat(np.array(obs), len(COMPASS), axis=0)
    acts = np.tile(directions, (len(centers), 1))
    rewards = disc.reward(obs, acts).reshape(len(centers), len(COMPASS))
    best = rewards.argmax(axis=1)
    return centers, best, rewards[np.arange(len(centers)), best]


def _rollouts(policy_net, log_std, env_config, episodes, seed):
    rng = np.random.default_rng(seed)
    env = PointMass2D(env_config, rng)
    paths = []
    std = np.exp(np.clip(log_std, -20.0, 2.0)) if log_std is not None else np.zeros(2)
    for _ in range(episodes):
        obs = env.reset()
        pts = [env.position.copy()]
        done = False
        while not done:
            action = policy_net(obs) + std * rng.standard_normal(2)
            out = env.step(action)
            obs, done = out.observation, out.done
            pts.append(env.position.copy())
        paths.append(np.array(pts))
    return paths


def render_pointmass_snapshot(policy_checkpoint, buffer_snapshot, disc_checkpoint, path, grid=12,
                              env_config=None, episodes=3, seed=0, panel=300):
    """Three panels: policy rollouts, buffer trajectories, discriminator arrow field.

    Each of the ``grid**2`` arrows points along the compass action with the
    highest discriminator reward in its cell; its opacity is that reward
    divided by the largest one on the field. Returns a summary dict with the
    per-cell rewards so callers can inspect the field numerically.
    """
    policy_net, log_std = load_checkpoint(policy_checkpoint)
    disc_net, _ = load_checkpoint(disc_checkpoint)
    env_config = _check_point_mass(env_config, policy_net, disc_net)
    disc = Discriminator(policy_net.input_size, 2, net=disc_net)
    buffer = load_buffer(buffer_snapshot)
    paths = _rollouts(policy_net, log_std, env_config, episodes, seed)
    buffer_paths = [ep.observations[:, :2] for ep in buffer.episodes]
    reference = np.concatenate([ep.observations for ep in buffer.episodes]) if buffer.episodes else None
    centers, best, reward = discriminator_field(disc, env_config, grid, reference)
    top_reward = float(reward.max()) if reward.size else 1.0
    opacity = reward / top_reward if top_reward > 0 else np.ones_like(reward)

    margin, gap = 20, 20
    width = 3 * panel + 2 * gap + 2 * margin
    height = panel + 2 * margin + 20
    titles = ("policy rollouts", "good-trajectory buffer", "discriminator reward")
    body = []
    for k, title in enumerate(titles):
        ox, oy = margin + k * (panel + gap), margin + 20

        def to_px(p, ox=ox, oy=oy):
            return ox + p[0] * panel, oy + (1.0 - p[1]) * panel

        body.append(f'<g class="panel" id="panel{k + 1}">')
        body.append(f'<text x="{_f(ox + panel / 2)}" y="{margin + 10}" text-anchor="middle">{title}</text>')
        body.append(f'<rect x="{ox}" y="{oy}" width="{panel}" height="{panel}" fill="none" stroke="black"/>')
        for o in env_config.objects:
            cx, cy = to_px(o.position)
            color = OBJECT_COLORS.get(o.value, "#7f7f7f")
            body.append(f'<circle cx="{_f(cx)}" cy="{_f(cy)}" r="{_f(o.radius * panel)}" fill="{color}" '
                        f'fill-opacity="0.6"/>')
        if k < 2:
            for p in (paths if k == 0 else buffer_paths):
                pts = " ".join(f"{_f(a)},{_f(b)}" for a, b in (to_px(q) for q in p))
                body.append(f'<polyline class="trajectory" points="{pts}" fill="none" stroke="black" '
                            f'stroke-opacity="0.6"/>')
        else:
            half = 0.4 / grid
            for c, b, a in zip(centers, best, opacity):
                dx, dy = COMPASS[b]
                x0, y0 = to_px((c[0] - half * dx, c[1] - half * dy))
                x1, y1 = to_px((c[0] + half * dx, c[1] + half * dy))
                body.append(f'<line class="arrow" x1="{_f(x0)}" y1="{_f(y0)}" x2="{_f(x1)}" y2="{_f(y1)}" '
                            f'stroke="black" opacity="{a:.3f}" marker-end="url(#head)"/>')
        body.append("</g>")
    defs = ('<defs><marker id="head" markerWidth="6" markerHeight="6" refX="5" refY="3" orient="auto">'
            '<path d="M0,0 L6,3 L0,6 z" fill="black"/></marker></defs>')
    Path(path).write_text(_svg(width, height, [defs, *body]))
    return {"panels": 3, "arrows": len(centers), "centers": centers, "best_action": best,
            "reward": reward, "buffer_paths": buffer_paths, "rollout_paths": paths}
