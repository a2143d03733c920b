"""Gridworld pursuit: an agent tries to end the horizon close to a moving target.

The joint state is the pair (agent cell, target cell) over free cells, with
index ``agent * F + target`` for ``F`` free cells. The observation is the
pair (agent cell, noisy target cell), so the agent sees itself exactly.
Moves that would leave the grid or enter an obstacle leave the position
unchanged.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import SystemModel
from .ranges import FiniteSpace, MetricError, ProductMetric, free_cells, shortest_path_metric

MOVES = ((-1, 0), (1, 0), (0, 0), (0, 1), (0, -1))

# Fig. 1a's exact obstacle cells are not listed anywhere in text form; this is
# a reconstruction with two wall segments and a block, keeping free space
# connected and both initial cells free.
DEFAULT_OBSTACLES = (
    (-3, 1), (-2, 1), (-1, 1),
    (1, -2), (1, -1), (1, 0),
    (2, 2), (3, 2),
    (-1, -2),
)


@dataclass(frozen=True)
class GridworldConfig:
    width: int = 9
    height: int = 9
    obstacles: tuple = DEFAULT_OBSTACLES
    agent_start: tuple = (-2, -3)
    target_observation: tuple = (-4, 3)
    horizon: int = 6

    def __post_init__(self):
        object.__setattr__(self, "obstacles", tuple(tuple(int(v) for v in o) for o in self.obstacles))
        object.__setattr__(self, "agent_start", tuple(int(v) for v in self.agent_start))
        object.__setattr__(self, "target_observation", tuple(int(v) for v in self.target_observation))

    def to_dict(self):
        return {"width": self.width, "height": self.height,
                "obstacles": [list(o) for o in self.obstacles],
                "agent_start": list(self.agent_start),
                "target_observation": list(self.target_observation),
                "horizon": self.horizon}

    @classmethod
    def from_dict(cls, d):
        return cls(width=d["width"], height=d["height"],
                   obstacles=tuple(tuple(o) for o in d["obstacles"]),
                   agent_start=tuple(d["agent_start"]),
                   target_observation=tuple(d["target_observation"]),
                   horizon=d["horizon"])


def _label(c):
    return f"({c[0]},{c[1]})"


def move_table(cells) -> np.ndarray:
    """``table[k, m]``: cell index reached from cell ``k`` by move ``m``."""
    where = {c: k for k, c in enumerate(cells)}
    out = np.empty((len(cells), len(MOVES)), dtype=np.int64)
    for k, (x, y) in enumerate(cells):
        for m, (dx, dy) in enumerate(MOVES):
            out[k, m] = where.get((x + dx, y + dy), k)
    return out


def build_gridworld(cfg: GridworldConfig) -> SystemModel:
    cells = free_cells(cfg.width, cfg.height, cfg.obstacles)
    blocked = set(cfg.obstacles)
    for name, c in (("agent start", cfg.agent_start), ("target observation", cfg.target_observation)):
        if c in blocked:
            raise MetricError(f"{name} {c} is an obstacle")
        if c not in cells:
            raise MetricError(f"{name} {c} is outside the grid")
    if cfg.horizon < 0:
        raise MetricError("horizon must be >= 0")
    d = shortest_path_metric(cfg.width, cfg.height, cfg.obstacles)
    F = len(cells)
    mv = move_table(cells)
    a_idx = np.repeat(np.arange(F), F)
    t_idx = np.tile(np.arange(F), F)

    # f((a, t), u, w) = (move(a, u), move(t, w))
    dyn = (mv[a_idx][:, :, None] * F + mv[t_idx][:, None, :]).astype(np.int64)
    # h((a, t), n) = (a, move(t, n))
    obs = (a_idx[:, None] * F + mv[t_idx]).astype(np.int64)
    cost = np.repeat(d.matrix[t_idx, a_idx][:, None], len(MOVES), axis=1).astype(np.float64)

    pair_labels = tuple(f"a{_label(cells[a])}t{_label(cells[t])}" for a, t in zip(a_idx, t_idx))
    pair_coords = tuple((*cells[a], *cells[t]) for a, t in zip(a_idx, t_idx))
    obs_labels = tuple(f"a{_label(cells[a])}y{_label(cells[t])}" for a, t in zip(a_idx, t_idx))
    X = FiniteSpace(pair_labels, pair_coords)
    Y = FiniteSpace(obs_labels, pair_coords)
    M = FiniteSpace(tuple(_label(m) for m in MOVES), MOVES)
    pm = ProductMetric([d, d])
    start = cells.index(cfg.agent_start)
    y0 = start * F + cells.index(cfg.target_observation)
    T = cfg.horizon
    return SystemModel(
        horizon=T,
        state_spaces=(X,) * (T + 1),
        action_spaces=(M,) * (T + 1),
        disturbance_spaces=(M,) * (T + 1),
        noise_spaces=(M,) * (T + 1),
        observation_spaces=(Y,) * (T + 1),
        dynamics=(dyn,) * T,
        observation=(obs,) * (T + 1),
        terminal_cost=cost,
        initial_states=tuple(start * F + t for t in range(F)),
        initial_observations=(y0,),
        state_metrics=(pm,) * (T + 1),
        observation_metrics=(pm,) * (T + 1),
        meta={"kind": "gridworld", "config": cfg.to_dict(), "cells": [list(c) for c in cells]},
    )


def gridworld_cells(model: SystemModel) -> list:
    if model.meta.get("kind") != "gridworld":
        raise ValueError("model was not built by build_gridworld")
    return [tuple(c) for c in model.meta["cells"]]


def split_state(model: SystemModel, x: int) -> tuple:
    """(agent cell, target cell) coordinates of a joint state index."""
    cells = gridworld_cells(model)
    F = len(cells)
    return cells[x // F], cells[x % F]


def gridworld_quantizer(model: SystemModel, gamma: float):
    """Quantize the target coordinate only; the agent cell is always known.

    Each ball is {agent} x (target cells within gamma of the representative),
    a subset of the joint gamma-ball, so the covering guarantee is unchanged.
    """
    from .approx import StepQuantizer, build_quantizer

    F = len(gridworld_cells(model))
    d = model.state_metrics[0].factors[1]
    inner = build_quantizer(d, gamma)
    a = np.repeat(np.arange(F), F)
    t = np.tile(np.arange(F), F)
    mu = a * F + inner.mu[t]
    mu.setflags(write=False)
    reps = tuple(int(ai * F + r) for ai in range(F) for r in inner.representatives)
    balls = {}
    for ai in range(F):
        base = ai * F
        for r, ball in inner.balls.items():
            balls[base + r] = tuple(base + b for b in ball)
    return StepQuantizer(float(gamma), reps, mu, balls, inner.radius)
