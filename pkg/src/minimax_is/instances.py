"""Seeded random instances and small hand-built models."""

from __future__ import annotations

import numpy as np

from .model import SystemModel, simple_model
from .ranges import line_metric


def random_model(rng: np.random.Generator, max_states: int = 4, max_actions: int = 3,
                 max_disturbances: int = 3, max_noises: int = 3, max_observations: int = 3,
                 max_horizon: int = 4, max_cost: int = 20, min_horizon: int = 0, min_states: int = 1,
                 step_costs: bool = False, perfect: bool = False) -> SystemModel:
    """A random model with integer costs and states placed on a line.

    Positions are distinct random integers, so quantizing with gamma >= 1
    actually merges some states. ``perfect`` makes every observation reveal
    the state.
    """
    T = int(rng.integers(min_horizon, max_horizon + 1))
    nx = [int(rng.integers(min_states, max_states + 1)) for _ in range(T + 1)]
    nu = [int(rng.integers(1, max_actions + 1)) for _ in range(T + 1)]
    nw = [int(rng.integers(1, max_disturbances + 1)) for _ in range(T)]
    if perfect:
        ny = nx
        obs = [np.arange(n)[:, None] for n in nx]
    else:
        ny = [int(rng.integers(1, max_observations + 1)) for _ in range(T + 1)]
        obs = [rng.integers(0, ny[t], size=(nx[t], int(rng.integers(1, max_noises + 1))))
               for t in range(T + 1)]
    dyn = [rng.integers(0, nx[t + 1], size=(nx[t], nu[t], nw[t])) for t in range(T)]
    cT = rng.integers(0, max_cost + 1, size=(nx[T], nu[T]))
    k = int(rng.integers(1, nx[0] + 1))
    init = sorted(rng.choice(nx[0], size=k, replace=False).tolist())
    sc = None
    if step_costs:
        sc = [rng.integers(0, max_cost + 1, size=(nx[t], nu[t])) for t in range(T)]

    pos = [np.sort(rng.choice(3 * n, size=n, replace=False)) for n in nx]
    m = simple_model(T, dyn, obs, cT, init, n_states=nx, n_observations=ny, step_costs=sc)
    state_metrics = tuple(line_metric(p) for p in pos)
    obs_metrics = state_metrics if perfect else m.observation_metrics
    return m.replace(state_metrics=state_metrics, observation_metrics=obs_metrics,
                     meta={"kind": "random", "perfect": perfect})


def seeded_model(seed: int, **kw) -> SystemModel:
    return random_model(np.random.default_rng(seed), **kw)


def two_state_toy(horizon: int = 1) -> SystemModel:
    """x in {0, 1}; w = 1 flips the state, nothing is observed, c_T(x, u) = |x - u|."""
    f = np.array([[[0, 1]], [[1, 0]]])
    h = np.zeros((2, 1), dtype=np.int64)
    cT = np.array([[0, 1], [1, 0]])
    return simple_model(horizon, [f] * horizon, [h] * (horizon + 1), cT, [0, 1],
                        n_observations=[1] * (horizon + 1))


def chain(length: int = 5, horizon: int = 2, perfect: bool = True) -> SystemModel:
    """States 0..length-1 on a line; u in {-1, 0, +1} moves, w in {-1, 0, +1}
    pushes, both clipped at the ends. The cost is the distance to the middle.

    With ``perfect=False`` the observation is the state index with +-1 noise.
    """
    L = length
    mv = (-1, 0, 1)
    f = np.array([[[min(max(x + a + b, 0), L - 1) for b in mv] for a in mv] for x in range(L)])
    if perfect:
        h = np.arange(L)[:, None]
    else:
        h = np.array([[min(max(x + e, 0), L - 1) for e in mv] for x in range(L)])
    mid = L // 2
    cT = np.array([[abs(x - mid)] * 3 for x in range(L)])
    return simple_model(horizon, [f] * horizon, [h] * (horizon + 1), cT, list(range(L)),
                        n_observations=[L] * (horizon + 1))


def separating_counterexample() -> SystemModel:
    """T = 0 with the state revealed and c_T(x, u) = x: a map that forgets the
    observation cannot evaluate the terminal cost."""
    h = np.arange(2)[:, None]
    return simple_model(0, [], [h], np.array([[0], [5]]), [0, 1])


def additive_toy() -> SystemModel:
    """T = 1, two states, w flips, step cost depends on the action."""
    f = np.array([[[0, 1], [1, 1]], [[1, 0], [0, 0]]])
    h = np.zeros((2, 1), dtype=np.int64)
    cT = np.array([[0, 3], [2, 1]])
    c0 = np.array([[1, 4], [0, 2]])
    return simple_model(1, [f], [h, h], cT, [0, 1], n_observations=[1, 1], step_costs=[c0])
