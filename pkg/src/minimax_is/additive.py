"""Additive costs as a terminal cost on the state augmented with its running sum."""

from __future__ import annotations

from typing import Optional

import numpy as np

from .exact import CapacityError
from .model import SystemModel
from .ranges import AugmentedMetric, FiniteSpace

AUGMENT_BUDGET = 100_000


def _fmt(a: float) -> str:
    return str(int(a)) if float(a).is_integer() else repr(float(a))


def augment_additive(model: SystemModel, budget: int = AUGMENT_BUDGET,
                     bin_width: Optional[float] = None) -> SystemModel:
    """Terminal-cost model over pairs (x_t, a_t) with a_t the cost paid so far.

    a_0 = 0 and a_{t+1} = a_t + c_t(x_t, u_t); the terminal cost is
    a_T + c_T(x_T, u_T) and observations ignore a_t. Only pairs reachable
    from some x_0 under some action sequence are materialized. With
    ``bin_width`` the running sums are rounded to that grid, which makes
    the reduction approximate.
    """
    if model.step_costs is None:
        raise ValueError("model has no step costs to fold into the state")
    if bin_width is not None and not bin_width > 0:
        raise ValueError("bin_width must be positive")
    T = model.horizon

    def snap(a):
        return a if bin_width is None else round(a / bin_width) * bin_width

    levels = [[(x, 0.0) for x in range(model.n_states(0))]]
    trace = [1]
    dynamics = []
    for t in range(T):
        f = model.dynamics[t]
        c = model.step_costs[t]
        nu, nw = f.shape[1], f.shape[2]
        nxt = {}
        for x, a in levels[t]:
            for u in range(nu):
                a2 = snap(a + float(c[x, u]))
                for w in range(nw):
                    nxt[(int(f[x, u, w]), a2)] = None
        trace.append(len({a for _, a in nxt}))
        if len(nxt) > budget:
            raise CapacityError(f"augmented state space at step {t + 1} has {len(nxt)} > {budget} states",
                                trace)
        order = sorted(nxt)
        where = {s: k for k, s in enumerate(order)}
        table = np.empty((len(levels[t]), nu, nw), dtype=np.int64)
        for k, (x, a) in enumerate(levels[t]):
            for u in range(nu):
                a2 = snap(a + float(c[x, u]))
                for w in range(nw):
                    table[k, u, w] = where[(int(f[x, u, w]), a2)]
        dynamics.append(table)
        levels.append(order)

    def space(t):
        labels = model.state_spaces[t].labels
        return FiniteSpace(tuple(f"{labels[x]}|a={_fmt(a)}" for x, a in levels[t]),
                           tuple((x, a) for x, a in levels[t]))

    xs = [np.array([x for x, _ in lv], dtype=np.int64) for lv in levels]
    offs = [np.array([a for _, a in lv]) for lv in levels]
    observation = tuple(model.observation[t][xs[t]] for t in range(T + 1))
    terminal = model.terminal_cost[xs[T]] + offs[T][:, None]
    start = {x: k for k, (x, _) in enumerate(levels[0])}
    meta = {"kind": "additive-augmented", "partial_sums": trace}
    if bin_width is not None:
        meta["bin_width"] = bin_width
    return SystemModel(
        horizon=T,
        state_spaces=tuple(space(t) for t in range(T + 1)),
        action_spaces=model.action_spaces,
        disturbance_spaces=model.disturbance_spaces,
        noise_spaces=model.noise_spaces,
        observation_spaces=model.observation_spaces,
        dynamics=tuple(dynamics),
        observation=observation,
        terminal_cost=terminal,
        initial_states=tuple(start[x] for x in model.initial_states),
        initial_observations=model.initial_observations,
        state_metrics=tuple(AugmentedMetric(model.state_metrics[t], xs[t], offs[t]) for t in range(T + 1)),
        observation_metrics=model.observation_metrics,
        meta=meta,
    )


def split_augmented(model: SystemModel, t: int, s: int) -> tuple:
    """(original state, running cost) of augmented state ``s`` at step ``t``."""
    return model.state_spaces[t].coords[s]
