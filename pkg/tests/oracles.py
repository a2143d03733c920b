"""Slow, literal reference implementations used to check the solvers.

Nothing here imports the solver modules; everything works from the raw
model tables.
"""

from __future__ import annotations

import itertools
from collections import deque

import numpy as np


# --- metrics -------------------------------------------------------------------

def hausdorff_literal(A, B, d):
    """max over both directions of farthest-nearest distance, pair by pair."""
    ab = max(min(d[a][b] for b in B) for a in A)
    ba = max(min(d[a][b] for a in A) for b in B)
    return max(ab, ba)


def lipschitz_literal(values, d_in, d_out=None):
    n = len(values)
    best = 0.0
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            num = abs(values[i] - values[j]) if d_out is None else d_out[values[i]][values[j]]
            best = max(best, num / d_in[i][j])
    return best


def bfs_distances(width, height, obstacles):
    """All-pairs 4-neighbour path lengths on the signed grid, by BFS."""
    xs = range(-(width // 2), width - width // 2)
    ys = range(-(height // 2), height - height // 2)
    blocked = set(map(tuple, obstacles))
    cells = sorted((x, y) for x in xs for y in ys if (x, y) not in blocked)
    out = {}
    for s in cells:
        dist = {s: 0}
        dq = deque([s])
        while dq:
            c = dq.popleft()
            for dx, dy in ((1, 0), (-1, 0), (0, 1), (0, -1)):
                nb = (c[0] + dx, c[1] + dy)
                if nb in dist or nb in blocked or nb[0] not in xs or nb[1] not in ys:
                    continue
                dist[nb] = dist[c] + 1
                dq.append(nb)
        out[s] = dist
    return cells, out


# --- trajectories -----------------------------------------------------------------

def _tables(model):
    f = [np.asarray(a) for a in model.dynamics]
    h = [np.asarray(a) for a in model.observation]
    return f, h


def consistent_paths(model, ys, us):
    """Every state path x_0..x_t that some choice of primitives (x_0, n_0, w_0,
    n_1, ...) produces together with observations ``ys`` under actions ``us``."""
    f, h = _tables(model)
    paths = [(x,) for x in model.initial_states if ys[0] in h[0][x].tolist()]
    for t, u in enumerate(us):
        nxt = []
        for p in paths:
            for w in range(f[t].shape[2]):
                x2 = int(f[t][p[-1], u, w])
                if ys[t + 1] in h[t + 1][x2].tolist():
                    nxt.append(p + (x2,))
        paths = nxt
    return paths


def conditional_range(model, ys, us):
    return tuple(sorted({p[-1] for p in consistent_paths(model, ys, us)}))


def first_observations(model):
    h0 = np.asarray(model.observation[0])
    if model.initial_observations is not None:
        return list(model.initial_observations)
    return sorted({int(y) for x in model.initial_states for y in h0[x]})


def next_observations(model, ys, us, u):
    f, h = _tables(model)
    t = len(us)
    out = set()
    for p in consistent_paths(model, ys, us):
        for w in range(f[t].shape[2]):
            out.update(int(y) for y in h[t + 1][int(f[t][p[-1], u, w])])
    return sorted(out)


def game_tree_values(model, additive=False):
    """Minimax over the tree of observation/action histories.

    Returns ``{(ys, us): (V, Q)}`` for every history reachable under some
    actions. With ``additive`` the criterion is the sum of step costs along
    the path plus the terminal cost, maximized over consistent paths.
    """
    T = model.horizon
    cT = np.asarray(model.terminal_cost)
    sc = model.step_costs
    out = {}

    def path_cost(p, us, uT):
        c = float(cT[p[-1], uT])
        if additive:
            c += sum(float(sc[t][p[t], us[t]]) for t in range(len(us)))
        return c

    def go(ys, us):
        t = len(us)
        nu = model.n_actions(t)
        if t == T:
            paths = consistent_paths(model, ys, us)
            Q = tuple(max(path_cost(p, us, u) for p in paths) for u in range(nu))
        else:
            Q = tuple(max(go(ys + (y,), us + (u,)) for y in next_observations(model, ys, us, u))
                      for u in range(nu))
        V = min(Q)
        out[(ys, us)] = (V, Q)
        return V

    for y0 in first_observations(model):
        go((y0,), ())
    return out


def game_tree_root_value(model, additive=False):
    vals = game_tree_values(model, additive)
    return max(vals[((y0,), ())][0] for y0 in first_observations(model))


# --- literal strategy enumeration ----------------------------------------------

def _strategy_trees(model, ys, us):
    """Every deterministic strategy below a history, as nested (u, {y: tree})."""
    t = len(us)
    if t == model.horizon:
        for u in range(model.n_actions(t)):
            yield (u, {})
        return
    for u in range(model.n_actions(t)):
        ys_next = next_observations(model, ys, us, u)
        subs = [list(_strategy_trees(model, ys + (y,), us + (u,))) for y in ys_next]
        for combo in itertools.product(*subs):
            yield (u, dict(zip(ys_next, combo)))


def _primitive_runs(model, y0):
    """Every (x_0, n_0, w, n) with h_0(x_0, n_0) = y_0."""
    f, h = _tables(model)
    T = model.horizon
    ws = [range(f[t].shape[2]) for t in range(T)]
    ns = [range(h[t].shape[1]) for t in range(1, T + 1)]
    for x0 in model.initial_states:
        for n0 in range(h[0].shape[1]):
            if int(h[0][x0, n0]) != y0:
                continue
            for w in itertools.product(*ws):
                for n in itertools.product(*ns):
                    yield x0, w, n


def strategy_cost(model, tree, x0, w, n, additive=False):
    f, h = _tables(model)
    x = x0
    node = tree
    total = 0.0
    for t in range(model.horizon):
        u, kids = node
        if additive:
            total += float(model.step_costs[t][x, u])
        x = int(f[t][x, u, w[t]])
        node = kids[int(h[t + 1][x, n[t]])]
    return total + float(model.terminal_cost[x, node[0]])


def strategy_enumeration_value(model, additive=False):
    """min over strategies of max over primitive realizations.

    A strategy maps histories to actions; its parts for different y_0 never
    interact, so the minimum is taken per y_0 and the worst y_0 reported.
    Only for tiny instances: the number of strategies is exponential.
    """
    worst = None
    for y0 in first_observations(model):
        runs = list(_primitive_runs(model, y0))
        best = min(max(strategy_cost(model, tree, *r, additive=additive) for r in runs)
                   for tree in _strategy_trees(model, (y0,), ()))
        worst = best if worst is None else max(worst, best)
    return worst


def fixed_strategy_worst(model, choose):
    """Worst-case cost of a history-dependent strategy ``choose(ys, us)``,
    by running it on every primitive realization."""
    f, h = _tables(model)
    worst = None
    for y0 in first_observations(model):
        for x0, w, n in _primitive_runs(model, y0):
            x, ys, us = x0, (y0,), ()
            for t in range(model.horizon):
                u = choose(ys, us)
                x = int(f[t][x, u, w[t]])
                ys, us = ys + (int(h[t + 1][x, n[t]]),), us + (u,)
            c = float(model.terminal_cost[x, choose(ys, us)])
            worst = c if worst is None else max(worst, c)
    return worst
