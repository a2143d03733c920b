"""Worst-case evaluation and simulation of fixed strategies.

A strategy is given as a *controller*: it keeps its own internal state z
(an approximate state, a memory, nothing at all) and chooses the action
from ``(t, P_t, z_t)``, where P_t is the exact conditional range, which is
always available to the evaluator. Since the future depends on the past
only through ``(P_t, z_t)``, the adversarial value can be computed over
those pairs instead of over memories.
"""

from __future__ import annotations

import csv
import io
from collections import Counter
from dataclasses import dataclass, field
from typing import Hashable, Optional, Protocol

import numpy as np

from .approx import ApproxSolution
from .exact import (
    MEMORY_BUDGET,
    CapacityError,
    Kernel,
    MemorySolution,
    Solution,
    initial_range,
    root_observations,
)
from .model import MemoryNode, SystemModel


class Controller(Protocol):
    def start(self, y0: int, P0: tuple) -> Hashable: ...

    def act(self, t: int, P: tuple, z: Hashable) -> int: ...

    def advance(self, t: int, P: tuple, z: Hashable, u: int, y: int, P_next: tuple) -> Hashable: ...


class RangePolicy:
    """Policy of the conditional-range DP."""

    def __init__(self, sol: Solution):
        self.sol = sol

    def start(self, y0, P0):
        return None

    def act(self, t, P, z):
        return self.sol.policy[t][P]

    def advance(self, t, P, z, u, y, P_next):
        return None


class ApproxController:
    """Policy of the approximate DP, tracking its approximate state online."""

    def __init__(self, sol: ApproxSolution):
        self.sol = sol
        self.con = sol.construction

    def start(self, y0, P0):
        return self.sol.roots[y0]

    def act(self, t, P, z):
        return self.sol.policy[t][z]

    def advance(self, t, P, z, u, y, P_next):
        return self.con.track(t, z, P, u, y, P_next)


class MemoryController:
    def __init__(self, sol: MemorySolution):
        self.sol = sol

    def start(self, y0, P0):
        return MemoryNode((y0,), ())

    def act(self, t, P, z):
        return self.sol.policy[t][z]

    def advance(self, t, P, z, u, y, P_next):
        return z.extend(u, y)


class ConstantController:
    def __init__(self, action: int = 0):
        self.action = action

    def start(self, y0, P0):
        return None

    def act(self, t, P, z):
        return self.action

    def advance(self, t, P, z, u, y, P_next):
        return None


class TablePolicy:
    """Controller read back from a policy dump: a lookup from the encoded
    key of each step to the action, plus the tracking rule of its kind."""

    def __init__(self, model: SystemModel, tables: list, kind: str, construction=None):
        self.tables = tables
        self.kind = kind
        self.con = construction

    def start(self, y0, P0):
        if self.kind == "approx":
            return self.con.root(y0, P0)
        if self.kind == "memory":
            return MemoryNode((y0,), ())
        return None

    def _key(self, P, z):
        if self.kind == "approx":
            return z.encode()
        if self.kind == "memory":
            return z.encode()
        return ",".join(str(x) for x in P)

    def act(self, t, P, z):
        try:
            return self.tables[t][self._key(P, z)]
        except KeyError:
            raise KeyError(f"policy has no action for {self._key(P, z)!r} at t={t}") from None

    def advance(self, t, P, z, u, y, P_next):
        if self.kind == "approx":
            return self.con.track(t, z, P, u, y, P_next)
        if self.kind == "memory":
            return z.extend(u, y)
        return None


def controller_for(sol: Solution):
    if isinstance(sol, ApproxSolution):
        return ApproxController(sol)
    if isinstance(sol, MemorySolution):
        return MemoryController(sol)
    return RangePolicy(sol)


@dataclass
class EvalTables:
    """Lambda_t over evaluation keys (P_t, z_t), Theta_t per evaluated action,
    and the adversary's choices."""

    horizon: int
    Lam: list
    Theta: list
    action: list
    worst_y: list
    worst_x: dict
    children: list
    roots: dict
    scope: str = "pairs"

    def value(self, y0: int) -> float:
        return self.Lam[0][self.roots[y0]]

    @property
    def worst_value(self) -> float:
        return max(self.Lam[0][k] for k in self.roots.values())

    @property
    def worst_root(self) -> int:
        best = None
        for y0, k in self.roots.items():
            if best is None or self.Lam[0][k] > self.Lam[0][self.roots[best]]:
                best = y0
        return best


def evaluate_policy_worstcase(model: SystemModel, controller, all_actions: bool = False,
                              over: str = "pairs", budget: int = MEMORY_BUDGET,
                              kernel: Optional[Kernel] = None) -> EvalTables:
    """Exact worst-case cost of a strategy by backward recursion.

    Theta_T(k, u) is the worst terminal cost over P_T, Theta_t(k, u) the worst
    Lambda_{t+1} over the feasible next observations and Lambda_t(k) =
    Theta_t(k, g_t(k)). Keys are ``(P_t, z_t)`` pairs, or memories (with
    their pair attached) when ``over="memories"``.
    """
    k = kernel or Kernel(model)
    T = model.horizon
    if over not in ("pairs", "memories"):
        raise ValueError("over must be 'pairs' or 'memories'")
    by_memory = over == "memories"

    # forward: key -> (P, z)
    level = {}
    roots = {}
    for y0 in root_observations(model):
        P0 = initial_range(model, y0, k)
        z0 = controller.start(y0, P0)
        key = MemoryNode((y0,), ()) if by_memory else (P0, z0)
        level[key] = (P0, z0)
        roots[y0] = key
    levels = [level]
    acts = []
    children = []
    total = len(level)
    for t in range(T + 1):
        act = {key: controller.act(t, P, z) for key, (P, z) in levels[t].items()}
        acts.append(act)
        if t == T:
            break
        nxt = {}
        ch = {}
        for key, (P, z) in levels[t].items():
            us = range(model.n_actions(t)) if all_actions else (act[key],)
            for u in us:
                kids = {}
                for y, P2 in k.split(t, P, u).items():
                    z2 = controller.advance(t, P, z, u, y, P2)
                    child = key.extend(u, y) if by_memory else (P2, z2)
                    kids[y] = child
                    nxt[child] = (P2, z2)
                ch[(key, u)] = kids
        total += len(nxt)
        if total > budget:
            raise CapacityError("policy evaluation exceeded its budget", [len(l) for l in levels] + [len(nxt)])
        children.append(ch)
        levels.append(nxt)

    Lam = [dict() for _ in range(T + 1)]
    Theta = [dict() for _ in range(T + 1)]
    worst_y = [dict() for _ in range(T)]
    worst_x = {}
    cT = model.terminal_cost
    for key, (P, z) in levels[T].items():
        rows = cT[list(P)]
        Theta[T][key] = {u: float(v) for u, v in enumerate(rows.max(axis=0))}
        u = acts[T][key]
        Lam[T][key] = Theta[T][key][u]
        worst_x[key] = P[int(np.argmax(rows[:, u]))]
    for t in range(T - 1, -1, -1):
        nL = Lam[t + 1]
        for key in levels[t]:
            us = range(model.n_actions(t)) if all_actions else (acts[t][key],)
            th = {}
            for u in us:
                kids = children[t][(key, u)]
                best_y = None
                for y, child in kids.items():
                    if best_y is None or nL[child] > nL[kids[best_y]]:
                        best_y = y
                th[u] = nL[kids[best_y]]
                if u == acts[t][key]:
                    worst_y[t][key] = best_y
            Theta[t][key] = th
            Lam[t][key] = th[acts[t][key]]
    return EvalTables(T, Lam, Theta, acts, worst_y, worst_x, children, roots, over)


# --- simulation --------------------------------------------------------------

@dataclass
class TrajectorySample:
    x: list
    w: list
    n: list
    y: list
    u: list
    cost: float

    def to_dict(self):
        return {"x": self.x, "w": self.w, "n": self.n, "y": self.y, "u": self.u, "cost": self.cost}


def check_sample(model: SystemModel, s: TrajectorySample) -> list:
    """Every table the sample disagrees with; empty when it is a real trajectory."""
    bad = []
    T = model.horizon
    if s.x[0] not in model.initial_states:
        bad.append("x_0 is not an initial state")
    for t in range(T + 1):
        if model.observation[t][s.x[t], s.n[t]] != s.y[t]:
            bad.append(f"y_{t} != h_{t}(x_{t}, n_{t})")
        if t < T and model.dynamics[t][s.x[t], s.u[t], s.w[t]] != s.x[t + 1]:
            bad.append(f"x_{t + 1} != f_{t}(x_{t}, u_{t}, w_{t})")
    if model.terminal_cost[s.x[T], s.u[T]] != s.cost:
        bad.append("cost != c_T(x_T, u_T)")
    return bad


class Primitives:
    """Uniform i.i.d. draws of (x_0, n_0), w_t and n_t, fixed per (seed, run)."""

    def __init__(self, model: SystemModel, seed: int):
        self.model = model
        self.seed = seed
        roots = set(root_observations(model))
        h0 = model.observation[0]
        self.starts = [(x, n) for x in model.initial_states for n in range(h0.shape[1])
                       if int(h0[x, n]) in roots]

    def draw(self, run: int):
        m = self.model
        rng = np.random.default_rng([self.seed, run])
        x0, n0 = self.starts[int(rng.integers(len(self.starts)))]
        w = [int(rng.integers(m.dynamics[t].shape[2])) for t in range(m.horizon)]
        n = [n0] + [int(rng.integers(m.observation[t].shape[1])) for t in range(1, m.horizon + 1)]
        return x0, w, n


def run_controller(model: SystemModel, controller, x0: int, w: list, n: list,
                   kernel: Kernel) -> TrajectorySample:
    T = model.horizon
    x = [x0]
    y = [int(model.observation[0][x0, n[0]])]
    u = []
    P = initial_range(model, y[0], kernel)
    z = controller.start(y[0], P)
    for t in range(T):
        a = controller.act(t, P, z)
        u.append(a)
        x.append(int(model.dynamics[t][x[t], a, w[t]]))
        y.append(int(model.observation[t + 1][x[t + 1], n[t + 1]]))
        P2 = kernel.filter(t + 1, kernel.image(t, P, a), y[t + 1])
        z = controller.advance(t, P, z, a, y[t + 1], P2)
        P = P2
    u.append(controller.act(T, P, z))
    return TrajectorySample(x, list(w), list(n), y, u, float(model.terminal_cost[x[T], u[T]]))


def adversarial_sample(model: SystemModel, controller, tables: EvalTables,
                       kernel: Kernel, y0: Optional[int] = None) -> TrajectorySample:
    """Replay the adversary's choices and recover primitives that produce them."""
    T = model.horizon
    y0 = tables.worst_root if y0 is None else y0
    key = tables.roots[y0]
    keys, ys, us = [key], [y0], []
    for t in range(T):
        a = tables.action[t][key]
        y = tables.worst_y[t][key]
        key = tables.children[t][(key, a)][y]
        us.append(a)
        ys.append(y)
        keys.append(key)
    us.append(tables.action[T][key])
    # walk back from the worst terminal state through the ranges
    ranges = [initial_range(model, y0, kernel)]
    for t in range(T):
        ranges.append(kernel.filter(t + 1, kernel.image(t, ranges[t], us[t]), ys[t + 1]))
    x = [0] * (T + 1)
    w = [0] * T
    x[T] = tables.worst_x[key]
    for t in range(T - 1, -1, -1):
        f = model.dynamics[t]
        for xp in ranges[t]:
            hit = np.nonzero(f[xp, us[t]] == x[t + 1])[0]
            if hit.size:
                x[t], w[t] = int(xp), int(hit[0])
                break
        else:
            raise AssertionError("adversarial witness is not reachable")
    n = [int(np.nonzero(model.observation[t][x[t]] == ys[t])[0][0]) for t in range(T + 1)]
    return TrajectorySample(x, w, n, ys, us, float(model.terminal_cost[x[T], us[T]]))


def _stats(values) -> dict:
    if not values:
        return {}
    v = np.asarray(values, dtype=float)
    return {"runs": len(values), "min": float(v.min()), "max": float(v.max()), "mean": float(v.mean())}


@dataclass
class SimulationResult:
    samples: list
    stats: dict


def simulate(model: SystemModel, controller, source: str = "uniform", runs: int = 1000,
             seed: int = 0, tables: Optional[EvalTables] = None,
             kernel: Optional[Kernel] = None) -> SimulationResult:
    """Run a strategy ``runs`` times.

    ``source="uniform"`` draws every primitive uniformly from its feasible set
    (independently per step, reproducible from ``seed`` and the run index);
    ``source="adversarial"`` replays the worst case found by
    :func:`evaluate_policy_worstcase`.
    """
    if runs < 0:
        raise ValueError("runs must be >= 0")
    k = kernel or Kernel(model)
    samples = []
    if source == "uniform":
        prim = Primitives(model, seed)
        for r in range(runs):
            samples.append(run_controller(model, controller, *prim.draw(r), k))
    elif source == "adversarial":
        if runs:
            tables = tables or evaluate_policy_worstcase(model, controller, kernel=k)
            s = adversarial_sample(model, controller, tables, k)
            samples = [s] * runs
    else:
        raise ValueError("source must be 'uniform' or 'adversarial'")
    return SimulationResult(samples, _stats([s.cost for s in samples]))


@dataclass
class Comparison:
    samples_a: list
    samples_b: list
    stats: dict = field(default_factory=dict)

    @property
    def diffs(self) -> list:
        return [a.cost - b.cost for a, b in zip(self.samples_a, self.samples_b)]

    def rows(self):
        for r, (a, b) in enumerate(zip(self.samples_a, self.samples_b)):
            yield r, a.cost, b.cost, a.cost - b.cost


def _num(v):
    return int(v) if float(v).is_integer() else v


def compare_policies(model: SystemModel, a, b, runs: int = 1000, seed: int = 0,
                     kernel: Optional[Kernel] = None) -> Comparison:
    """Both strategies on the same primitive draws; statistics of cost_a - cost_b."""
    k = kernel or Kernel(model)
    prim = Primitives(model, seed)
    sa, sb = [], []
    for r in range(runs):
        x0, w, n = prim.draw(r)
        sa.append(run_controller(model, a, x0, w, n, k))
        sb.append(run_controller(model, b, x0, w, n, k))
    cmp = Comparison(sa, sb)
    d = cmp.diffs
    if d:
        hist = Counter(d)
        top = max(hist.values())
        cmp.stats = dict(_stats(d), mode=min(v for v, c in hist.items() if c == top),
                         histogram=[[_num(v), c] for v, c in sorted(hist.items())])
    return cmp


CSV_COLUMNS = ("run", "cost_a", "cost_b", "diff")


def comparison_csv(cmp: Comparison) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r, a, b, d in cmp.rows():
        w.writerow((r, _num(a), _num(b), _num(d)))
    return buf.getvalue()
