"""Exact worst-case dynamic programs: over memories and over conditional ranges.

Both solvers enumerate reachable nodes forward from every root observation
y_0, then sweep backward:

    Q_T(k, u) = max_{x in range(k)} c_T(x, u)
    Q_t(k, u) = max over feasible successors k' of V_{t+1}(k')
    V_t(k)    = min_u Q_t(k, u)

with ties in the argmin going to the lowest action index.
"""

from __future__ import annotations

import time
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Callable, Hashable, Optional

import numpy as np

from .model import MemoryNode, SystemModel
from .ranges import PointSet

MEMORY_BUDGET = 5_000_000
INFOSTATE_BUDGET = 5_000_000


class CapacityError(RuntimeError):
    """Enumeration exceeded its node budget."""

    def __init__(self, message, trace=()):
        self.trace = list(trace)
        super().__init__(f"{message}; nodes per step so far: {self.trace}")


class InfeasibleObservationError(ValueError):
    pass


class Kernel:
    """Per-step lookup tables for range propagation.

    ``succ(t)[x][u]`` lists the distinct f_t(x, u, w) over w and
    ``obs(t)[x]`` the distinct h_t(x, n) over n. Tables shared between steps
    (time-invariant models) are built once.
    """

    def __init__(self, model: SystemModel):
        self.model = model
        self._cache: dict = {}
        self._succ = [None] * model.horizon
        self._obs = [None] * (model.horizon + 1)

    def _shared(self, arr, build):
        key = id(arr)
        hit = self._cache.get(key)
        if hit is None or hit[0] is not arr:
            hit = (arr, build(arr))
            self._cache[key] = hit
        return hit[1]

    def succ(self, t: int):
        if self._succ[t] is None:
            def build(f):
                return [[tuple(sorted(set(row.tolist()))) for row in fx] for fx in f]
            self._succ[t] = self._shared(self.model.dynamics[t], build)
        return self._succ[t]

    def obs(self, t: int):
        if self._obs[t] is None:
            def build(h):
                return [tuple(sorted(set(row.tolist()))) for row in h]
            self._obs[t] = self._shared(self.model.observation[t], build)
        return self._obs[t]

    def image(self, t: int, states, u: int) -> set:
        succ = self.succ(t)
        out = set()
        for x in states:
            out.update(succ[x][u])
        return out

    def split(self, t: int, states, u: int) -> dict:
        """Successor ranges keyed by the feasible next observation.

        Returns ``{y_{t+1}: P_{t+1}}`` with every range non-empty and sorted.
        """
        obs = self.obs(t + 1)
        buckets = defaultdict(list)
        for x2 in sorted(self.image(t, states, u)):
            for y in obs[x2]:
                buckets[y].append(x2)
        return {y: tuple(buckets[y]) for y in sorted(buckets)}

    def filter(self, t: int, states, y: int) -> PointSet:
        obs = self.obs(t)
        return tuple(x for x in sorted(states) if y in obs[x])


def root_observations(model: SystemModel) -> tuple:
    if model.initial_observations is not None:
        return tuple(model.initial_observations)
    h0 = model.observation[0]
    return tuple(sorted({int(y) for x in model.initial_states for y in h0[x]}))


def initial_range(model: SystemModel, y0: int, kernel: Optional[Kernel] = None) -> PointSet:
    """Initial states consistent with the first observation."""
    h0 = model.observation[0]
    P = tuple(x for x in model.initial_states if np.any(h0[x] == y0))
    if not P:
        raise InfeasibleObservationError(f"observation {y0} cannot be produced by any initial state")
    return P


def range_update(model: SystemModel, P: PointSet, u: int, y_next: int, t: int,
                 kernel: Optional[Kernel] = None) -> PointSet:
    """Conditional range after applying ``u`` at step ``t`` and observing ``y_next``.

    An empty result means ``y_next`` cannot follow ``(P, u)``.
    """
    k = kernel or Kernel(model)
    return k.filter(t + 1, k.image(t, P, u), y_next)


def feasible_observations(model: SystemModel, P: PointSet, u: int, t: int,
                          kernel: Optional[Kernel] = None) -> PointSet:
    k = kernel or Kernel(model)
    obs = k.obs(t + 1)
    return tuple(sorted({y for x in k.image(t, P, u) for y in obs[x]}))


@dataclass
class Solution:
    """Value tables, Q tables, policy and successor structure of one DP.

    ``children[t][(key, u)]`` maps each feasible y_{t+1} to the successor
    key; ``support[key]`` (step T only, for approximate solutions) or the
    key itself gives the state set the terminal cost is maximized over.
    """

    method: str
    horizon: int
    V: list
    Q: list
    policy: list
    children: list
    roots: dict
    elapsed: float = 0.0
    info: dict = field(default_factory=dict)

    def value(self, y0: int) -> float:
        return self.V[0][self.roots[y0]]

    @property
    def worst_value(self) -> float:
        """Worst case over every admissible first observation."""
        return max(self.V[0][k] for k in self.roots.values())

    def n_nodes(self) -> list:
        return [len(v) for v in self.V]

    def action(self, t: int, key) -> int:
        return self.policy[t][key]


def _backward(model: SystemModel, levels: list, children: list,
              terminal_states: Callable) -> tuple:
    T = model.horizon
    V = [dict() for _ in range(T + 1)]
    Q = [dict() for _ in range(T + 1)]
    pol = [dict() for _ in range(T + 1)]
    cT = model.terminal_cost
    for key in levels[T]:
        q = cT[list(terminal_states(key))].max(axis=0)
        qs = tuple(float(v) for v in q)
        Q[T][key] = qs
        a = int(np.argmin(q))
        pol[T][key] = a
        V[T][key] = qs[a]
    for t in range(T - 1, -1, -1):
        Vn = V[t + 1]
        ch = children[t]
        nu = model.n_actions(t)
        for key in levels[t]:
            qs = tuple(max(Vn[c] for c in ch[(key, u)].values()) for u in range(nu))
            best = 0
            for u in range(1, nu):
                if qs[u] < qs[best]:
                    best = u
            Q[t][key] = qs
            pol[t][key] = best
            V[t][key] = qs[best]
    return V, Q, pol


def solve_infostate_dp(model: SystemModel, budget: int = INFOSTATE_BUDGET,
                       kernel: Optional[Kernel] = None) -> Solution:
    """DP over conditional ranges, keyed by their sorted member tuples."""
    start = time.perf_counter()
    k = kernel or Kernel(model)
    T = model.horizon
    roots = {y0: initial_range(model, y0, k) for y0 in root_observations(model)}
    levels = [dict.fromkeys(sorted(set(roots.values())))]
    children = []
    total = len(levels[0])
    for t in range(T):
        nxt = {}
        ch = {}
        nu = model.n_actions(t)
        for P in levels[t]:
            for u in range(nu):
                br = k.split(t, P, u)
                ch[(P, u)] = br
                for P2 in br.values():
                    nxt[P2] = None
        total += len(nxt)
        if total > budget:
            raise CapacityError("conditional-range enumeration exceeded its budget",
                                [len(l) for l in levels] + [len(nxt)])
        children.append(ch)
        levels.append(dict.fromkeys(sorted(nxt)))
    V, Q, pol = _backward(model, levels, children, lambda P: P)
    return Solution("infostate", T, V, Q, pol, children, roots,
                    elapsed=time.perf_counter() - start)


@dataclass
class MemorySolution(Solution):
    ranges: list = field(default_factory=list)

    def range_of(self, node: MemoryNode) -> PointSet:
        return self.ranges[node.t][node]


def enumerate_memories(model: SystemModel, budget: int = MEMORY_BUDGET,
                       kernel: Optional[Kernel] = None):
    """Reachable memory tree: per-step ``{node: range}`` and children maps."""
    k = kernel or Kernel(model)
    T = model.horizon
    level = {}
    for y0 in root_observations(model):
        level[MemoryNode((y0,), ())] = initial_range(model, y0, k)
    ranges = [level]
    children = []
    total = len(level)
    for t in range(T):
        nxt = {}
        ch = {}
        for node, P in ranges[t].items():
            for u in range(model.n_actions(t)):
                kids = {}
                for y, P2 in k.split(t, P, u).items():
                    child = node.extend(u, y)
                    kids[y] = child
                    nxt[child] = P2
                ch[(node, u)] = kids
                total += len(kids)
                if total > budget:
                    raise CapacityError(
                        "memory enumeration exceeded its budget; use the information-state solver",
                        [len(r) for r in ranges] + [len(nxt)])
        children.append(ch)
        ranges.append(nxt)
    return ranges, children


def solve_memory_dp(model: SystemModel, budget: int = MEMORY_BUDGET,
                    kernel: Optional[Kernel] = None) -> MemorySolution:
    """DP over full observation/action histories."""
    start = time.perf_counter()
    ranges, children = enumerate_memories(model, budget, kernel)
    levels = [list(r) for r in ranges]
    V, Q, pol = _backward(model, levels, children, lambda node: ranges[model.horizon][node])
    roots = {node.observations[0]: node for node in ranges[0]}
    sol = MemorySolution("memory", model.horizon, V, Q, pol, children, roots,
                         elapsed=time.perf_counter() - start, ranges=ranges)
    return sol


@dataclass
class EquivalenceReport:
    checked: int
    discrepancies: list

    @property
    def ok(self) -> bool:
        return not self.discrepancies

    def to_dict(self):
        return {"checked": self.checked, "ok": self.ok,
                "discrepancies": [list(map(str, d)) for d in self.discrepancies[:100]]}


def check_theorem1(model: SystemModel, memory: Optional[MemorySolution] = None,
                   info: Optional[Solution] = None) -> EquivalenceReport:
    """Exact equality of Q and V between the memory DP and the range DP."""
    memory = memory or solve_memory_dp(model)
    info = info or solve_infostate_dp(model)
    bad = []
    checked = 0
    for t in range(model.horizon + 1):
        for node, P in memory.ranges[t].items():
            qm, qi = memory.Q[t][node], info.Q[t].get(P)
            checked += 1
            if qi is None:
                bad.append((t, node.encode(), "range not reached by the range DP"))
                continue
            for u, (a, b) in enumerate(zip(qm, qi)):
                if a != b:
                    bad.append((t, node.encode(), f"Q(u={u}): memory {a} != range {b}"))
            if memory.V[t][node] != info.V[t][P]:
                bad.append((t, node.encode(), f"V: memory {memory.V[t][node]} != range {info.V[t][P]}"))
    return EquivalenceReport(checked, bad)


@dataclass
class PropertyReport:
    scope: str
    terminal_cost_ok: bool
    self_prediction_ok: bool
    terminal_witness: Optional[tuple] = None
    prediction_witness: Optional[tuple] = None

    @property
    def ok(self) -> bool:
        return self.terminal_cost_ok and self.self_prediction_ok

    def to_dict(self):
        return {
            "scope": self.scope,
            "terminal_cost": {"ok": self.terminal_cost_ok,
                              "witness": None if self.terminal_witness is None else list(map(str, self.terminal_witness))},
            "self_prediction": {"ok": self.self_prediction_ok,
                                "witness": None if self.prediction_witness is None else list(map(str, self.prediction_witness))},
        }


def verify_information_state(model: SystemModel, sigma: Callable[[MemoryNode, PointSet], Hashable],
                             memory: Optional[MemorySolution] = None,
                             tol: float = 0.0) -> PropertyReport:
    """Check the two information-state properties of a candidate compression.

    ``sigma(node, range)`` returns the compressed value of a memory (the
    node's conditional range is passed along for convenience). Both
    properties are checked over the reachable memories only.

    - terminal cost: the worst terminal cost over [[X_T | m_T]] equals the
      worst one over the states of every memory sharing sigma(m_T);
    - self prediction: the successor values {sigma(m_{t+1})} of (m_t, u_t)
      equal the union of successor values over all memories with the same
      sigma(m_t).
    """
    if memory is None:
        ranges, children = enumerate_memories(model)
    else:
        ranges, children = memory.ranges, memory.children
    T = model.horizon
    cT = model.terminal_cost
    sig = [{node: sigma(node, P) for node, P in ranges[t].items()} for t in range(T + 1)]

    pooled = defaultdict(set)
    for node, P in ranges[T].items():
        pooled[sig[T][node]].update(P)
    term_ok, term_w = True, None
    for node, P in ranges[T].items():
        own = cT[list(P)].max(axis=0)
        via = cT[sorted(pooled[sig[T][node]])].max(axis=0)
        diff = np.abs(own - via)
        if np.any(diff > tol):
            u = int(np.argmax(diff))
            term_ok, term_w = False, (T, node.encode(), f"u={u}", float(own[u]), float(via[u]))
            break

    pred_ok, pred_w = True, None
    for t in range(T):
        nu = model.n_actions(t)
        own_sets = {}
        pooled_next = defaultdict(set)
        for node in ranges[t]:
            for u in range(nu):
                s = frozenset(sig[t + 1][c] for c in children[t][(node, u)].values())
                own_sets[(node, u)] = s
                pooled_next[(sig[t][node], u)] |= s
        for (node, u), s in own_sets.items():
            if s != pooled_next[(sig[t][node], u)]:
                pred_ok, pred_w = False, (t, node.encode(), f"u={u}")
                break
        if not pred_ok:
            break
    return PropertyReport("reachable memories", term_ok, pred_ok, term_w, pred_w)


def encode_key(key) -> str:
    if hasattr(key, "encode"):
        return key.encode()
    return ",".join(str(x) for x in key)


def solution_document(sol: Solution, encode: Callable = encode_key) -> dict:
    """Step -> rows of {encoding, V, Q, action}, ordered by encoding."""
    steps = []
    for t in range(sol.horizon + 1):
        rows = [{"encoding": encode(k), "V": _plain(sol.V[t][k]),
                 "Q": [_plain(q) for q in sol.Q[t][k]], "action": sol.policy[t][k]}
                for k in sol.V[t]]
        rows.sort(key=lambda r: r["encoding"])
        steps.append({"t": t, "nodes": rows})
    return {"method": sol.method, "horizon": sol.horizon,
            "roots": {str(y): encode(k) for y, k in sorted(sol.roots.items())},
            "steps": steps}


def _plain(v):
    f = float(v)
    return int(f) if f.is_integer() else f
