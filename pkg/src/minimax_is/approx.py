"""Quantized approximate information states, their DP and error ledgers.

An approximate state is a set of representative states (plus an optional
tag holding the first observation). It stands for the states within
``gamma_t`` of its members. Three constructions are available:

``partially-observed``
    ``mode="recursive"`` (default) propagates the approximate state itself:
    expand it to its gamma-balls, apply the exact range update, quantize.
    ``mode="direct"`` quantizes the exact conditional range at every step.
``gridworld-with-y0``
    the recursive construction, with y_0 carried along and the expansion
    intersected with the states reachable from y_0's initial range.
``perfectly-observed``
    the quantized state itself, for systems whose observation reveals x_t.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import NamedTuple, Optional, Sequence

import numpy as np

from .exact import (
    INFOSTATE_BUDGET,
    CapacityError,
    Kernel,
    MemorySolution,
    Solution,
    enumerate_memories,
    initial_range,
    root_observations,
    solve_infostate_dp,
)
from .model import SystemModel
from .ranges import REAL_TOL, MetricTable, SetMetric, hausdorff, lipschitz_constant

VARIANTS = ("partially-observed", "gridworld-with-y0", "perfectly-observed")
MODES = ("recursive", "direct")


@dataclass(frozen=True, eq=False)
class StepQuantizer:
    """Representatives, nearest-representative map and balls for one step."""

    gamma: float
    representatives: tuple
    mu: np.ndarray
    balls: dict
    radius: float

    def quantize(self, states) -> tuple:
        mu = self.mu
        return tuple(sorted({int(mu[x]) for x in states}))


@dataclass(frozen=True, eq=False)
class QuantizationScheme:
    steps: tuple

    def __getitem__(self, t) -> StepQuantizer:
        return self.steps[t]

    def gamma(self, t: int) -> float:
        # gamma_{T+1} = 0
        return self.steps[t].gamma if t < len(self.steps) else 0.0

    @property
    def gammas(self) -> list:
        return [s.gamma for s in self.steps]


def build_quantizer(d: MetricTable, gamma: float) -> StepQuantizer:
    """Greedy cover: repeatedly take the point whose gamma-ball covers most
    uncovered points (lowest index on ties) until everything is covered."""
    if gamma < 0:
        raise ValueError("gamma must be >= 0")
    D = d.dense()
    n = d.size
    cover = D <= gamma + REAL_TOL
    uncovered = np.ones(n, dtype=bool)
    reps = []
    while uncovered.any():
        gain = (cover & uncovered[None, :]).sum(axis=1)
        r = int(np.argmax(gain))
        reps.append(r)
        uncovered &= ~cover[r]
    reps.sort()
    R = np.asarray(reps)
    nearest = D[:, R]
    mu = R[np.argmin(nearest, axis=1)]
    mu.setflags(write=False)
    radius = float(nearest.min(axis=1).max())
    balls = {int(r): tuple(int(x) for x in np.nonzero(cover[r])[0]) for r in reps}
    return StepQuantizer(float(gamma), tuple(int(r) for r in reps), mu, balls, radius)


def identity_quantizer(n: int) -> StepQuantizer:
    mu = np.arange(n)
    mu.setflags(write=False)
    return StepQuantizer(0.0, tuple(range(n)), mu, {x: (x,) for x in range(n)}, 0.0)


def uniform_scheme(model: SystemModel, gamma) -> QuantizationScheme:
    """One quantizer per step; ``gamma`` is a scalar or a per-step sequence.

    Gridworld models get the agent-exact product quantizer.
    """
    T = model.horizon
    gammas = list(gamma) if isinstance(gamma, (list, tuple)) else [gamma] * (T + 1)
    if len(gammas) != T + 1:
        raise ValueError(f"need {T + 1} gamma values, got {len(gammas)}")
    if model.meta.get("kind") == "gridworld":
        from .gridworld import gridworld_quantizer
        return QuantizationScheme(tuple(gridworld_quantizer(model, g) for g in gammas))
    cache = {}
    steps = []
    for t, g in enumerate(gammas):
        key = (id(model.state_metrics[t]), float(g))
        if key not in cache:
            cache[key] = (identity_quantizer(model.n_states(t)) if g == 0
                          else build_quantizer(model.state_metrics[t], g))
        steps.append(cache[key])
    return QuantizationScheme(tuple(steps))


def quantize_range(P, q: StepQuantizer) -> tuple:
    """Replace each state by its representative."""
    return q.quantize(P)


class ApproxState(NamedTuple):
    members: tuple
    tag: Optional[int] = None

    def encode(self) -> str:
        body = ",".join(str(x) for x in self.members)
        return body if self.tag is None else f"{body}|y0={self.tag}"


class _Construction:
    name = "partially-observed"
    mode = "recursive"

    def __init__(self, model: SystemModel, q: QuantizationScheme, kernel: Kernel):
        self.model = model
        self.q = q
        self.kernel = kernel
        self._support = [dict() for _ in range(model.horizon + 1)]
        self._pieces = {}
        self._states = {}
        self._succ = {}

    def root(self, y0: int, P0) -> ApproxState:
        return ApproxState(self.q[0].quantize(P0))

    def ball(self, t: int, tag, r: int) -> tuple:
        """States represented by representative ``r``."""
        return self.q[t].balls[r]

    def support(self, t: int, s: ApproxState) -> tuple:
        """The states an approximate state stands for."""
        cache = self._support[t]
        hit = cache.get(s)
        if hit is None:
            out = set()
            for r in s.members:
                out.update(self.ball(t, s.tag, r))
            hit = tuple(sorted(out))
            cache[s] = hit
        return hit

    def _piece(self, t, tag, r, u) -> dict:
        # quantized successors of one ball, per observation, as bitmasks of
        # representatives; filtering and quantizing both commute with
        # unions, so a state's successors are the OR of its members' pieces
        key = (t, tag, r, u)
        hit = self._pieces.get(key)
        if hit is None:
            mu = self.q[t + 1].mu
            obs = self.kernel.obs(t + 1)
            hit = {}
            for x2 in self.kernel.image(t, self.ball(t, tag, r), u):
                bit = 1 << int(mu[x2])
                for y in obs[x2]:
                    hit[y] = hit.get(y, 0) | bit
            self._pieces[key] = hit
        return hit

    def _state(self, mask: int, tag) -> ApproxState:
        key = (mask, tag)
        hit = self._states.get(key)
        if hit is None:
            members = []
            while mask:
                low = mask & -mask
                members.append(low.bit_length() - 1)
                mask ^= low
            hit = ApproxState(tuple(members), tag)
            self._states[key] = hit
        return hit

    def successors(self, t: int, s: ApproxState, u: int) -> dict:
        key = (t, s, u)
        hit = self._succ.get(key)
        if hit is None:
            tag = s.tag
            if len(s.members) == 1:
                acc = self._piece(t, tag, s.members[0], u)
            else:
                acc = {}
                for r in s.members:
                    for y, mk in self._piece(t, tag, r, u).items():
                        acc[y] = acc.get(y, 0) | mk
            hit = {y: self._state(acc[y], tag) for y in sorted(acc)}
            self._succ[key] = hit
        return hit

    def track(self, t, s, P, u, y, P_next) -> ApproxState:
        nxt = self.successors(t, s, u).get(y)
        if nxt is None:
            raise AssertionError("approximate range lost the true state")
        return nxt

    def prepare(self, roots: dict, budget: int) -> None:
        pass


class _Pinned(_Construction):
    name = "gridworld-with-y0"

    def __init__(self, model, q, kernel):
        super().__init__(model, q, kernel)
        self._reach = {}
        self._balls = {}

    def root(self, y0, P0):
        return ApproxState(self.q[0].quantize(P0), y0)

    def reach(self, y0: int, t: int) -> frozenset:
        """States reachable at step t from y_0's range under any actions."""
        levels = self._reach.get(y0)
        if levels is None:
            levels = [frozenset(initial_range(self.model, y0))]
            self._reach[y0] = levels
        k = self.kernel
        while len(levels) <= t:
            s = len(levels) - 1
            nxt = set()
            for u in range(self.model.n_actions(s)):
                nxt |= k.image(s, levels[s], u)
            levels.append(frozenset(nxt))
        return levels[t]

    def ball(self, t, tag, r):
        key = (t, tag, r)
        hit = self._balls.get(key)
        if hit is None:
            R = self.reach(tag, t)
            hit = tuple(x for x in self.q[t].balls[r] if x in R)
            self._balls[key] = hit
        return hit


class _Direct(_Construction):
    mode = "direct"

    def prepare(self, roots, budget):
        exact = solve_infostate_dp(self.model, budget=budget, kernel=self.kernel)
        self.groups = []
        for t in range(self.model.horizon + 1):
            g = {}
            for P in exact.V[t]:
                g.setdefault(self.q[t].quantize(P), []).append(P)
            self.groups.append(g)

    def successors(self, t, s, u):
        q = self.q[t + 1]
        out = set()
        for P in self.groups[t][s.members]:
            for P2 in self.kernel.split(t, P, u).values():
                out.add(ApproxState(q.quantize(P2)))
        return dict(enumerate(sorted(out)))

    def track(self, t, s, P, u, y, P_next):
        return ApproxState(self.q[t + 1].quantize(P_next))


class _Perfect(_Construction):
    name = "perfectly-observed"
    mode = "direct"

    def __init__(self, model, q, kernel):
        if not model.is_perfectly_observed():
            raise ValueError("perfectly-observed variant needs observations that reveal the state")
        super().__init__(model, q, kernel)

    def successors(self, t, s, u):
        mu = self.q[t + 1].mu
        succ = self.kernel.succ(t)
        out = {int(mu[x2]) for x in self.support(t, s) for x2 in succ[x][u]}
        return {k: ApproxState((r,)) for k, r in enumerate(sorted(out))}

    def track(self, t, s, P, u, y, P_next):
        return ApproxState(self.q[t + 1].quantize(P_next))


def make_construction(model, q, variant="partially-observed", mode="recursive", kernel=None):
    kernel = kernel or Kernel(model)
    if variant == "partially-observed":
        if mode not in MODES:
            raise ValueError(f"unknown mode {mode!r}")
        return (_Direct if mode == "direct" else _Construction)(model, q, kernel)
    if variant == "gridworld-with-y0":
        return _Pinned(model, q, kernel)
    if variant == "perfectly-observed":
        return _Perfect(model, q, kernel)
    raise ValueError(f"unknown variant {variant!r}; choose from {VARIANTS}")


@dataclass
class ApproxSolution(Solution):
    construction: Optional[_Construction] = None
    scheme: Optional[QuantizationScheme] = None


def solve_approx_dp(model: SystemModel, q: QuantizationScheme,
                    variant: str = "partially-observed", mode: str = "recursive",
                    budget: int = INFOSTATE_BUDGET, kernel: Optional[Kernel] = None) -> ApproxSolution:
    from .exact import _backward

    start = time.perf_counter()
    con = make_construction(model, q, variant, mode, kernel)
    k = con.kernel
    T = model.horizon
    P0s = {y0: initial_range(model, y0, k) for y0 in root_observations(model)}
    con.prepare(P0s, budget)
    roots = {y0: con.root(y0, P0) for y0, P0 in P0s.items()}
    levels = [dict.fromkeys(sorted(set(roots.values())))]
    children = []
    total = len(levels[0])
    for t in range(T):
        nxt = {}
        ch = {}
        for s in levels[t]:
            for u in range(model.n_actions(t)):
                br = con.successors(t, s, u)
                ch[(s, u)] = br
                for s2 in br.values():
                    nxt[s2] = None
        total += len(nxt)
        if total > budget:
            raise CapacityError("approximate-state enumeration exceeded its budget",
                                [len(l) for l in levels] + [len(nxt)])
        children.append(ch)
        levels.append(dict.fromkeys(sorted(nxt)))
    V, Q, pol = _backward(model, levels, children, lambda s: con.support(T, s))
    return ApproxSolution("approx", T, V, Q, pol, children, roots,
                          elapsed=time.perf_counter() - start,
                          info={"variant": con.name, "mode": con.mode, "gamma": q.gammas},
                          construction=con, scheme=q)


# --- distances between approximate states ---------------------------------

class StateDistance:
    """Hausdorff distance between approximate states of one step, with the
    tag (first observation) entering through a max."""

    def __init__(self, model: SystemModel, t: int):
        self.d = model.state_metrics[t]
        self.dy0 = model.observation_metrics[0]
        self._cache = {}

    def __call__(self, a: ApproxState, b: ApproxState):
        if a == b:
            return 0
        key = (a, b) if a < b else (b, a)
        hit = self._cache.get(key)
        if hit is None:
            hit = hausdorff(a.members, b.members, self.d)
            if a.tag is not None and b.tag is not None:
                hit = max(hit, self.dy0(a.tag, b.tag))
            self._cache[key] = hit
        return hit

    def metric_over(self, states: Sequence[ApproxState]) -> SetMetric:
        tags = [s.tag for s in states]
        if any(t is None for t in tags):
            return SetMetric([s.members for s in states], self.d)
        return SetMetric([s.members for s in states], self.d, tags, self.dy0)


def outer_hausdorff(K: set, Khat: set, dist: StateDistance):
    """Hausdorff distance between two finite sets of approximate states."""
    if K == Khat:
        return 0
    worst = 0
    for a in K - Khat:
        worst = max(worst, min(dist(a, b) for b in Khat))
    for b in Khat - K:
        worst = max(worst, min(dist(a, b) for a in K))
    return worst


# --- ledgers ----------------------------------------------------------------

class MeasurementRecord(NamedTuple):
    t: int
    encoding: str
    action: int
    K_next: frozenset
    K_hat_next: frozenset
    gap: float


@dataclass
class BoundLedger:
    provenance: str
    gammas: list
    eps_T: float
    deltas: list
    L_vhat: list = field(default_factory=list)
    alphas: list = field(default_factory=list)
    constants: dict = field(default_factory=dict)
    witnesses: list = field(default_factory=list)

    @property
    def alpha0(self) -> float:
        return self.alphas[0]

    def with_alphas(self, L_vhat: Sequence[float]) -> "BoundLedger":
        self.L_vhat = [float(v) for v in L_vhat]
        self.alphas = alpha_recursion(self.eps_T, self.deltas, self.L_vhat)
        return self

    def to_dict(self):
        return {"provenance": self.provenance, "gamma": self.gammas, "eps_T": self.eps_T,
                "delta": self.deltas, "L_vhat": self.L_vhat, "alpha": self.alphas,
                "constants": self.constants, "witnesses": self.witnesses}


def alpha_recursion(eps_T: float, deltas: Sequence[float], L_vhat: Sequence[float]) -> list:
    """alpha_T = eps_T and alpha_t = alpha_{t+1} + L_vhat[t] * delta_t."""
    if eps_T is None or deltas is None or L_vhat is None:
        raise ValueError("alpha recursion needs eps_T, every delta_t and every L_vhat")
    T = len(deltas)
    if len(L_vhat) != T:
        raise ValueError(f"need {T} Lipschitz constants, got {len(L_vhat)}")
    alphas = [0.0] * (T + 1)
    alphas[T] = float(eps_T)
    for t in range(T - 1, -1, -1):
        alphas[t] = alphas[t + 1] + float(L_vhat[t]) * float(deltas[t])
    return alphas


def value_lipschitz(model: SystemModel, sol: Solution, t: int) -> float:
    """Empirical Lipschitz constant of the step-t value table over its keys."""
    keys = list(sol.V[t])
    if len(keys) < 2:
        return 0.0
    states = [k if isinstance(k, ApproxState) else ApproxState(tuple(k)) for k in keys]
    metric = StateDistance(model, t).metric_over(states)
    values = np.array([sol.V[t][k] for k in keys])
    return lipschitz_constant(values, metric)


def _pairs_forward(model, sol: ApproxSolution):
    """Reachable (exact range, approximate state) pairs per step.

    A memory influences every quantity of the measured ledger only through
    this pair, so enumerating pairs is exact and much smaller than the
    memory tree.
    """
    con = sol.construction
    k = con.kernel
    level = {}
    for y0, s0 in sol.roots.items():
        level[(initial_range(model, y0, k), s0)] = None
    levels = [level]
    for t in range(model.horizon):
        nxt = {}
        for (P, s) in levels[t]:
            for u in range(model.n_actions(t)):
                for y, P2 in k.split(t, P, u).items():
                    nxt[(P2, con.track(t, s, P, u, y, P2))] = None
        levels.append(nxt)
    return [[(P, s, f"{P}~{s.encode()}") for (P, s) in lv] for lv in levels]


def _memory_forward(model, sol: ApproxSolution, budget):
    con = sol.construction
    ranges, children = enumerate_memories(model, budget, con.kernel)
    levels = [{node: sol.roots[node.observations[0]] for node in ranges[0]}]
    for t in range(model.horizon):
        nxt = {}
        for node, s in levels[t].items():
            P = ranges[t][node]
            for u in range(model.n_actions(t)):
                for y, child in children[t][(node, u)].items():
                    nxt[child] = con.track(t, s, P, u, y, ranges[t + 1][child])
        levels.append(nxt)
    return [[(ranges[t][n], s, n.encode()) for n, s in levels[t].items()] for t in range(len(levels))]


def measured_bounds(model: SystemModel, q: QuantizationScheme,
                    variant: str = "partially-observed", mode: str = "recursive",
                    solution: Optional[ApproxSolution] = None, over: str = "pairs",
                    keep_records: bool = False, budget: int = INFOSTATE_BUDGET):
    """Measured eps_T and delta_t of the approximate state, plus alpha_t.

    eps_T is the largest gap between the worst terminal cost over the true
    range and over the approximate state's support; delta_t the largest
    Hausdorff distance between the approximate successors reachable from the
    true memory and those the approximate DP uses. ``over="memories"``
    quantifies over the memory tree itself (oracle scale only).
    """
    sol = solution or solve_approx_dp(model, q, variant, mode, budget)
    con = sol.construction
    k = con.kernel
    T = model.horizon
    if over == "pairs":
        levels = _pairs_forward(model, sol)
    elif over == "memories":
        levels = _memory_forward(model, sol, budget)
    else:
        raise ValueError("over must be 'pairs' or 'memories'")
    records = []
    witnesses = []
    deltas = []
    for t in range(T):
        dist = StateDistance(model, t + 1)
        best, wit = 0, None
        for P, s, enc in levels[t]:
            for u in range(model.n_actions(t)):
                K = frozenset(con.track(t, s, P, u, y, P2) for y, P2 in k.split(t, P, u).items())
                Khat = frozenset(sol.children[t][(s, u)].values())
                gap = outer_hausdorff(K, Khat, dist)
                if keep_records:
                    records.append(MeasurementRecord(t, enc, u, K, Khat, gap))
                if gap > best or wit is None:
                    best, wit = max(best, gap), (enc, u)
        deltas.append(float(best))
        witnesses.append({"t": t, "delta": float(best), "at": wit[0], "action": wit[1]})
    cT = model.terminal_cost
    eps, wit = 0.0, None
    for P, s, enc in levels[T]:
        gap = np.abs(cT[list(P)].max(axis=0) - cT[list(con.support(T, s))].max(axis=0))
        u = int(np.argmax(gap))
        if gap[u] > eps or wit is None:
            eps, wit = max(eps, float(gap[u])), (enc, u)
    witnesses.append({"t": T, "eps_T": eps, "at": wit[0], "action": wit[1]})
    L = [value_lipschitz(model, sol, t + 1) for t in range(T)]
    ledger = BoundLedger("measured", q.gammas, eps, deltas, witnesses=witnesses,
                         constants={"over": over, "variant": con.name, "mode": con.mode})
    ledger.with_alphas(L)
    ledger.constants["L_vhat"] = ledger.L_vhat
    return ledger, records


def _map_lipschitz(f: np.ndarray, d_in: MetricTable, d_out: Optional[MetricTable]) -> float:
    """Lipschitz constant in the first argument, worst over the other arguments."""
    return lipschitz_constant(f.reshape(f.shape[0], -1), d_in, d_out)


def range_map_lipschitz(model: SystemModel, t: int, families, kernel: Kernel) -> float:
    """Lipschitz constant of the range update in the observation argument.

    Over every range in ``families``, every action and every two feasible
    next observations y != y', the ratio H(P_y, P_y') / d(y, y').
    """
    dY = model.observation_metrics[t + 1]
    dX = model.state_metrics[t + 1]
    best = 0.0
    seen = set()
    for P in families:
        if P in seen:
            continue
        seen.add(P)
        for u in range(model.n_actions(t)):
            br = kernel.split(t, P, u)
            if len(br) < 2:
                continue
            ys = list(br)
            pts = sorted(set().union(*br.values()))
            pos = {x: k for k, x in enumerate(pts)}
            D = dX.sub(pts, pts).astype(np.float64)
            member = np.zeros((len(ys), len(pts)), dtype=bool)
            for i, y in enumerate(ys):
                member[i, [pos[x] for x in br[y]]] = True
            # near[j, x]: distance from point x to branch j
            near = np.stack([D[:, m].min(axis=1) for m in member])
            # one-sided gaps, H(i, j) = max(A[i, j], A[j, i])
            A = np.where(member[:, None, :], near[None, :, :], -np.inf).max(axis=2)
            H = np.maximum(A, A.T)
            dy = dY.sub(ys, ys).astype(np.float64)
            off = ~np.eye(len(ys), dtype=bool) & (H > 0)
            if off.any():
                best = max(best, float((H[off] / dy[off]).max()))
    return float(best)


def theoretical_bounds(model: SystemModel, q: QuantizationScheme,
                       variant: str = "partially-observed", mode: str = "recursive",
                       solution: Optional[ApproxSolution] = None,
                       L_vhat: Optional[Sequence[float]] = None,
                       budget: int = INFOSTATE_BUDGET) -> BoundLedger:
    """Quantization bounds with empirically computed Lipschitz constants.

    eps_T = 2 L_c gamma_T for every variant; delta_t is
    2 gamma_{t+1} + 2 L_f gamma_t for perfectly observed systems and
    2 gamma_{t+1} + 2 L_fbar L_h L_f gamma_t otherwise.
    """
    sol = solution or solve_approx_dp(model, q, variant, mode, budget)
    con = sol.construction
    T = model.horizon
    dX = model.state_metrics
    dY = model.observation_metrics
    L_c = max(lipschitz_constant(model.terminal_cost[:, u], dX[T]) for u in range(model.n_actions(T)))
    eps = 2 * L_c * q.gamma(T)
    L_f, L_h, L_fbar, deltas = [], [], [], []
    families = None
    memo = {}

    def lip(f, d_in, d_out):
        # models often repeat one table per step; the objects outlive the memo
        key = (id(f), id(d_in), id(d_out))
        if key not in memo:
            memo[key] = _map_lipschitz(f, d_in, d_out)
        return memo[key]

    if con.name != "perfectly-observed":
        exact = solve_infostate_dp(model, budget=budget, kernel=con.kernel)
        families = [list(exact.V[t]) for t in range(T + 1)]
        if con.mode == "recursive":
            for t in range(T + 1):
                families[t] += [con.support(t, s) for s in sol.V[t]]
    for t in range(T):
        lf = lip(model.dynamics[t], dX[t], dX[t + 1])
        L_f.append(lf)
        if con.name == "perfectly-observed":
            deltas.append(2 * q.gamma(t + 1) + 2 * lf * q.gamma(t))
            continue
        lh = lip(model.observation[t + 1], dX[t + 1], dY[t + 1])
        lfb = range_map_lipschitz(model, t, families[t], con.kernel)
        L_h.append(lh)
        L_fbar.append(lfb)
        deltas.append(2 * q.gamma(t + 1) + 2 * lfb * lh * lf * q.gamma(t))
    ledger = BoundLedger("theoretical", q.gammas, float(eps), [float(d) for d in deltas],
                         constants={"L_cT": L_c, "L_f": L_f, "L_h": L_h, "L_fbar": L_fbar,
                                    "variant": con.name, "mode": con.mode})
    if L_vhat is None:
        L_vhat = [value_lipschitz(model, sol, t + 1) for t in range(T)]
    return ledger.with_alphas(L_vhat)


@dataclass
class BoundCheck:
    checked: int
    violations: list

    @property
    def ok(self):
        return not self.violations


def check_value_bounds(model: SystemModel, memory: MemorySolution, sol: ApproxSolution,
                       ledger: BoundLedger, tol: float = 1e-9) -> BoundCheck:
    """|Q_t(m,u) - Qhat_t(sigma_hat(m),u)| <= alpha_t and the same for V, on every
    reachable memory."""
    con = sol.construction
    T = model.horizon
    alphas = ledger.alphas
    level = {node: sol.roots[node.observations[0]] for node in memory.ranges[0]}
    bad = []
    checked = 0
    for t in range(T + 1):
        for node, s in level.items():
            checked += 1
            if s not in sol.V[t]:
                bad.append((t, node.encode(), "approximate state missing from the DP"))
                continue
            gap_v = abs(memory.V[t][node] - sol.V[t][s])
            if gap_v > alphas[t] + tol:
                bad.append((t, node.encode(), f"|V - Vhat| = {gap_v} > alpha = {alphas[t]}"))
            for u, (a, b) in enumerate(zip(memory.Q[t][node], sol.Q[t][s])):
                if abs(a - b) > alphas[t] + tol:
                    bad.append((t, node.encode(), f"|Q - Qhat|(u={u}) = {abs(a - b)} > alpha = {alphas[t]}"))
        if t == T:
            break
        nxt = {}
        for node, s in level.items():
            P = memory.ranges[t][node]
            for u in range(model.n_actions(t)):
                for y, child in memory.children[t][(node, u)].items():
                    nxt[child] = con.track(t, s, P, u, y, memory.ranges[t + 1][child])
        level = nxt
    return BoundCheck(checked, bad)
