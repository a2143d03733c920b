"""The controlled system: spaces, tables, validation and the model file."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple, Optional, Sequence

import numpy as np

from .ranges import (
    DenseMetric,
    FiniteSpace,
    MetricError,
    MetricTable,
    ProductMetric,
    metric_violations,
    point_set,
)

FORMAT_NAME = "minimax-is/model"
FORMAT_VERSION = 1


class ModelFormatError(ValueError):
    """The model document does not match the schema."""


class ModelValidationError(ValueError):
    def __init__(self, violations):
        self.violations = list(violations)
        lines = "\n".join(f"  {v}" for v in self.violations[:20])
        more = "" if len(self.violations) <= 20 else f"\n  ... {len(self.violations) - 20} more"
        super().__init__(f"model failed validation:\n{lines}{more}")


class Violation(NamedTuple):
    kind: str
    where: tuple
    message: str

    def __str__(self):
        return f"[{self.kind}] at {self.where}: {self.message}"


class MemoryNode(NamedTuple):
    """A realization of the agent's memory: observations y_0..y_t, actions u_0..u_{t-1}."""

    observations: tuple
    actions: tuple

    @property
    def t(self) -> int:
        return len(self.observations) - 1

    def extend(self, u: int, y: int) -> "MemoryNode":
        return MemoryNode(self.observations + (y,), self.actions + (u,))

    def encode(self) -> str:
        parts = [f"y{self.observations[0]}"]
        for u, y in zip(self.actions, self.observations[1:]):
            parts += [f"u{u}", f"y{y}"]
        return ".".join(parts)


def _frozen(a, dtype, memo=None):
    """Read-only array; entries that are the same object stay shared."""
    if memo is not None and id(a) in memo:
        return memo[id(a)][1]
    out = np.asarray(a, dtype=dtype)
    if out.flags.writeable:
        out = out.copy()
        out.setflags(write=False)
    if memo is not None:
        memo[id(a)] = (a, out)
    return out


@dataclass(frozen=True, eq=False)
class SystemModel:
    """A finite-horizon partially observed system with set-valued uncertainty.

    ``dynamics[t][x, u, w]`` is the index of the next state in
    ``state_spaces[t + 1]`` (``t < T``), ``observation[t][x, n]`` indexes
    ``observation_spaces[t]`` and ``terminal_cost[x, u]`` is c_T. The
    optional ``step_costs[t][x, u]`` (``t < T``) turn the problem into an
    additive one, see :mod:`minimax_is.additive`.

    ``initial_observations`` restricts which y_0 the solvers start from; by
    default every y_0 consistent with ``initial_states`` is a root.
    """

    horizon: int
    state_spaces: tuple
    action_spaces: tuple
    disturbance_spaces: tuple
    noise_spaces: tuple
    observation_spaces: tuple
    dynamics: tuple
    observation: tuple
    terminal_cost: np.ndarray
    initial_states: tuple
    state_metrics: tuple
    observation_metrics: tuple
    step_costs: Optional[tuple] = None
    initial_observations: Optional[tuple] = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        setattr_ = object.__setattr__
        for name in ("state_spaces", "action_spaces", "disturbance_spaces",
                     "noise_spaces", "observation_spaces", "state_metrics",
                     "observation_metrics"):
            setattr_(self, name, tuple(getattr(self, name)))
        memo: dict = {}
        setattr_(self, "dynamics", tuple(_frozen(a, np.int64, memo) for a in self.dynamics))
        setattr_(self, "observation", tuple(_frozen(a, np.int64, memo) for a in self.observation))
        setattr_(self, "terminal_cost", _frozen(self.terminal_cost, np.float64))
        if self.step_costs is not None:
            setattr_(self, "step_costs", tuple(_frozen(a, np.float64) for a in self.step_costs))
        setattr_(self, "initial_states", tuple(int(x) for x in self.initial_states))
        if self.initial_observations is not None:
            setattr_(self, "initial_observations", tuple(int(y) for y in self.initial_observations))

    @property
    def T(self) -> int:
        return self.horizon

    def n_states(self, t: int) -> int:
        return self.state_spaces[t].size

    def n_actions(self, t: int) -> int:
        return self.action_spaces[t].size

    def n_observations(self, t: int) -> int:
        return self.observation_spaces[t].size

    @property
    def integer_costs(self) -> bool:
        tables = [self.terminal_cost] + list(self.step_costs or ())
        return all(np.array_equal(c, np.round(c)) for c in tables)

    def is_perfectly_observed(self) -> bool:
        """True when every y_t identifies x_t regardless of the noise."""
        for h in self.observation:
            if not np.all(h == h[:, :1]):
                return False
            if len(np.unique(h[:, 0])) != h.shape[0]:
                return False
        return True

    def digest(self) -> str:
        return hashlib.sha256(dumps_model(self).encode()).hexdigest()

    def replace(self, **changes) -> "SystemModel":
        kwargs = {name: getattr(self, name) for name in self.__dataclass_fields__}
        kwargs.update(changes)
        return SystemModel(**kwargs)


def validate(model: SystemModel) -> list[Violation]:
    """Every broken invariant of ``model``; empty when the model is well formed."""
    out: list[Violation] = []
    T = model.horizon
    if T < 0:
        return [Violation("horizon", (), f"horizon must be >= 0, got {T}")]
    expect = {
        "state_spaces": T + 1, "action_spaces": T + 1, "disturbance_spaces": T + 1,
        "noise_spaces": T + 1, "observation_spaces": T + 1, "observation": T + 1,
        "dynamics": T, "state_metrics": T + 1, "observation_metrics": T + 1,
    }
    if model.step_costs is not None:
        expect["step_costs"] = T
    for name, n in expect.items():
        got = len(getattr(model, name))
        if got != n:
            out.append(Violation("shape", (name,), f"expected {n} per-step entries, got {got}"))
    if out:
        return out

    nx = [s.size for s in model.state_spaces]
    nu = [s.size for s in model.action_spaces]
    nw = [s.size for s in model.disturbance_spaces]
    nn = [s.size for s in model.noise_spaces]
    ny = [s.size for s in model.observation_spaces]

    for t, f in enumerate(model.dynamics):
        if f.shape != (nx[t], nu[t], nw[t]):
            out.append(Violation("shape", ("dynamics", t), f"expected {(nx[t], nu[t], nw[t])}, got {f.shape}"))
            continue
        bad = np.argwhere((f < 0) | (f >= nx[t + 1]))
        for x, u, w in bad[:50]:
            out.append(Violation("codomain", (f"t={t}", f"x={x}", f"u={u}", f"w={w}"),
                                 f"f_{t} = {f[x, u, w]} is not a state of step {t + 1}"))
    for t, h in enumerate(model.observation):
        if h.shape != (nx[t], nn[t]):
            out.append(Violation("shape", ("observation", t), f"expected {(nx[t], nn[t])}, got {h.shape}"))
            continue
        bad = np.argwhere((h < 0) | (h >= ny[t]))
        for x, n in bad[:50]:
            out.append(Violation("codomain", (f"t={t}", f"x={x}", f"n={n}"),
                                 f"h_{t} = {h[x, n]} is not an observation of step {t}"))

    def check_cost(name, c, shape, where):
        if c.shape != shape:
            out.append(Violation("shape", where, f"{name}: expected {shape}, got {c.shape}"))
            return
        bad = np.argwhere(~np.isfinite(c) | (c < 0))
        for x, u in bad[:50]:
            out.append(Violation("cost", where + (f"x={x}", f"u={u}"),
                                 f"{name} = {c[x, u]} must be finite and >= 0"))

    check_cost("c_T", model.terminal_cost, (nx[T], nu[T]), ("terminal_cost",))
    for t, c in enumerate(model.step_costs or ()):
        check_cost(f"c_{t}", c, (nx[t], nu[t]), ("step_costs", f"t={t}"))

    if not model.initial_states:
        out.append(Violation("initial_states", (), "initial state set is empty"))
    if list(model.initial_states) != list(point_set(model.initial_states)):
        out.append(Violation("initial_states", (), "initial states must be sorted and unique"))
    for x in model.initial_states:
        if not 0 <= x < nx[0]:
            out.append(Violation("initial_states", (f"x={x}",), "not a state of step 0"))
    if model.initial_observations is not None:
        if not model.initial_observations:
            out.append(Violation("initial_observations", (), "empty list of initial observations"))
        for y in model.initial_observations:
            if not 0 <= y < ny[0]:
                out.append(Violation("initial_observations", (f"y={y}",), "not an observation of step 0"))

    for kind, metrics, sizes in (("state", model.state_metrics, nx),
                                 ("observation", model.observation_metrics, ny)):
        for t, d in enumerate(metrics):
            if d.size != sizes[t]:
                out.append(Violation("metric", (kind, f"t={t}"), f"metric over {d.size} points, space has {sizes[t]}"))
                continue
            for p in metric_violations(d):
                out.append(Violation("metric", (kind, f"t={t}"), p))
    return out


# --- serialization -------------------------------------------------------

def _num(v):
    f = float(v)
    return int(f) if f.is_integer() else f


def _cost_table(a):
    return [[_num(v) for v in row] for row in np.asarray(a)]


def _space_doc(s: FiniteSpace):
    doc = {"labels": list(s.labels)}
    if s.coords is not None:
        doc["coords"] = [list(c) if isinstance(c, tuple) else c for c in s.coords]
    return doc


def _metric_doc(d: MetricTable):
    if isinstance(d, ProductMetric):
        return {"product": [_metric_doc(f) for f in d.factors]}
    m = d.dense()
    return {"dense": m.tolist() if d.is_integer else [[_num(v) for v in row] for row in m]}


def model_document(model: SystemModel) -> dict:
    doc = {
        "format": FORMAT_NAME,
        "version": FORMAT_VERSION,
        "horizon": model.horizon,
        "spaces": {
            "state": [_space_doc(s) for s in model.state_spaces],
            "action": [_space_doc(s) for s in model.action_spaces],
            "disturbance": [_space_doc(s) for s in model.disturbance_spaces],
            "noise": [_space_doc(s) for s in model.noise_spaces],
            "observation": [_space_doc(s) for s in model.observation_spaces],
        },
        "dynamics": [f.tolist() for f in model.dynamics],
        "observation": [h.tolist() for h in model.observation],
        "terminal_cost": _cost_table(model.terminal_cost),
        "step_costs": None if model.step_costs is None else [_cost_table(c) for c in model.step_costs],
        "initial_states": list(model.initial_states),
        "initial_observations": None if model.initial_observations is None else list(model.initial_observations),
        "metrics": {
            "state": [_metric_doc(d) for d in model.state_metrics],
            "observation": [_metric_doc(d) for d in model.observation_metrics],
        },
    }
    if model.meta:
        doc["meta"] = model.meta
    return doc


def dumps_model(model: SystemModel) -> str:
    """Canonical text: sorted keys, compact separators, integers kept exact."""
    return json.dumps(model_document(model), sort_keys=True, separators=(",", ":"), allow_nan=False)


def save_model(model: SystemModel, path) -> None:
    Path(path).write_text(dumps_model(model) + "\n")


def _need(doc, key, where="model"):
    if not isinstance(doc, dict) or key not in doc:
        raise ModelFormatError(f"{where}: missing required field '{key}'")
    return doc[key]


def _parse_space(doc, where):
    labels = _need(doc, "labels", where)
    if not isinstance(labels, list):
        raise ModelFormatError(f"{where}.labels: expected a list")
    try:
        return FiniteSpace(tuple(labels), doc.get("coords"))
    except MetricError as exc:
        raise ModelFormatError(f"{where}: {exc}") from None


def _parse_metric(doc, where):
    if not isinstance(doc, dict):
        raise ModelFormatError(f"{where}: expected an object with 'dense' or 'product'")
    try:
        if "product" in doc:
            return ProductMetric([_parse_metric(f, f"{where}.product[{k}]")
                                  for k, f in enumerate(doc["product"])])
        return DenseMetric(np.array(_need(doc, "dense", where)))
    except (MetricError, ValueError, TypeError) as exc:
        if isinstance(exc, ModelFormatError):
            raise
        raise ModelFormatError(f"{where}: {exc}") from None


def _parse_table(value, where, dtype, ndim):
    try:
        a = np.array(value, dtype=dtype)
    except (ValueError, TypeError) as exc:
        raise ModelFormatError(f"{where}: ragged or non-numeric table ({exc})") from None
    if a.ndim != ndim:
        raise ModelFormatError(f"{where}: expected a {ndim}-d table, got {a.ndim}-d")
    return a


def _dedupe(tables):
    # equal per-step tables become one object, so caches keyed on the
    # table identity (transition indices, Lipschitz constants) hit
    seen = {}
    out = []
    for a in tables:
        key = (a.shape, a.dtype.str, a.tobytes())
        out.append(seen.setdefault(key, a))
    return tuple(out)


def _parse_metrics(docs, where):
    seen = {}
    out = []
    for t, d in enumerate(docs):
        key = json.dumps(d, sort_keys=True)
        if key not in seen:
            seen[key] = _parse_metric(d, f"{where}[{t}]")
        out.append(seen[key])
    return tuple(out)


def model_from_document(doc: dict, check: bool = True) -> SystemModel:
    if not isinstance(doc, dict):
        raise ModelFormatError("model: top level must be an object")
    if doc.get("format", FORMAT_NAME) != FORMAT_NAME:
        raise ModelFormatError(f"model: unknown format {doc.get('format')!r}")
    T = _need(doc, "horizon")
    if not isinstance(T, int):
        raise ModelFormatError("horizon: expected an integer")
    spaces = _need(doc, "spaces")
    parsed = {}
    for kind in ("state", "action", "disturbance", "noise", "observation"):
        lst = _need(spaces, kind, "spaces")
        if not isinstance(lst, list):
            raise ModelFormatError(f"spaces.{kind}: expected a per-step list")
        parsed[kind] = tuple(_parse_space(s, f"spaces.{kind}[{t}]") for t, s in enumerate(lst))

    dyn = _need(doc, "dynamics")
    obs = _need(doc, "observation")
    if not isinstance(dyn, list) or not isinstance(obs, list):
        raise ModelFormatError("dynamics/observation: expected per-step lists")
    dynamics = _dedupe(_parse_table(f, f"dynamics[{t}]", np.int64, 3) for t, f in enumerate(dyn))
    observation = _dedupe(_parse_table(h, f"observation[{t}]", np.int64, 2) for t, h in enumerate(obs))
    cT = _parse_table(_need(doc, "terminal_cost"), "terminal_cost", np.float64, 2)
    sc = doc.get("step_costs")
    step_costs = None if sc is None else tuple(
        _parse_table(c, f"step_costs[{t}]", np.float64, 2) for t, c in enumerate(sc))
    init = _need(doc, "initial_states")
    if not isinstance(init, list) or not all(isinstance(x, int) for x in init):
        raise ModelFormatError("initial_states: expected a list of integers")
    iobs = doc.get("initial_observations")
    metrics = _need(doc, "metrics")
    sm = _parse_metrics(_need(metrics, "state", "metrics"), "metrics.state")
    om = _parse_metrics(_need(metrics, "observation", "metrics"), "metrics.observation")
    model = SystemModel(
        horizon=T,
        state_spaces=parsed["state"],
        action_spaces=parsed["action"],
        disturbance_spaces=parsed["disturbance"],
        noise_spaces=parsed["noise"],
        observation_spaces=parsed["observation"],
        dynamics=dynamics,
        observation=observation,
        terminal_cost=cT,
        step_costs=step_costs,
        initial_states=tuple(init),
        initial_observations=None if iobs is None else tuple(iobs),
        state_metrics=sm,
        observation_metrics=om,
        meta=doc.get("meta") or {},
    )
    if check:
        problems = validate(model)
        if problems:
            raise ModelValidationError(problems)
    return model


def loads_model(text: str, check: bool = True) -> SystemModel:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    return model_from_document(doc, check=check)


def load_model(path, check: bool = True) -> SystemModel:
    return loads_model(Path(path).read_text(), check=check)


def simple_model(
    horizon: int,
    dynamics: Sequence,
    observation: Sequence,
    terminal_cost,
    initial_states: Sequence[int],
    n_states: Optional[Sequence[int]] = None,
    n_observations: Optional[Sequence[int]] = None,
    step_costs: Optional[Sequence] = None,
    state_metric: Optional[MetricTable] = None,
    observation_metric: Optional[MetricTable] = None,
    initial_observations: Optional[Sequence[int]] = None,
) -> SystemModel:
    """Build a model from bare tables with index-labelled spaces.

    Space sizes are read off the table shapes. Without explicit metrics,
    states and observations sit on a line at their index.
    """
    from .ranges import line_metric

    dynamics = [np.asarray(f) for f in dynamics]
    observation = [np.asarray(h) for h in observation]
    cT = np.asarray(terminal_cost, dtype=np.float64)
    T = horizon
    if n_states is None:
        n_states = [h.shape[0] for h in observation]
    if n_observations is None:
        n_observations = [int(h.max()) + 1 for h in observation]
    nu = [f.shape[1] for f in dynamics] + [cT.shape[1]]
    nw = [f.shape[2] for f in dynamics] + [1]
    nn = [h.shape[1] for h in observation]

    def metrics(sizes, given):
        if given is not None:
            return tuple(given for _ in sizes)
        return tuple(line_metric(np.arange(n)) for n in sizes)

    return SystemModel(
        horizon=T,
        state_spaces=tuple(FiniteSpace.range(n, "x") for n in n_states),
        action_spaces=tuple(FiniteSpace.range(n, "u") for n in nu),
        disturbance_spaces=tuple(FiniteSpace.range(n, "w") for n in nw),
        noise_spaces=tuple(FiniteSpace.range(n, "n") for n in nn),
        observation_spaces=tuple(FiniteSpace.range(n, "y") for n in n_observations),
        dynamics=tuple(dynamics),
        observation=tuple(observation),
        terminal_cost=cT,
        step_costs=None if step_costs is None else tuple(np.asarray(c, dtype=np.float64) for c in step_costs),
        initial_states=point_set(initial_states),
        initial_observations=None if initial_observations is None else tuple(initial_observations),
        state_metrics=metrics(n_states, state_metric),
        observation_metrics=metrics(n_observations, observation_metric),
    )
