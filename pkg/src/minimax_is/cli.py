"""Command-line front end: ``minimax-is {gridworld,solve,verify,simulate}``.

Exit codes: 0 success, 1 a checked assertion failed, 2 usage or input
error, 3 a solver ran out of its capacity budget.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

from .approx import (
    MODES,
    VARIANTS,
    ApproxSolution,
    build_quantizer,
    check_value_bounds,
    make_construction,
    measured_bounds,
    solve_approx_dp,
    theoretical_bounds,
    uniform_scheme,
)
from .exact import (
    CapacityError,
    InfeasibleObservationError,
    check_theorem1,
    encode_key,
    solution_document,
    solve_infostate_dp,
    solve_memory_dp,
    verify_information_state,
)
from .gridworld import DEFAULT_OBSTACLES, GridworldConfig, build_gridworld
from .instances import seeded_model
from .model import ModelFormatError, ModelValidationError, SystemModel, load_model, save_model
from .ranges import MetricError, free_cells, grid_cells, shortest_path_metric
from .rollout import (
    CSV_COLUMNS,
    TablePolicy,
    compare_policies,
    comparison_csv,
    controller_for,
    evaluate_policy_worstcase,
)

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_CAPACITY = 0, 1, 2, 3
THREADS_ENV = "MINIMAX_IS_THREADS"
POLICY_FORMAT = "minimax-is/policy"


class UsageError(Exception):
    pass


@dataclass
class RunReport:
    command: str
    model_digest: str
    threads: int
    timings: dict = field(default_factory=dict)
    values: dict = field(default_factory=dict)
    ledger: dict = field(default_factory=dict)
    outputs: list = field(default_factory=list)

    def to_dict(self):
        return {"command": self.command, "model": self.model_digest, "threads": self.threads,
                "seconds": self.timings, "values": self.values, "ledger": self.ledger,
                "outputs": self.outputs}


def _dump(obj, path):
    Path(path).write_text(json.dumps(obj, sort_keys=True, indent=1) + "\n")


def _cell(text):
    try:
        x, y = (int(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a cell 'x,y', got {text!r}") from None
    return (x, y)


def _cells(text):
    if text.strip().lower() in ("", "none"):
        return ()
    return tuple(_cell(c) for c in text.split(";") if c.strip())


def table(rows, headers) -> str:
    """Aligned plain-text rendering of rows."""
    cols = [list(map(str, headers))] + [[str(v) for v in r] for r in rows]
    widths = [max(len(r[k]) for r in cols) for k in range(len(headers))]
    return "\n".join("  ".join(v.rjust(w) for v, w in zip(r, widths)) for r in cols)


def _fmt(v):
    if isinstance(v, float):
        return str(int(v)) if v.is_integer() else f"{v:.6g}"
    return str(v)


def resolve_threads(value) -> int:
    raw = value if value is not None else os.environ.get(THREADS_ENV, "1")
    try:
        n = int(raw)
    except (TypeError, ValueError):
        raise UsageError(f"thread count must be an integer, got {raw!r}") from None
    if n < 1:
        raise UsageError("thread count must be >= 1")
    return n


def _load(path) -> SystemModel:
    try:
        return load_model(path)
    except FileNotFoundError:
        raise UsageError(f"model file not found: {path}") from None
    except ModelValidationError as exc:
        raise UsageError(f"{path}: invalid model: {exc}") from None
    except ModelFormatError as exc:
        raise UsageError(f"{path}: {exc}") from None


def _quantizer(model, args):
    return uniform_scheme(model, args.gamma if args.gamma_list is None else args.gamma_list)


# --- gridworld -------------------------------------------------------------------

def cmd_gridworld(args) -> int:
    cfg = GridworldConfig(width=args.width, height=args.height,
                          obstacles=DEFAULT_OBSTACLES if args.obstacles is None else args.obstacles,
                          agent_start=args.agent_start, target_observation=args.target_obs,
                          horizon=args.horizon)
    try:
        model = build_gridworld(cfg)
    except MetricError as exc:
        raise UsageError(f"invalid gridworld: {exc}") from None
    save_model(model, args.out)
    cells = free_cells(cfg.width, cfg.height, cfg.obstacles)
    q = build_quantizer(shortest_path_metric(cfg.width, cfg.height, cfg.obstacles), args.gamma)
    dots = {cells[r] for r in q.representatives}
    blocked = set(cfg.obstacles)
    all_cells = grid_cells(cfg.width, cfg.height)
    xs = sorted({c[0] for c in all_cells})
    ys = sorted({c[1] for c in all_cells}, reverse=True)
    print(f"free cells: {len(cells)}  joint states: {len(cells) ** 2}  horizon: {cfg.horizon}")
    print(f"quantizer gamma={_fmt(float(args.gamma))}: {len(dots)} representative cells "
          f"(covering radius {_fmt(q.radius)})")
    print(" ".join(f"({x},{y})" for x, y in sorted(dots)))
    for y in ys:
        row = []
        for x in xs:
            c = (x, y)
            row.append("#" if c in blocked else "A" if c == cfg.agent_start
                       else "Y" if c == cfg.target_observation else "o" if c in dots else ".")
        print(" ".join(row))
    print(f"model: {args.out}  sha256: {model.digest()}")
    return EXIT_OK


# --- solve -----------------------------------------------------------------------

def _policy_document(model, sol, q=None):
    doc = {"format": POLICY_FORMAT, "kind": sol.method, "model": model.digest(),
           "value": _num(sol.worst_value),
           "roots": {str(y): encode_key(k) for y, k in sorted(sol.roots.items())},
           "steps": []}
    if isinstance(sol, ApproxSolution):
        doc["quantizer"] = {"gamma": [_num(g) for g in q.gammas],
                            "variant": sol.construction.name, "mode": sol.construction.mode}
    for t in range(sol.horizon + 1):
        doc["steps"].append({encode_key(k): a for k, a in sorted(
            sol.policy[t].items(), key=lambda kv: encode_key(kv[0]))})
    return doc


def _num(v):
    f = float(v)
    return int(f) if f.is_integer() else f


def cmd_solve(args) -> int:
    model = _load(args.model)
    rep = RunReport("solve", model.digest(), resolve_threads(args.threads))
    start = time.perf_counter()
    q = None
    if args.method == "memory":
        sol = solve_memory_dp(model, budget=args.budget)
    elif args.method == "infostate":
        sol = solve_infostate_dp(model, budget=args.budget)
    else:
        q = _quantizer(model, args)
        sol = solve_approx_dp(model, q, args.variant, args.mode, budget=args.budget)
    rep.timings["solve"] = time.perf_counter() - start
    rep.values["V_0" if args.method != "approx" else "Vhat_0"] = _num(sol.worst_value)
    rep.values["nodes"] = sol.n_nodes()
    if args.out:
        _dump(solution_document(sol), args.out)
        rep.outputs.append(args.out)
    if args.policy_out:
        _dump(_policy_document(model, sol, q), args.policy_out)
        rep.outputs.append(args.policy_out)
    if args.method == "approx" and args.ledger_out:
        t0 = time.perf_counter()
        led, _ = measured_bounds(model, q, args.variant, args.mode, solution=sol)
        rep.timings["ledger"] = time.perf_counter() - t0
        rep.ledger = {"alpha_0": led.alpha0, "eps_T": led.eps_T, "max_delta": max(led.deltas, default=0.0)}
        _dump(led.to_dict(), args.ledger_out)
        rep.outputs.append(args.ledger_out)
    print(table([[args.method, _fmt(float(sol.worst_value)), f"{rep.timings['solve']:.3f}",
                  sum(sol.n_nodes())]], ["method", "Vhat_0" if args.method == "approx" else "V_0",
                                         "seconds", "nodes"]))
    if rep.ledger:
        print(table([[_fmt(rep.ledger["alpha_0"]), _fmt(rep.ledger["eps_T"]), _fmt(rep.ledger["max_delta"])]],
                    ["alpha_0", "eps_T", "max_delta"]))
    if args.report:
        _dump(rep.to_dict(), args.report)
    return EXIT_OK


# --- verify ----------------------------------------------------------------------

def _instances(args):
    if args.model:
        yield args.model, _load(args.model)
        return
    perfect = args.variant == "perfectly-observed"
    for i in range(args.random):
        yield f"seed={args.seed + i}", seeded_model(args.seed + i, perfect=perfect)


def _verify_one(model, args):
    suite = args.suite
    if suite == "theorem1":
        r = check_theorem1(model)
        return r.ok, r.to_dict()
    if suite == "def1":
        r = verify_information_state(model, lambda node, P: P)
        return r.ok, r.to_dict()
    q = _quantizer(model, args)
    sol = solve_approx_dp(model, q, args.variant, args.mode)
    led, _ = measured_bounds(model, q, args.variant, args.mode, solution=sol, over=args.over)
    if suite == "def2":
        mem = solve_memory_dp(model)
        vb = check_value_bounds(model, mem, sol, led)
        ev = evaluate_policy_worstcase(model, controller_for(sol))
        exact = solve_infostate_dp(model)
        rows = []
        for y0 in sorted(exact.roots):
            gap = abs(exact.value(y0) - ev.value(y0))
            rows.append({"y0": y0, "V_0": exact.value(y0), "Lambda_0": ev.value(y0),
                         "bound": 2 * led.alpha0, "ok": gap <= 2 * led.alpha0 + 1e-9})
        ok = vb.ok and all(r["ok"] for r in rows)
        return ok, {"ledger": led.to_dict(), "value_bound": {"checked": vb.checked, "ok": vb.ok,
                                                             "violations": [list(map(str, v)) for v in vb.violations[:50]]},
                    "policy_bound": rows}
    th = theoretical_bounds(model, q, args.variant, args.mode, solution=sol, L_vhat=led.L_vhat)
    rows = [{"quantity": "eps_T", "measured": led.eps_T, "bound": th.eps_T,
             "ok": led.eps_T <= th.eps_T + 1e-9, "witness": led.witnesses[-1]}]
    for t, (a, b) in enumerate(zip(led.deltas, th.deltas)):
        rows.append({"quantity": f"delta_{t}", "measured": a, "bound": b, "ok": a <= b + 1e-9,
                     "witness": led.witnesses[t]})
    return all(r["ok"] for r in rows), {"rows": rows, "constants": th.constants}


def cmd_verify(args) -> int:
    if not args.model and not args.random:
        raise UsageError("verify needs a model file or --random N")
    threads = resolve_threads(args.threads)
    results = []
    all_ok = True
    start = time.perf_counter()
    for name, model in _instances(args):
        ok, detail = _verify_one(model, args)
        all_ok &= ok
        results.append({"instance": name, "model": model.digest(), "ok": ok, "detail": detail})
    doc = {"suite": args.suite, "ok": all_ok, "instances": len(results), "threads": threads,
           "failed": [r["instance"] for r in results if not r["ok"]], "results": results}
    text = json.dumps(doc, sort_keys=True, indent=1, default=_num)
    if args.report:
        Path(args.report).write_text(text + "\n")
    else:
        print(text)
    print(f"{args.suite}: {'pass' if all_ok else 'FAIL'} ({len(results) - len(doc['failed'])}"
          f"/{len(results)} instances, {time.perf_counter() - start:.2f} s)", file=sys.stderr)
    return EXIT_OK if all_ok else EXIT_FAIL


# --- simulate --------------------------------------------------------------------

def load_policy(model: SystemModel, path) -> tuple:
    try:
        doc = json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise UsageError(f"policy file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path}: line {exc.lineno}: {exc.msg}") from None
    if doc.get("format") != POLICY_FORMAT:
        raise UsageError(f"{path}: not a policy file")
    if doc.get("model") != model.digest():
        raise UsageError(f"{path}: policy was computed for a different model")
    kind = doc["kind"]
    con = None
    if kind == "approx":
        qd = doc["quantizer"]
        q = uniform_scheme(model, qd["gamma"])
        con = make_construction(model, q, qd["variant"], qd["mode"])
        con.prepare({}, 5_000_000)
    return TablePolicy(model, doc["steps"], kind, con), doc


def cmd_simulate(args) -> int:
    model = _load(args.model)
    rep = RunReport("simulate", model.digest(), resolve_threads(args.threads))
    pa, da = load_policy(model, args.policy_a)
    pb, db = load_policy(model, args.policy_b)
    if args.runs < 0:
        raise UsageError("--runs must be >= 0")
    start = time.perf_counter()
    cmp = compare_policies(model, pa, pb, runs=args.runs, seed=args.seed)
    rep.timings["simulate"] = time.perf_counter() - start
    csv_text = comparison_csv(cmp)
    out = sys.stdout
    if args.csv:
        Path(args.csv).write_text(csv_text)
        rep.outputs.append(args.csv)
    else:
        sys.stdout.write(csv_text)
        out = sys.stderr
    st = cmp.stats
    rows = [["a", da["kind"], _fmt(float(da["value"]))], ["b", db["kind"], _fmt(float(db["value"]))]]
    for r, path in zip(rows, (args.report_a, args.report_b)):
        secs = ""
        if path:
            secs = f"{json.loads(Path(path).read_text())['seconds'].get('solve', 0.0):.3f}"
        r.append(secs)
    print(table(rows, ["policy", "kind", "worst-case value", "solve seconds"]), file=out)
    if st:
        print(f"runs={st['runs']} min={_fmt(st['min'])} max={_fmt(st['max'])} "
              f"mode={_fmt(float(st['mode']))} mean={st['mean']:.6g}", file=out)
        print(table(st["histogram"], ["diff", "count"]), file=out)
    else:
        print("runs=0", file=out)
    if args.histogram:
        Path(args.histogram).write_text("diff,count\n" + "".join(f"{d},{c}\n" for d, c in st.get("histogram", [])))
    status = EXIT_OK
    if args.ledger:
        alpha0 = json.loads(Path(args.ledger).read_text())["alpha"][0]
        worst = max((abs(d) for d in cmp.diffs), default=0.0)
        ok = worst <= 2 * alpha0 + 1e-9
        print(f"max |diff| = {_fmt(float(worst))} vs 2*alpha_0 = {_fmt(float(2 * alpha0))}: "
              f"{'pass' if ok else 'FAIL'}", file=out)
        status = EXIT_OK if ok else EXIT_FAIL
    return status


# --- entry point -----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="minimax-is", description=__doc__,
                                formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--threads", type=int, default=None,
                        help=f"worker cap (default ${THREADS_ENV} or 1)")

    def quant(sp):
        sp.add_argument("--gamma", type=float, default=1.0, help="quantization radius for every step")
        sp.add_argument("--gamma-list", type=lambda s: [float(v) for v in s.split(",")], default=None,
                        help="per-step radii g0,g1,...,gT (overrides --gamma)")
        sp.add_argument("--variant", choices=VARIANTS, default="partially-observed")
        sp.add_argument("--mode", choices=MODES, default="recursive",
                        help="recursive: propagate the approximate state; direct: quantize the exact range")

    g = sub.add_parser("gridworld", help="write the pursuit gridworld model")
    g.add_argument("--width", type=int, default=9)
    g.add_argument("--height", type=int, default=9)
    g.add_argument("--obstacles", type=_cells, default=None,
                   help="'x,y;x,y;...' or 'none' (default: built-in layout)")
    g.add_argument("--agent-start", type=_cell, default=(-2, -3))
    g.add_argument("--target-obs", type=_cell, default=(-4, 3))
    g.add_argument("--horizon", type=int, default=6)
    g.add_argument("--gamma", type=float, default=1.0, help="radius of the printed target quantizer")
    g.add_argument("-o", "--out", required=True)
    common(g)
    g.set_defaults(func=cmd_gridworld)

    s = sub.add_parser("solve", help="solve a model")
    s.add_argument("model")
    s.add_argument("--method", choices=("memory", "infostate", "approx"), default="infostate")
    quant(s)
    s.add_argument("--budget", type=int, default=5_000_000)
    s.add_argument("--out", help="solution dump (JSON)")
    s.add_argument("--policy-out", help="policy dump for 'simulate' (JSON)")
    s.add_argument("--ledger-out", help="measured error ledger (approx only, JSON)")
    s.add_argument("--report", help="run report (JSON)")
    common(s)
    s.set_defaults(func=cmd_solve)

    v = sub.add_parser("verify", help="check the exactness and error-bound claims")
    v.add_argument("model", nargs="?")
    v.add_argument("--suite", choices=("theorem1", "def1", "def2", "bounds"), required=True)
    v.add_argument("--random", type=int, default=0, help="check N seeded random instances instead of a model")
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--over", choices=("pairs", "memories"), default="pairs",
                   help="quantifier of the measured ledger")
    quant(v)
    v.add_argument("--report", help="write the JSON report here instead of stdout")
    common(v)
    v.set_defaults(func=cmd_verify)

    m = sub.add_parser("simulate", help="paired random simulation of two policies",
                       epilog="CSV columns: " + ",".join(CSV_COLUMNS) + " (diff = cost_a - cost_b); "
                              "histogram CSV columns: diff,count")
    m.add_argument("model")
    m.add_argument("--policy-a", required=True)
    m.add_argument("--policy-b", required=True)
    m.add_argument("--runs", type=int, default=1000)
    m.add_argument("--seed", type=int, default=0)
    m.add_argument("--csv", help="per-run CSV (default: stdout)")
    m.add_argument("--histogram", help="difference histogram CSV")
    m.add_argument("--ledger", help="measured ledger; checks every |diff| <= 2 alpha_0")
    m.add_argument("--report-a", help="solve report of policy a, for its runtime")
    m.add_argument("--report-b", help="solve report of policy b, for its runtime")
    common(m)
    m.set_defaults(func=cmd_simulate)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"minimax-is: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (InfeasibleObservationError, ValueError) as exc:
        print(f"minimax-is: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except CapacityError as exc:
        print(f"minimax-is: capacity: {exc}; reachable nodes per step: {list(exc.trace)}", file=sys.stderr)
        return EXIT_CAPACITY


if __name__ == "__main__":
    sys.exit(main())
