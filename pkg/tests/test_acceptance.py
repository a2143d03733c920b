"""End-to-end acceptance checks, one test per criterion.

Each test prints a single ``criterion N: PASS|FAIL`` line (also collected
into the terminal summary). Run just this file with

    pytest tests/test_acceptance.py -v -s

or as a script: ``python3 tests/test_acceptance.py``.
"""

import time

import numpy as np
import pytest

from minimax_is.additive import augment_additive
from minimax_is.approx import (
    check_value_bounds,
    measured_bounds,
    solve_approx_dp,
    theoretical_bounds,
    uniform_scheme,
)
from minimax_is.exact import check_theorem1, solve_infostate_dp, solve_memory_dp
from minimax_is.gridworld import GridworldConfig, build_gridworld
from minimax_is.instances import seeded_model
from minimax_is.ranges import DenseMetric, hausdorff, lipschitz_constant, point_set
from minimax_is.rollout import ApproxController, RangePolicy, compare_policies, evaluate_policy_worstcase

from oracles import game_tree_root_value, hausdorff_literal, strategy_enumeration_value

TOL = 1e-9
RESULTS = []


def report(n, ok, detail, elapsed):
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'} ({elapsed:.2f} s) {detail}"
    RESULTS.append(line)
    print(line)
    return ok


# --- the 50 bound instances shared by criteria 2-4 --------------------------

def bound_cases():
    """Seeds 1000..1049, gamma alternating 1 and 2; every fifth instance is
    perfectly observed and uses the quantized-state variant."""
    for i in range(50):
        perfect = i % 5 == 4
        m = seeded_model(1000 + i, min_states=2, min_horizon=1, perfect=perfect)
        gamma = 1 + i % 2
        variant = "perfectly-observed" if perfect else "partially-observed"
        mode = "direct" if perfect else "recursive"
        yield i, m, uniform_scheme(m, gamma), variant, mode


_solved = {}


def solved_cases():
    if not _solved:
        for i, m, q, variant, mode in bound_cases():
            sol = solve_approx_dp(m, q, variant, mode)
            led, _ = measured_bounds(m, q, variant, mode, solution=sol, over="memories")
            _solved[i] = (m, q, variant, mode, sol, led)
    return _solved


# --- criteria -----------------------------------------------------------------

def criterion_1():
    start = time.perf_counter()
    checked, bad = 0, []
    for seed in range(100):
        rep = check_theorem1(seeded_model(seed))
        checked += rep.checked
        if not rep.ok:
            bad.append(seed)
    elapsed = time.perf_counter() - start
    ok = not bad and elapsed < 60
    return report(1, ok, f"memory DP == range DP on {checked} memories of 100 instances; "
                         f"mismatching seeds {bad}", elapsed)


def criterion_2():
    start = time.perf_counter()
    checked, bad = 0, []
    cases = solved_cases()
    for i, (m, q, variant, mode, sol, led) in cases.items():
        rep = check_value_bounds(m, solve_memory_dp(m), sol, led)
        checked += rep.checked
        bad += [(1000 + i,) + v for v in rep.violations]
    elapsed = time.perf_counter() - start
    ok = not bad and elapsed < 120
    return report(2, ok, f"|V - Vhat| <= alpha on {checked} memories of {len(cases)} instances; "
                         f"violations {bad[:3]}", elapsed)


def criterion_3():
    start = time.perf_counter()
    bad, worst, gaps = [], 0.0, 0
    for i, (m, q, variant, mode, sol, led) in solved_cases().items():
        exact = solve_infostate_dp(m)
        ev = evaluate_policy_worstcase(m, ApproxController(sol))
        for y0 in exact.roots:
            gap = abs(exact.value(y0) - ev.value(y0))
            worst = max(worst, gap)
            gaps += gap > 0
            if gap > 2 * led.alpha0 + TOL:
                bad.append((1000 + i, y0, gap, 2 * led.alpha0))
    elapsed = time.perf_counter() - start
    ok = not bad and elapsed < 120
    return report(3, ok, f"|V_0 - Lambda_0| <= 2 alpha_0 on 50 instances "
                         f"({gaps} roots with a nonzero gap, largest {worst:g}); violations {bad[:3]}", elapsed)


def criterion_4():
    start = time.perf_counter()
    bad = []
    n = 0
    for i, (m, q, variant, mode, sol, led) in solved_cases().items():
        th = theoretical_bounds(m, q, variant, mode, solution=sol, L_vhat=led.L_vhat)
        n += 1 + len(th.deltas)
        if led.eps_T > th.eps_T + TOL:
            bad.append((1000 + i, "eps_T", led.eps_T, th.eps_T))
        for t, (a, b) in enumerate(zip(led.deltas, th.deltas)):
            if a > b + TOL:
                bad.append((1000 + i, f"delta_{t}", a, b))
    elapsed = time.perf_counter() - start
    return report(4, not bad, f"measured <= formula for {n} ledger entries; violations {bad[:3]}", elapsed)


def _random_metric(rng):
    """Points in the integer plane under L1, or a line; always a metric."""
    n = int(rng.integers(1, 9))
    dim = int(rng.integers(1, 3))
    grid = np.array(np.meshgrid(*[np.arange(-6, 7)] * dim)).reshape(dim, -1).T
    pts = grid[rng.choice(len(grid), size=n, replace=False)]
    D = np.abs(pts[:, None, :] - pts[None, :, :]).sum(axis=2)
    return DenseMetric(D)


def _random_set(rng, n):
    return point_set(rng.integers(0, n, size=int(rng.integers(1, n + 1))).tolist())


def criterion_5(trials=10_000):
    start = time.perf_counter()
    rng = np.random.default_rng(5)
    fails = {"hausdorff": 0, "union": 0, "lipschitz": 0, "bounded": 0}
    for _ in range(trials):
        d = _random_metric(rng)
        n = d.size
        Dl = d.dense().tolist()
        A, B, C, E = (_random_set(rng, n) for _ in range(4))
        hab = hausdorff(A, B, d)
        ok = (hab == hausdorff_literal(A, B, Dl) and hab == hausdorff(B, A, d) and hausdorff(A, A, d) == 0
              and (hab == 0) == (A == B) and hausdorff(A, C, d) <= hab + hausdorff(B, C, d) + TOL)
        fails["hausdorff"] += not ok
        lhs = hausdorff(point_set(A + B), point_set(C + E), d)
        fails["union"] += bool(lhs > max(hausdorff(A, C, d), hausdorff(B, E, d)) + TOL)
    for _ in range(trials):
        d = _random_metric(rng)
        f = rng.integers(-20, 21, size=d.size)
        A, B = _random_set(rng, d.size), _random_set(rng, d.size)
        L = lipschitz_constant(f, d)
        fails["lipschitz"] += bool(abs(f[list(A)].max() - f[list(B)].max()) > L * hausdorff(A, B, d) + TOL)
    for _ in range(trials):
        k = int(rng.integers(1, 12))
        f, g = rng.integers(-50, 51, size=k), rng.integers(-50, 51, size=k)
        sup = np.abs(f - g).max()
        fails["bounded"] += bool(abs(f.max() - g.max()) > sup or abs(f.min() - g.min()) > sup)
    elapsed = time.perf_counter() - start
    ok = not any(fails.values()) and elapsed < 30
    return report(5, ok, f"{trials} trials each; failures {fails}", elapsed)


def additive_cases():
    for i in range(25):
        yield 2000 + i, seeded_model(2000 + i, step_costs=True, min_horizon=1, max_states=3, max_actions=2,
                                     max_disturbances=2, max_noises=2, max_observations=2, max_horizon=2)


def criterion_6():
    start = time.perf_counter()
    bad = []
    for seed, m in additive_cases():
        v = solve_infostate_dp(augment_additive(m)).worst_value
        want = strategy_enumeration_value(m, additive=True)
        if v != want:
            bad.append((seed, v, want))
    # the same on full-size instances against the history tree
    for seed in range(3000, 3025):
        m = seeded_model(seed, step_costs=True)
        v = solve_infostate_dp(augment_additive(m)).worst_value
        if v != game_tree_root_value(m, additive=True):
            bad.append((seed, v))
    elapsed = time.perf_counter() - start
    ok = not bad and elapsed < 60
    return report(6, ok, f"augmented DP == strategy enumeration on 25 instances "
                         f"(+25 vs history tree); mismatches {bad[:3]}", elapsed)


def _best_time(fn, repeats=3):
    best, out = None, None
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = fn()
        dt = time.perf_counter() - t0
        best = dt if best is None else min(best, dt)
    return best, out


def criterion_7():
    start = time.perf_counter()
    m = build_gridworld(GridworldConfig())  # 9x9, horizon 6
    variant = "gridworld-with-y0"
    t_exact, exact = _best_time(lambda: solve_infostate_dp(m))

    def approx():
        q = uniform_scheme(m, 1)
        return q, solve_approx_dp(m, q, variant)

    t_approx, (q, sol) = _best_time(approx)
    led, _ = measured_bounds(m, q, variant, solution=sol)
    a0 = led.alpha0
    gap = abs(exact.worst_value - sol.worst_value)
    cmp = compare_policies(m, ApproxController(sol), RangePolicy(exact), runs=1000, seed=0)
    d = cmp.diffs
    within = all(-2 * a0 - TOL <= x <= 2 * a0 + TOL for x in d)
    ok_a, ok_b = t_approx < t_exact, gap <= a0 + TOL
    ok = ok_a and ok_b and within and len(d) == 1000
    elapsed = time.perf_counter() - start
    return report(7, ok, f"(a) approx {t_approx:.3f} s vs exact {t_exact:.3f} s: {ok_a}; "
                         f"(b) |V_0 - Vhat_0| = {gap:g} <= alpha_0 = {a0:g}: {ok_b}; "
                         f"(c) 1000 paired diffs in [{min(d):g}, {max(d):g}] within +-{2 * a0:g}: {within}",
                  elapsed)


def criterion_8():
    start = time.perf_counter()
    bad = []
    models = [(s, seeded_model(s, min_horizon=1), False) for s in range(4000, 4020)]
    models += [(s, seeded_model(s, min_horizon=1, perfect=True), True) for s in range(4020, 4030)]
    models.append(("gridworld", build_gridworld(GridworldConfig(width=5, height=5, obstacles=((1, 1),),
                                                                agent_start=(-2, -2), target_observation=(2, 2),
                                                                horizon=2)), False))
    for name, m, perfect in models:
        exact = solve_infostate_dp(m)
        q = uniform_scheme(m, 0)
        runs = [("perfectly-observed", "direct")] if perfect else [
            ("partially-observed", "recursive"), ("partially-observed", "direct"), ("gridworld-with-y0", "recursive")]
        for variant, mode in runs:
            sol = solve_approx_dp(m, q, variant, mode)
            for t in range(m.horizon + 1):
                for table, ref in ((sol.V[t], exact.V[t]), (sol.Q[t], exact.Q[t]), (sol.policy[t], exact.policy[t])):
                    got = {s.members: v for s, v in table.items()}
                    if got != ref:
                        bad.append((name, variant, mode, t))
            led, _ = measured_bounds(m, q, variant, mode, solution=sol)
            th = theoretical_bounds(m, q, variant, mode, solution=sol)
            for ledger in (led, th):
                if ledger.eps_T != 0 or any(ledger.deltas) or any(ledger.alphas):
                    bad.append((name, variant, mode, ledger.provenance))
    elapsed = time.perf_counter() - start
    return report(8, not bad, f"gamma = 0 reproduces the range DP on {len(models)} models, "
                              f"all ledgers zero; mismatches {bad[:3]}", elapsed)


CRITERIA = [criterion_1, criterion_2, criterion_3, criterion_4, criterion_5, criterion_6, criterion_7,
            criterion_8]


@pytest.mark.parametrize("n", range(1, 9))
def test_criterion(n):
    assert CRITERIA[n - 1]()


if __name__ == "__main__":
    import sys

    results = [c() for c in CRITERIA]
    sys.exit(0 if all(results) else 1)
