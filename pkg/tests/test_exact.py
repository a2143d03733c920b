import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from minimax_is.exact import (
    CapacityError,
    InfeasibleObservationError,
    Kernel,
    check_theorem1,
    feasible_observations,
    initial_range,
    range_update,
    root_observations,
    solution_document,
    solve_infostate_dp,
    solve_memory_dp,
    verify_information_state,
)
from minimax_is.gridworld import MOVES, GridworldConfig, build_gridworld
from minimax_is.instances import seeded_model, separating_counterexample, two_state_toy
from minimax_is.model import simple_model

from oracles import (
    conditional_range,
    game_tree_values,
    next_observations,
    strategy_enumeration_value,
)

seeds = st.integers(0, 10_000)


def test_initial_range_examples():
    perfect = seeded_model(2, perfect=True)
    for y0 in root_observations(perfect):
        assert initial_range(perfect, y0) == (y0,)
    toy = two_state_toy()
    assert initial_range(toy, 0) == (0, 1)
    with pytest.raises(InfeasibleObservationError):
        initial_range(simple_model(0, [], [np.array([[0], [0]])], np.zeros((2, 1)), [0, 1],
                                   n_observations=[2]), 1)


def test_range_update_examples():
    toy = two_state_toy()
    assert range_update(toy, (0,), 0, 0, 0) == (0, 1)
    assert feasible_observations(toy, (0,), 0, 0) == (0,)
    perfect = seeded_model(2, perfect=True, min_horizon=1)
    P = initial_range(perfect, root_observations(perfect)[0])
    reach = sorted({int(x) for x in perfect.dynamics[0][list(P), 0].ravel()})
    assert feasible_observations(perfect, P, 0, 0) == tuple(reach)
    for y in reach:
        assert range_update(perfect, P, 0, y, 0) == (y,)


@settings(max_examples=60, deadline=None)
@given(seeds, st.randoms(use_true_random=False))
def test_range_update_matches_trajectory_enumeration(seed, rnd):
    m = seeded_model(seed)
    k = Kernel(m)
    y0 = rnd.choice(root_observations(m))
    ys, us = (y0,), ()
    P = initial_range(m, y0, k)
    assert P == conditional_range(m, ys, us)
    for t in range(m.horizon):
        u = rnd.randrange(m.n_actions(t))
        feas = feasible_observations(m, P, u, t, k)
        assert list(feas) == next_observations(m, ys, us, u)
        y = rnd.choice(feas)
        P2 = range_update(m, P, u, y, t, k)
        ys, us = ys + (y,), us + (u,)
        assert P2 == conditional_range(m, ys, us)
        # the update only keeps one-step successors
        assert set(P2) <= {int(x) for x in m.dynamics[t][list(P)].ravel()}
        assert range_update(m, P, u, m.n_observations(t + 1), t, k) == ()
        P = P2


def test_gridworld_one_step_update_matches_enumeration():
    m = build_gridworld(GridworldConfig(horizon=1))
    y0 = root_observations(m)[0]
    P0 = initial_range(m, y0)
    stay = MOVES.index((0, 0))
    for y in feasible_observations(m, P0, stay, 0)[:10]:
        assert range_update(m, P0, stay, y, 0) == conditional_range(m, (y0, y), (stay,))


def test_memory_dp_small_examples():
    m = simple_model(0, [], [np.zeros((2, 1), dtype=int)], np.array([[0, 1], [1, 0]]), [0, 1])
    sol = solve_memory_dp(m)
    assert sol.worst_value == 1
    assert sol.Q[0][sol.roots[0]] == (1.0, 1.0)
    perfect = simple_model(0, [], [np.arange(3)[:, None]], np.array([[4, 2], [1, 3], [0, 5]]), [0, 1, 2])
    sol = solve_memory_dp(perfect)
    for x in range(3):
        assert sol.value(x) == perfect.terminal_cost[x].min()


@settings(max_examples=60, deadline=None)
@given(seeds)
def test_memory_dp_matches_game_tree(seed):
    m = seeded_model(seed)
    sol = solve_memory_dp(m)
    oracle = game_tree_values(m)
    count = 0
    for t in range(m.horizon + 1):
        for node in sol.V[t]:
            V, Q = oracle[(node.observations, node.actions)]
            assert sol.V[t][node] == V
            assert sol.Q[t][node] == Q
            count += 1
    assert count == len(oracle)


@pytest.mark.parametrize("seed", range(12))
def test_memory_dp_matches_strategy_enumeration(seed):
    m = seeded_model(seed, max_states=3, max_actions=2, max_disturbances=2, max_noises=2,
                     max_observations=2, max_horizon=2)
    assert solve_memory_dp(m).worst_value == strategy_enumeration_value(m)


@settings(max_examples=100, deadline=None)
@given(seeds)
def test_theorem1_on_random_instances(seed):
    m = seeded_model(seed)
    rep = check_theorem1(m)
    assert rep.ok, rep.discrepancies[:3]
    assert rep.checked == sum(solve_memory_dp(m).n_nodes())


def test_theorem1_perfect_observation_uses_singletons():
    m = seeded_model(9, perfect=True)
    info = solve_infostate_dp(m)
    assert all(len(P) == 1 for level in info.V for P in level)
    assert check_theorem1(m, info=info).ok


@settings(max_examples=40, deadline=None)
@given(seeds)
def test_policy_attains_recorded_minimum(seed):
    m = seeded_model(seed)
    for sol in (solve_memory_dp(m), solve_infostate_dp(m)):
        for t in range(m.horizon + 1):
            for key, q in sol.Q[t].items():
                u = sol.policy[t][key]
                assert q[u] == sol.V[t][key] == min(q)
                assert all(q[v] > q[u] for v in range(u))


def test_deterministic_tables():
    m = seeded_model(77)
    a, b = solve_infostate_dp(m), solve_infostate_dp(m)
    assert solution_document(a) == solution_document(b)


def test_capacity_guard():
    m = seeded_model(4, min_horizon=3, min_states=3)
    with pytest.raises(CapacityError, match="info") as exc:
        solve_memory_dp(m, budget=3)
    assert exc.value.trace
    with pytest.raises(CapacityError):
        solve_infostate_dp(m, budget=1)


def test_solution_document_is_sorted():
    doc = solution_document(solve_memory_dp(seeded_model(12, min_horizon=2)))
    for step in doc["steps"]:
        enc = [r["encoding"] for r in step["nodes"]]
        assert enc == sorted(enc)


@settings(max_examples=40, deadline=None)
@given(seeds)
def test_conditional_range_and_memory_are_information_states(seed):
    m = seeded_model(seed)
    assert verify_information_state(m, lambda node, P: P).ok
    rep = verify_information_state(m, lambda node, P: node)
    assert rep.ok and rep.scope == "reachable memories"


def test_constant_map_fails_terminal_cost_property():
    m = separating_counterexample()
    rep = verify_information_state(m, lambda node, P: 0)
    assert not rep.terminal_cost_ok
    assert rep.terminal_witness is not None
    assert rep.to_dict()["terminal_cost"]["ok"] is False


def test_forgetting_the_first_observation_breaks_self_prediction():
    # the state never moves and is observed; a map that forgets y_0 but keeps
    # the range afterwards cannot predict its own successor
    f = np.array([[[0]], [[1]]])
    h = np.arange(2)[:, None]
    m = simple_model(1, [f], [h, h], np.array([[0], [1]]), [0, 1])
    rep = verify_information_state(m, lambda node, P: "start" if node.t == 0 else P)
    assert rep.terminal_cost_ok
    assert not rep.self_prediction_ok
    assert rep.prediction_witness[0] == 0
