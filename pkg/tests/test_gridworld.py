import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from minimax_is.approx import uniform_scheme
from minimax_is.exact import initial_range, root_observations
from minimax_is.gridworld import (
    DEFAULT_OBSTACLES,
    MOVES,
    GridworldConfig,
    build_gridworld,
    gridworld_cells,
    split_state,
)
from minimax_is.model import validate
from minimax_is.ranges import MetricError, grid_cells

from oracles import bfs_distances


def check_structure(cfg):
    m = build_gridworld(cfg)
    assert validate(m) == []
    cells = gridworld_cells(m)
    F = len(cells)
    free = set(cells)
    _, dist = bfs_distances(cfg.width, cfg.height, cfg.obstacles)
    for x in range(F * F):
        a, t = split_state(m, x)
        assert m.terminal_cost[x, 0] == dist[a][t]
        for u, mu in enumerate(MOVES):
            for w, mw in enumerate(MOVES):
                a2, t2 = split_state(m, int(m.dynamics[0][x, u, w]))
                want_a = (a[0] + mu[0], a[1] + mu[1])
                want_t = (t[0] + mw[0], t[1] + mw[1])
                assert a2 == (want_a if want_a in free else a)
                assert t2 == (want_t if want_t in free else t)
                assert a2 in free and t2 in free
    return m


def test_default_layout():
    cfg = GridworldConfig()
    m = build_gridworld(cfg)
    assert len(gridworld_cells(m)) == 81 - len(DEFAULT_OBSTACLES)
    assert m.n_actions(0) == 5
    assert m.dynamics[0].shape[2] == 5 and m.observation[0].shape[1] == 5
    assert m.horizon == 6
    assert validate(m) == []


def test_dynamics_and_cost_on_small_grids():
    check_structure(GridworldConfig(width=3, height=3, obstacles=(), agent_start=(-1, -1),
                                    target_observation=(1, 1), horizon=1))
    check_structure(GridworldConfig(width=4, height=3, obstacles=((0, 0),), agent_start=(-2, -1),
                                    target_observation=(1, 1), horizon=1))


def test_single_cell_grid():
    m = build_gridworld(GridworldConfig(width=1, height=1, obstacles=(), agent_start=(0, 0),
                                        target_observation=(0, 0), horizon=0))
    assert m.n_states(0) == 1
    assert m.terminal_cost.max() == 0


def test_blocked_move_leaves_position_unchanged():
    m = build_gridworld(GridworldConfig(width=3, height=3, obstacles=(), agent_start=(-1, 1),
                                        target_observation=(-1, 1), horizon=1))
    cells = gridworld_cells(m)
    F = len(cells)
    x = cells.index((-1, 1)) * F + cells.index((-1, 1))
    left = MOVES.index((-1, 0))
    assert split_state(m, int(m.dynamics[0][x, left, left])) == ((-1, 1), (-1, 1))


def test_initial_range_is_cells_one_move_from_y0():
    m = build_gridworld(GridworldConfig())
    cells = gridworld_cells(m)
    F = len(cells)
    free = set(cells)
    (y0,) = root_observations(m)
    ty = cells[y0 % F]
    want = {c for c in free if abs(c[0] - ty[0]) + abs(c[1] - ty[1]) <= 1}
    got = {split_state(m, x)[1] for x in initial_range(m, y0)}
    assert got == want
    assert {split_state(m, x)[0] for x in initial_range(m, y0)} == {(-2, -3)}


def test_invalid_configs():
    with pytest.raises(MetricError, match="obstacle"):
        build_gridworld(GridworldConfig(agent_start=DEFAULT_OBSTACLES[0]))
    with pytest.raises(MetricError):
        build_gridworld(GridworldConfig(width=3, height=1, obstacles=((0, 0),), agent_start=(-1, 0),
                                        target_observation=(1, 0), horizon=1))
    with pytest.raises(MetricError, match="outside"):
        build_gridworld(GridworldConfig(width=3, height=3, obstacles=(), agent_start=(5, 5),
                                        target_observation=(0, 0)))


def test_config_roundtrip():
    cfg = GridworldConfig(width=5, height=4, obstacles=((0, 0),), horizon=2,
                          agent_start=(-2, -2), target_observation=(1, 1))
    assert GridworldConfig.from_dict(cfg.to_dict()) == cfg


@settings(max_examples=15, deadline=None)
@given(st.data())
def test_any_connected_obstacle_set(data):
    cells = grid_cells(4, 4)
    start, target = (-2, -2), (1, 1)
    obstacles = data.draw(st.lists(st.sampled_from([c for c in cells if c not in (start, target)]),
                                   max_size=5, unique=True))
    free, dist = bfs_distances(4, 4, obstacles)
    if not all(len(dist[c]) == len(free) for c in free):
        return
    cfg = GridworldConfig(width=4, height=4, obstacles=tuple(obstacles), agent_start=start,
                          target_observation=target, horizon=1)
    m = check_structure(cfg)
    q = uniform_scheme(m, 1)
    for step in q.steps:
        d = m.state_metrics[0]
        assert max(d(x, int(step.mu[x])) for x in range(m.n_states(0))) <= 1
        assert all(int(step.mu[r]) == r for r in step.representatives)
        for r, ball in step.balls.items():
            assert all(d(r, x) <= 1 for x in ball)
            assert split_state(m, r)[0] == split_state(m, ball[0])[0]


def test_terminal_cost_symmetric_and_zero_on_diagonal():
    m = build_gridworld(GridworldConfig())
    F = len(gridworld_cells(m))
    c = m.terminal_cost[:, 0].reshape(F, F)
    assert np.array_equal(c, c.T)
    assert np.all((c == 0) == np.eye(F, dtype=bool))
