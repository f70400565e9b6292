import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from searchlight.grid import (FREE, LANE, CellBelief, DomainError, EnvAlphabet, MotionModel,
                              ScenarioGrid, enumerate_feasible_paths, path_cost, uniform_counts)


def flat_grid(n_rows, n_cols, m=3):
    cell = CellBelief(np.full(m, 1.0 / m), uniform_counts(2))
    return ScenarioGrid(n_rows, n_cols, (cell,) * (n_rows * n_cols))


def test_cell_belief_rejects_unnormalized():
    with pytest.raises(DomainError):
        CellBelief([0.5, 0.4], [0.5, 0.5])
    with pytest.raises(DomainError):
        CellBelief([1.2, -0.2], [1.0])


def test_env_alphabet_unique_labels():
    assert len(EnvAlphabet(("w1", "w2"))) == 2
    with pytest.raises(DomainError):
        EnvAlphabet(("w1", "w1"))


def test_grid_shape_checks():
    with pytest.raises(DomainError):
        ScenarioGrid(2, 2, (CellBelief([1.0], [1.0]),) * 3)
    g = flat_grid(3, 4)
    assert g.size == 12 and g.rc(7) == (1, 3) and g.index(2, 1) == 9
    assert g.row_cells(1) == [4, 5, 6, 7]


def test_zero_budget_only_empty_path():
    g = flat_grid(2, 2)
    assert list(enumerate_feasible_paths(g, MotionModel(), 0)) == [()]


def test_single_row_budget_two():
    g = flat_grid(1, 3)
    paths = set(enumerate_feasible_paths(g, MotionModel(LANE, max_visits=1), 2))
    assert paths == {(), (0,), (0, 1)}


def test_lane_two_rows_cost():
    # row 0 (2 cells) + one-row change with turn penalty 2 + row 1 (2 cells)
    g = flat_grid(2, 2)
    assert path_cost(g, (0, 1, 3, 2), MotionModel(LANE, turn_penalty=2)) == 7


def test_cost_counts_cells():
    g = flat_grid(1, 5)
    assert path_cost(g, (), MotionModel()) == 0
    assert path_cost(g, (0, 1, 2, 3, 4), MotionModel()) == 5


def test_repeated_row_passes_pay_every_transition():
    g = flat_grid(1, 3)
    m = MotionModel(LANE, turn_penalty=2)
    # sweep right, turn in place (|0| rows + 2), sweep back
    assert path_cost(g, (0, 1, 2, 2, 1, 0), m) == 6 + 2


def test_lane_rejects_mid_row_exit():
    g = flat_grid(2, 3)
    with pytest.raises(DomainError):
        path_cost(g, (0, 1, 4), MotionModel(LANE))


def test_free_mode_adjacency():
    g = flat_grid(2, 2)
    m = MotionModel(FREE)
    assert path_cost(g, (0, 1, 3), m) == 3
    with pytest.raises(DomainError):
        path_cost(g, (0, 3), m)


def _brute_force_walks(n_rows, n_cols, budget, max_visits):
    def nbrs(c):
        r, k = divmod(c, n_cols)
        for dr, dk in ((-1, 0), (1, 0), (0, -1), (0, 1)):
            if 0 <= r + dr < n_rows and 0 <= k + dk < n_cols:
                yield (r + dr) * n_cols + k + dk

    out = {()}
    frontier = [(0,)]
    while frontier:
        p = frontier.pop()
        if p.count(p[-1]) > max_visits:
            continue
        out.add(p)
        if len(p) < budget:
            frontier.extend(p + (n,) for n in nbrs(p[-1]))
    return out


def test_free_enumeration_matches_graph_walk():
    g = flat_grid(3, 3)
    m = MotionModel(FREE, max_visits=3)
    got = list(enumerate_feasible_paths(g, m, 4))
    assert len(got) == len(set(got))
    assert set(got) == _brute_force_walks(3, 3, 4, 3)


def test_enumerated_paths_within_budget():
    g = flat_grid(3, 3)
    m = MotionModel(LANE, max_visits=2)
    for p in enumerate_feasible_paths(g, m, 9):
        assert path_cost(g, p, m) <= 9
        if p:
            assert max(np.bincount(p)) <= 2


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**6), st.sampled_from([LANE, FREE]))
def test_cost_monotone_under_extension(seed, mode):
    rng = np.random.default_rng(seed)
    g = flat_grid(3, 3)
    m = MotionModel(mode, max_visits=2)
    paths = list(enumerate_feasible_paths(g, m, 8))
    p = paths[rng.integers(len(paths))]
    prefix = p[: rng.integers(len(p) + 1)]
    assert path_cost(g, prefix, m) <= path_cost(g, p, m)
