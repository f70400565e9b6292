import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from searchlight.grid import CellBelief, DomainError, ScenarioGrid, uniform_counts
from searchlight.objective import (anticipated_eea, bayes_obj_estimate, eea_given_env,
                                   env_values, order_by_preference, search_path_value)
from searchlight.sensors import SearchSensorModel

from oracles import eea_bruteforce

U = uniform_counts(2)


def test_obj_estimate():
    assert bayes_obj_estimate([0, 1, 0]) == (1, 1.0)
    x, acc = bayes_obj_estimate(U)
    assert x == 0 and acc == pytest.approx(1 / 3)
    x, acc = bayes_obj_estimate([0.806, 0.161, 0.032])
    assert x == 0 and acc == pytest.approx(0.806)


def test_perfect_sensor_eea():
    s = SearchSensorModel((1.0,), (0.0,))
    assert eea_given_env(U, 0, s) == pytest.approx(1.0, abs=1e-15)


def test_eea_matches_enumeration(search_sensor):
    for j, (D, F) in enumerate(zip(search_sensor.detection, search_sensor.false_alarm)):
        for visits in (1, 2):
            ref = eea_bruteforce(U, D, F, search_sensor.z_max, visits)
            # the package renormalizes the truncated likelihood; the tail is below 1e-9
            assert eea_given_env(U, j, search_sensor, visits) == pytest.approx(ref, abs=1e-8)


def test_survey_environments_ordered(search_sensor):
    v = env_values(U, search_sensor)
    assert v[0] < v[1] < v[2]
    assert order_by_preference(U, search_sensor) == [0, 1, 2]


def test_swapped_sensor_order_inverts():
    s = SearchSensorModel((0.95, 0.8, 0.65), (0.05, 0.3, 0.4))
    assert order_by_preference(U, s) == [2, 1, 0]


def test_single_environment_order():
    assert order_by_preference(U, SearchSensorModel((0.7,), (0.2,))) == [0]


def test_tied_environments_rejected():
    with pytest.raises(DomainError):
        order_by_preference(U, SearchSensorModel((0.7, 0.7), (0.2, 0.2)))


def test_uninformative_sensor_gives_prior_max():
    # detection irrelevant when every cell count is certain to be 0 or the prior is flat
    s = SearchSensorModel((1e-12,), (0.3,))
    prior = [0.5, 0.3, 0.2]
    assert eea_given_env(prior, 0, s) == pytest.approx(0.5, abs=1e-9)


def test_anticipated_mixture(search_sensor):
    v = env_values(U, search_sensor)
    assert anticipated_eea(CellBelief([0, 1, 0], U), search_sensor) == pytest.approx(v[1])
    assert anticipated_eea(CellBelief([0.5, 0.5, 0], U), search_sensor) == pytest.approx(
        (v[0] + v[1]) / 2)
    a3 = anticipated_eea(CellBelief([0.4, 0.3, 0.3], U), search_sensor)
    assert a3 == pytest.approx(0.4 * v[0] + 0.3 * v[1] + 0.3 * v[2], abs=1e-15)
    assert a3 == pytest.approx(0.70676, abs=1e-4)


def test_more_visits_help(search_sensor):
    for j in range(3):
        assert eea_given_env(U, j, search_sensor, 2) >= eea_given_env(U, j, search_sensor, 1)


def test_path_value_structure(search_sensor):
    cells = (CellBelief([0.4, 0.3, 0.3], U), CellBelief([0.05, 0.05, 0.9], U),
             CellBelief([1, 0, 0], U))
    g = ScenarioGrid(1, 3, cells)
    assert search_path_value(g, (), search_sensor) == pytest.approx(1 / 27)
    one = search_path_value(g, (1,), search_sensor)
    assert one == pytest.approx(anticipated_eea(cells[1], search_sensor) / 9)
    both = search_path_value(g, (0, 1), search_sensor)
    assert both == pytest.approx(anticipated_eea(cells[0], search_sensor)
                                 * anticipated_eea(cells[1], search_sensor) / 3, rel=1e-12)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**6))
def test_information_never_hurts(seed):
    rng = np.random.default_rng(seed)
    s = SearchSensorModel(tuple(rng.uniform(0.05, 1, 3)), tuple(rng.uniform(0, 0.8, 3)))
    cell = CellBelief(rng.dirichlet(np.ones(3)), rng.dirichlet(np.ones(3)))
    assert anticipated_eea(cell, s) >= cell.obj.max() - 1e-12
