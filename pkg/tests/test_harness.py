import math

import numpy as np
import pytest

from searchlight.config import parse_scenario
from searchlight.grid import CellBelief, DomainError, ScenarioGrid
from searchlight.harness import (METHODS, GroundTruth, MethodPlans, actual_performance,
                                 error_reduction, histogram, run_campaign, sample_ground_truth,
                                 simulate_trial, write_campaign)
from searchlight.objective import search_path_value
from searchlight.sensors import CharSensorModel, SearchSensorModel


def small_doc(**over):
    doc = {
        "name": "small",
        "grid": {"rows": 3, "cols": 4, "max_count": 2,
                 "layout": ["A1 A1 A3 A3", "A2 A2 A5 A5", "A4 A4 A3 A2"]},
        "environments": ["w1", "w2", "w3"],
        "regions": {"A1": [1, 0, 0], "A2": [0.15, 0.2, 0.65], "A3": [0.4, 0.3, 0.3],
                    "A4": [0.15, 0.8, 0.05], "A5": [0.05, 0.05, 0.9]},
        "search_sensor": {"detection": [0.65, 0.8, 0.95], "false_alarm": [0.4, 0.3, 0.05]},
        "char_sensor": {"diagonal": [0.9, 0.92, 0.94]},
        "budgets": {"search": 8, "char": 5},
        "approximation": {"n_bar": 5},
        "seed": 3,
    }
    doc.update(over)
    return doc


@pytest.fixture(scope="module")
def small():
    return parse_scenario(small_doc()).scenario()


def test_ground_truth_is_seeded(small):
    a = sample_ground_truth(small, 5, 2)
    b = sample_ground_truth(small, 5, 2)
    c = sample_ground_truth(small, 5, 3)
    for f in ("env", "count", "z", "y"):
        np.testing.assert_array_equal(getattr(a, f), getattr(b, f))
    assert not np.array_equal(a.z, c.z) or not np.array_equal(a.y, c.y)
    # region A1 is known for certain
    assert all(a.env[c] == 0 for c in small.grid.region_cells("A1"))
    assert a.z.shape == (12, 3)


def test_actual_performance_examples():
    sensor = SearchSensorModel((1.0,), (0.0,), max_count=1)
    g = ScenarioGrid(1, 2, (CellBelief([1.0], [0.5, 0.5]),) * 2)
    truth = GroundTruth(np.zeros(2, int), np.array([1, 0]), np.array([[1], [0]]),
                        np.zeros((2, 1), int), (0, 0))
    assert actual_performance(g, (), truth, sensor) == 0.0
    # posterior certainty goes from 1/2 to 1
    assert actual_performance(g, (0,), truth, sensor) == pytest.approx(math.log(2))
    known = ScenarioGrid(1, 2, (CellBelief([1.0], [1.0, 0.0]),) * 2)
    quiet = GroundTruth(np.zeros(2, int), np.zeros(2, int), np.zeros((2, 1), int),
                        np.zeros((2, 1), int), (0, 0))
    assert actual_performance(known, (0, 1), quiet, sensor) == 0.0
    with pytest.raises(DomainError):
        actual_performance(known, (0,), truth, sensor)


def test_perfect_sensors_have_no_error():
    doc = small_doc(search_sensor={"detection": [1, 1, 1], "false_alarm": [0, 0, 0]},
                    char_sensor={"confusion": np.eye(3).tolist()})
    # equal detection makes environments tie, so give them distinct but perfect accuracy
    doc["search_sensor"] = {"detection": [0.999999, 0.9999995, 1.0], "false_alarm": [0, 0, 0]}
    sc = parse_scenario(doc).scenario()
    plans = MethodPlans(sc)
    for method in ("proposed-combined", "proposed-separate"):
        for t in range(5):
            rec = simulate_trial(sc, method, 0, t, plans)
            assert rec.error == pytest.approx(0.0, abs=1e-5)


def test_trial_is_deterministic(small):
    plans = MethodPlans(small)
    for m in METHODS:
        assert simulate_trial(small, m, 9, 4, plans) == simulate_trial(small, m, 9, 4)


def test_unknown_method(small):
    with pytest.raises(DomainError):
        simulate_trial(small, "random-walk", 0, 0)


def test_single_trial_campaign(small):
    res = run_campaign(small, METHODS, 1, 0)
    assert [r.method for r in res.records] == list(METHODS)
    assert error_reduction(3.0, 3.0) == 0.0
    assert res.summary["no-env-search"]["reduction_pct"] == 0.0


def test_csv_output_is_byte_identical(small, tmp_path):
    methods = ("proposed-combined", "no-env-search")
    a = write_campaign(run_campaign(small, methods, 6, 7), tmp_path / "a", bins=5)
    b = write_campaign(run_campaign(small, methods, 6, 7), tmp_path / "b", bins=5)
    assert [p.name for p in a] == [p.name for p in b]
    for pa, pb in zip(a, b):
        assert pa.read_bytes() == pb.read_bytes()
    rows = (tmp_path / "a" / "hist_error_proposed-combined.csv").read_text().splitlines()
    assert rows[0] == "bin_start,bin_end,pct" and len(rows) == 6
    plan_rows = (tmp_path / "a" / "plans.csv").read_text().splitlines()
    assert plan_rows[0] == "plan,step,cell" and len(plan_rows) > 1


def test_parallel_matches_serial(small):
    methods = ("proposed-combined", "mtl-combined")
    serial = run_campaign(small, methods, 4, 2, workers=1)
    parallel = run_campaign(small, methods, 4, 2, workers=2)
    assert serial.records == parallel.records
    assert serial.plans == parallel.plans


def test_histogram_percentages():
    rows = histogram([0.0, 0.5, 1.0, 1.0], bins=4)
    assert sum(p for _, _, p in rows) == pytest.approx(100.0)
    assert rows[0][0] == 0.0 and rows[-1][1] == 1.0


def test_replanning_never_lowers_planned_value(small):
    doc = small_doc(char_sensor={"confusion": np.eye(3).tolist()})
    sc = parse_scenario(doc).scenario()
    plans = MethodPlans(sc)
    char = plans.get("char-proposed")
    prior_cells = plans.search.prior_plan.cells
    for t in range(5):
        truth = sample_ground_truth(sc, 1, t)
        updates = {c: np.eye(3)[truth.y[c, 0]] for c in set(char.cells)}
        replanned = plans.search.plan(updates)
        grid = sc.grid.with_env(updates)
        assert replanned.value >= search_path_value(grid, prior_cells, sc.search_sensor) - 1e-12


def test_ground_truth_follows_object_prior():
    cfg = parse_scenario(small_doc(grid={**small_doc()["grid"], "object_prior": [0.0, 0.0, 1.0]}))
    sc = cfg.scenario()
    for t in range(5):
        assert np.all(sample_ground_truth(sc, 0, t).count == 2)
