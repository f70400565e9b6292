import warnings

import numpy as np
import pytest
import yaml

from searchlight.config import (ConfigError, bundled_scenarios, load_scenario, parse_scenario)

from test_harness import small_doc


def test_bundled_scenarios_present():
    assert {"survey_10x10", "toy_2x3"} <= set(bundled_scenarios())


def test_survey_regions():
    cfg = load_scenario("survey_10x10")
    assert cfg.regions == {
        "A1": (1.0, 0.0, 0.0), "A2": (0.15, 0.2, 0.65), "A3": (0.4, 0.3, 0.3),
        "A4": (0.15, 0.8, 0.05), "A5": (0.05, 0.05, 0.9)}
    assert (cfg.rows, cfg.cols, cfg.search_budget, cfg.char_budget) == (10, 10, 60, 35)
    assert (cfg.c1, cfg.c2, cfg.beta) == (1.0, 3.0, 0.5)
    sc = cfg.scenario()
    assert sc.grid.size == 100 and sc.char_motion.max_visits == 1
    np.testing.assert_allclose(sc.char_sensor.confusion[:, 0], [0.9, 0.05, 0.05])


def test_round_trip():
    for name in bundled_scenarios():
        cfg = load_scenario(name)
        assert parse_scenario(cfg.dump()) == cfg
        assert parse_scenario(cfg.to_dict()) == cfg


def test_unnormalized_region_names_it():
    doc = small_doc()
    doc["regions"]["A3"] = [0.3, 0.3, 0.3]
    with pytest.raises(ConfigError) as info:
        parse_scenario(doc)
    assert any("A3" in e for e in info.value.errors)


def test_empty_document_reports_every_missing_section():
    with pytest.raises(ConfigError) as info:
        parse_scenario("")
    missing = [e for e in info.value.errors if e.startswith("missing")]
    assert len(missing) == 6


def test_all_errors_collected():
    doc = small_doc(budgets={"search": -1, "char": 5})
    doc["grid"]["layout"] = ["A1 A1 A3 A9", "A2 A2 A5 A5", "A4 A4 A3 A2"]
    doc["char_sensor"] = {"diagonal": [0.9, 0.92]}
    with pytest.raises(ConfigError) as info:
        parse_scenario(doc)
    assert len(info.value.errors) >= 3


def test_unknown_keys_strict_and_lenient():
    doc = small_doc(colour="blue")
    with pytest.raises(ConfigError):
        parse_scenario(doc)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        cfg = parse_scenario(doc, strict=False)
    assert cfg.name == "small" and any("colour" in str(w.message) for w in caught)


def test_bad_yaml_and_unknown_name(tmp_path):
    with pytest.raises(ConfigError):
        parse_scenario("grid: [unclosed")
    with pytest.raises(ConfigError):
        load_scenario("no_such_scenario")
    path = tmp_path / "s.yaml"
    path.write_text(yaml.safe_dump(small_doc()))
    assert load_scenario(path).rows == 3
