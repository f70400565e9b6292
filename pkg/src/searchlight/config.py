"""Scenario documents: YAML in, validated :class:`ScenarioConfig` out.

Validation collects every problem before failing.  Unknown keys are errors
unless ``strict=False``.  ``to_dict`` produces a document that parses back to an
equal config.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any

import numpy as np
import yaml

from .characterization import CHAR_METHODS, LossParams
from .grid import FREE, LANE, PROB_TOL, CellBelief, DomainError, MotionModel, ScenarioGrid
from .harness import Scenario
from .sensors import CharSensorModel, SearchSensorModel


class ConfigError(DomainError):
    """All validation problems found in a scenario document."""

    def __init__(self, errors: list[str]):
        self.errors = list(errors)
        super().__init__("invalid scenario:\n  " + "\n  ".join(self.errors))


@dataclass(frozen=True)
class MotionConfig:
    mode: str = LANE
    turn_penalty: int = 2
    step_cost: float = 1.0
    max_visits: int = 3
    start: tuple[int, int] = (0, 0)


@dataclass(frozen=True)
class ScenarioConfig:
    name: str
    rows: int
    cols: int
    max_count: int
    environments: tuple[str, ...]
    regions: dict[str, tuple[float, ...]]
    layout: tuple[tuple[str, ...], ...]
    detection: tuple[float, ...]
    false_alarm: tuple[float, ...]
    confusion: tuple[tuple[float, ...], ...]
    object_prior: tuple[float, ...] | None = None
    overrides: dict[tuple[int, int], tuple[float, ...]] = field(default_factory=dict)
    tail_tol: float = 1e-9
    c1: float = 1.0
    c2: float = 3.0
    c_prime: float = 0.0
    swap_w: bool = False
    motion: MotionConfig = MotionConfig()
    char_motion: MotionConfig = MotionConfig(max_visits=1)
    search_budget: float = 60.0
    char_budget: float = 35.0
    n_bar: int = 20
    epsilon: float = 0.1
    beta: float = 0.5
    weighted: bool = True
    char_method: str = "line-approx"
    baseline_readings: bool = False
    seed: int = 0

    # -- runtime objects --------------------------------------------------------

    def search_sensor(self) -> SearchSensorModel:
        return SearchSensorModel(self.detection, self.false_alarm, self.max_count, self.tail_tol)

    def char_sensor(self) -> CharSensorModel:
        return CharSensorModel(self.confusion)

    def loss(self) -> LossParams:
        return LossParams(self.c1, self.c2, self.c_prime, self.swap_w)

    def _motion(self, m: MotionConfig) -> MotionModel:
        r, c = m.start
        return MotionModel(m.mode, m.turn_penalty, m.step_cost, m.max_visits, r * self.cols + c)

    def search_motion(self) -> MotionModel:
        return self._motion(self.motion)

    def characterization_motion(self) -> MotionModel:
        return self._motion(self.char_motion)

    def grid(self) -> ScenarioGrid:
        prior = (np.full(self.max_count + 1, 1.0 / (self.max_count + 1))
                 if self.object_prior is None else np.array(self.object_prior))
        cells, labels = [], []
        for r, row in enumerate(self.layout):
            for c, label in enumerate(row):
                env = self.overrides.get((r, c), self.regions[label])
                cells.append(CellBelief(env, prior))
                labels.append(label)
        return ScenarioGrid(self.rows, self.cols, tuple(cells), tuple(labels))

    def scenario(self) -> Scenario:
        return Scenario(self.grid(), self.search_sensor(), self.char_sensor(), self.loss(),
                        self.search_motion(), self.characterization_motion(),
                        self.search_budget, self.char_budget, self.n_bar, self.beta,
                        self.weighted, self.char_method, self.baseline_readings, self.seed)

    # -- serialization ----------------------------------------------------------

    def to_dict(self) -> dict:
        def motion(m: MotionConfig) -> dict:
            d = asdict(m)
            d["start"] = list(m.start)
            return d

        doc = {
            "name": self.name,
            "grid": {"rows": self.rows, "cols": self.cols, "max_count": self.max_count,
                     "layout": [" ".join(row) for row in self.layout]},
            "environments": list(self.environments),
            "regions": {k: list(v) for k, v in self.regions.items()},
            "search_sensor": {"detection": list(self.detection),
                              "false_alarm": list(self.false_alarm),
                              "tail_tol": self.tail_tol},
            "char_sensor": {"confusion": [list(r) for r in self.confusion]},
            "loss": {"c1": self.c1, "c2": self.c2, "c_prime": self.c_prime,
                     "swap_w": self.swap_w},
            "motion": motion(self.motion),
            "char_motion": motion(self.char_motion),
            "budgets": {"search": self.search_budget, "char": self.char_budget},
            "approximation": {"n_bar": self.n_bar, "epsilon": self.epsilon,
                              "char_method": self.char_method},
            "entropy": {"beta": self.beta, "weighted": self.weighted},
            "simulation": {"baseline_readings": self.baseline_readings},
            "seed": self.seed,
        }
        if self.object_prior is not None:
            doc["grid"]["object_prior"] = list(self.object_prior)
        if self.overrides:
            doc["overrides"] = {f"{r},{c}": list(v) for (r, c), v in sorted(self.overrides.items())}
        return doc

    def dump(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=False, default_flow_style=None)


# -- parsing ---------------------------------------------------------------------

_SCHEMA = {
    "name": None,
    "grid": {"rows", "cols", "max_count", "layout", "object_prior"},
    "environments": None,
    "regions": None,
    "overrides": None,
    "search_sensor": {"detection", "false_alarm", "tail_tol"},
    "char_sensor": {"confusion", "diagonal"},
    "loss": {"c1", "c2", "c_prime", "swap_w"},
    "motion": {"mode", "turn_penalty", "step_cost", "max_visits", "start"},
    "char_motion": {"mode", "turn_penalty", "step_cost", "max_visits", "start"},
    "budgets": {"search", "char"},
    "approximation": {"n_bar", "epsilon", "char_method"},
    "entropy": {"beta", "weighted"},
    "simulation": {"baseline_readings"},
    "seed": None,
}
_REQUIRED = ("name", "grid", "environments", "regions", "search_sensor", "char_sensor")


class _Reader:
    def __init__(self, strict: bool):
        self.errors: list[str] = []
        self.warnings: list[str] = []
        self.strict = strict

    def fail(self, msg: str):
        self.errors.append(msg)

    def unknown(self, where: str, keys):
        for k in sorted(map(str, keys)):
            msg = f"{where}: unknown key '{k}'"
            (self.errors if self.strict else self.warnings).append(msg)

    def section(self, doc: dict, name: str) -> dict:
        sec = doc.get(name, {})
        if sec is None:
            sec = {}
        if not isinstance(sec, dict):
            self.fail(f"{name}: expected a mapping")
            return {}
        allowed = _SCHEMA[name]
        self.unknown(name, set(sec) - allowed)
        return sec

    def number(self, where: str, value, kind=float, lo=None, hi=None, lo_open=False,
               hi_open=False):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            self.fail(f"{where}: expected a number, got {value!r}")
            return None
        if kind is int and float(value) != int(value):
            self.fail(f"{where}: expected an integer, got {value!r}")
            return None
        v = kind(value)
        if not math.isfinite(v):
            self.fail(f"{where}: must be finite")
            return None
        if lo is not None and (v < lo or (lo_open and v == lo)):
            self.fail(f"{where}: {v} is below the allowed range")
            return None
        if hi is not None and (v > hi or (hi_open and v == hi)):
            self.fail(f"{where}: {v} is above the allowed range")
            return None
        return v

    def boolean(self, where: str, value):
        if not isinstance(value, bool):
            self.fail(f"{where}: expected true or false, got {value!r}")
            return None
        return value

    def vector(self, where: str, value, size: int | None = None, prob: bool = False):
        if not isinstance(value, (list, tuple)) or not value:
            self.fail(f"{where}: expected a non-empty list of numbers")
            return None
        out = []
        for i, v in enumerate(value):
            x = self.number(f"{where}[{i}]", v)
            if x is None:
                return None
            out.append(x)
        if size is not None and len(out) != size:
            self.fail(f"{where}: expected {size} entries, got {len(out)}")
            return None
        if prob:
            if any(x < 0 or x > 1 for x in out):
                self.fail(f"{where}: probabilities must lie in [0, 1]")
                return None
            if abs(sum(out) - 1.0) > PROB_TOL:
                self.fail(f"{where}: sums to {sum(out):.12g}, expected 1")
                return None
        return tuple(out)


def _motion(rd: _Reader, doc: dict, name: str, default: MotionConfig, rows, cols) -> MotionConfig:
    sec = rd.section(doc, name)
    mode = sec.get("mode", default.mode)
    if mode not in (LANE, FREE):
        rd.fail(f"{name}.mode: expected '{LANE}' or '{FREE}', got {mode!r}")
        mode = default.mode
    tp = rd.number(f"{name}.turn_penalty", sec.get("turn_penalty", default.turn_penalty), int, 0)
    step = rd.number(f"{name}.step_cost", sec.get("step_cost", default.step_cost), float, 0,
                     lo_open=True)
    k = rd.number(f"{name}.max_visits", sec.get("max_visits", default.max_visits), int, 1)
    start = sec.get("start", list(default.start))
    if (not isinstance(start, (list, tuple)) or len(start) != 2
            or not all(isinstance(v, int) and not isinstance(v, bool) for v in start)):
        rd.fail(f"{name}.start: expected [row, col]")
        start = default.start
    elif rows and cols and not (0 <= start[0] < rows and 0 <= start[1] < cols):
        rd.fail(f"{name}.start: {list(start)} lies outside the grid")
    return MotionConfig(mode, tp if tp is not None else default.turn_penalty,
                        step if step is not None else default.step_cost,
                        k if k is not None else default.max_visits, tuple(start))


def parse_scenario(document: Any, strict: bool = True) -> ScenarioConfig:
    """Validate a scenario mapping (or YAML text) and build a :class:`ScenarioConfig`."""
    if isinstance(document, str):
        try:
            document = yaml.safe_load(document)
        except yaml.YAMLError as exc:
            raise ConfigError([f"not valid YAML: {exc}"]) from None
    if document is None:
        document = {}
    if not isinstance(document, dict):
        raise ConfigError(["scenario document must be a mapping"])
    rd = _Reader(strict)
    rd.unknown("scenario", set(document) - set(_SCHEMA))
    for key in _REQUIRED:
        if key not in document:
            rd.fail(f"missing required section '{key}'")

    name = document.get("name", "")
    if "name" in document and not isinstance(name, str):
        rd.fail("name: expected a string")

    envs = document.get("environments", [])
    if not isinstance(envs, list) or not all(isinstance(e, str) for e in envs):
        rd.fail("environments: expected a list of labels")
        envs = []
    elif len(set(envs)) != len(envs):
        rd.fail("environments: labels must be distinct")
    m = len(envs) or None

    grid = rd.section(document, "grid")
    rows = cols = max_count = None
    if "grid" in document:
        for key in ("rows", "cols", "max_count", "layout"):
            if key not in grid:
                rd.fail(f"grid: missing '{key}'")
    if "rows" in grid:
        rows = rd.number("grid.rows", grid["rows"], int, 1)
    if "cols" in grid:
        cols = rd.number("grid.cols", grid["cols"], int, 1)
    if "max_count" in grid:
        max_count = rd.number("grid.max_count", grid["max_count"], int, 0)
    prior = None
    if "object_prior" in grid:
        prior = rd.vector("grid.object_prior", grid["object_prior"],
                          None if max_count is None else max_count + 1, prob=True)

    regions_doc = document.get("regions", {})
    regions: dict[str, tuple[float, ...]] = {}
    if not isinstance(regions_doc, dict):
        rd.fail("regions: expected a mapping of region name to environment distribution")
        regions_doc = {}
    for label, dist in regions_doc.items():
        v = rd.vector(f"regions.{label}", dist, m, prob=True)
        if v is not None:
            regions[str(label)] = v

    layout: list[tuple[str, ...]] = []
    raw_layout = grid.get("layout", [])
    if not isinstance(raw_layout, list):
        rd.fail("grid.layout: expected a list of rows")
        raw_layout = []
    if rows is not None and raw_layout and len(raw_layout) != rows:
        rd.fail(f"grid.layout: expected {rows} rows, got {len(raw_layout)}")
    for r, row in enumerate(raw_layout):
        labels = row.split() if isinstance(row, str) else row
        if not isinstance(labels, list) or not all(isinstance(x, str) for x in labels):
            rd.fail(f"grid.layout[{r}]: expected region labels")
            continue
        if cols is not None and len(labels) != cols:
            rd.fail(f"grid.layout[{r}]: expected {cols} cells, got {len(labels)}")
        for c, lab in enumerate(labels):
            if lab not in regions_doc:
                rd.fail(f"grid.layout[{r}]: cell ({r}, {c}) uses undefined region '{lab}'")
        layout.append(tuple(labels))

    overrides: dict[tuple[int, int], tuple[float, ...]] = {}
    ov = document.get("overrides", {}) or {}
    if not isinstance(ov, dict):
        rd.fail("overrides: expected a mapping of 'row,col' to distribution")
        ov = {}
    for key, dist in ov.items():
        try:
            r, c = (int(p) for p in str(key).split(","))
        except ValueError:
            rd.fail(f"overrides: key {key!r} is not 'row,col'")
            continue
        if rows is not None and cols is not None and not (0 <= r < rows and 0 <= c < cols):
            rd.fail(f"overrides: cell ({r}, {c}) lies outside the grid")
            continue
        v = rd.vector(f"overrides: cell ({r}, {c})", dist, m, prob=True)
        if v is not None:
            overrides[(r, c)] = v

    sens = rd.section(document, "search_sensor")
    detection = false_alarm = None
    if "search_sensor" in document:
        for key in ("detection", "false_alarm"):
            if key not in sens:
                rd.fail(f"search_sensor: missing '{key}'")
    if "detection" in sens:
        detection = rd.vector("search_sensor.detection", sens["detection"], m)
        if detection and any(not 0 < d <= 1 for d in detection):
            rd.fail("search_sensor.detection: probabilities must lie in (0, 1]")
    if "false_alarm" in sens:
        false_alarm = rd.vector("search_sensor.false_alarm", sens["false_alarm"], m)
        if false_alarm and any(not 0 <= f < 1 for f in false_alarm):
            rd.fail("search_sensor.false_alarm: parameters must lie in [0, 1)")
    tail_tol = rd.number("search_sensor.tail_tol", sens.get("tail_tol", 1e-9), float, 0, 1,
                         lo_open=True, hi_open=True)

    char = rd.section(document, "char_sensor")
    confusion = None
    if "confusion" in char and "diagonal" in char:
        rd.fail("char_sensor: give either 'confusion' or 'diagonal', not both")
    elif "confusion" in char:
        mat = char["confusion"]
        if not isinstance(mat, list) or (m and len(mat) != m):
            rd.fail(f"char_sensor.confusion: expected a {m}x{m} matrix")
        else:
            rows_ok = [rd.vector(f"char_sensor.confusion[{i}]", row, m)
                       for i, row in enumerate(mat)]
            if all(r is not None for r in rows_ok):
                a = np.array(rows_ok)
                sums = a.sum(axis=0)
                if np.any(a < 0) or np.any(a > 1):
                    rd.fail("char_sensor.confusion: entries must lie in [0, 1]")
                elif np.any(np.abs(sums - 1) > PROB_TOL):
                    rd.fail(f"char_sensor.confusion: columns sum to {sums.tolist()}, "
                            "expected 1")
                else:
                    confusion = tuple(tuple(r) for r in rows_ok)
    elif "diagonal" in char:
        diag = rd.vector("char_sensor.diagonal", char["diagonal"], m)
        if diag is not None:
            if any(not 0 <= d <= 1 for d in diag):
                rd.fail("char_sensor.diagonal: entries must lie in [0, 1]")
            else:
                a = CharSensorModel.symmetric(diag).confusion
                confusion = tuple(tuple(float(x) for x in r) for r in a)
    elif "char_sensor" in document:
        rd.fail("char_sensor: missing 'confusion' (or 'diagonal')")

    loss = rd.section(document, "loss")
    c1 = rd.number("loss.c1", loss.get("c1", 1.0), float, 0, lo_open=True)
    c2 = rd.number("loss.c2", loss.get("c2", 3.0), float, 0, lo_open=True)
    cp = rd.number("loss.c_prime", loss.get("c_prime", 0.0), float, 0, 1, hi_open=True)
    swap = rd.boolean("loss.swap_w", loss.get("swap_w", False))

    motion = _motion(rd, document, "motion", MotionConfig(), rows, cols)
    char_motion = _motion(rd, document, "char_motion", MotionConfig(max_visits=1), rows, cols)

    budgets = rd.section(document, "budgets")
    sb = rd.number("budgets.search", budgets.get("search", 60.0), float, 0)
    cb = rd.number("budgets.char", budgets.get("char", 35.0), float, 0)

    approx = rd.section(document, "approximation")
    n_bar = rd.number("approximation.n_bar", approx.get("n_bar", 20), int, 1)
    eps = rd.number("approximation.epsilon", approx.get("epsilon", 0.1), float, 0, lo_open=True)
    method = approx.get("char_method", "line-approx")
    if method not in CHAR_METHODS:
        rd.fail(f"approximation.char_method: expected one of {', '.join(CHAR_METHODS)}, "
                f"got {method!r}")

    ent = rd.section(document, "entropy")
    beta = rd.number("entropy.beta", ent.get("beta", 0.5), float, 0, 1, hi_open=True)
    weighted = rd.boolean("entropy.weighted", ent.get("weighted", True))

    sim = rd.section(document, "simulation")
    baseline_readings = rd.boolean("simulation.baseline_readings",
                                   sim.get("baseline_readings", False))

    seed = rd.number("seed", document.get("seed", 0), int, 0)

    if rd.errors:
        raise ConfigError(rd.errors)
    for w in rd.warnings:
        warnings.warn(w, stacklevel=2)
    return ScenarioConfig(
        name=name, rows=rows, cols=cols, max_count=max_count, environments=tuple(envs),
        regions=regions, layout=tuple(layout), detection=detection, false_alarm=false_alarm,
        confusion=confusion, object_prior=prior, overrides=overrides, tail_tol=tail_tol,
        c1=c1, c2=c2, c_prime=cp, swap_w=swap, motion=motion, char_motion=char_motion,
        search_budget=sb, char_budget=cb, n_bar=n_bar, epsilon=eps, beta=beta,
        weighted=weighted, char_method=method, baseline_readings=baseline_readings, seed=seed)


def bundled_scenarios() -> list[str]:
    files = resources.files("searchlight") / "scenarios"
    return sorted(p.name[:-5] for p in files.iterdir() if p.name.endswith(".yaml"))


def load_scenario(name_or_path: str | Path, strict: bool = True) -> ScenarioConfig:
    """Load a bundled scenario by name or a YAML file by path."""
    path = Path(name_or_path)
    if path.suffix in (".yaml", ".yml") or path.exists():
        try:
            text = path.read_text()
        except OSError as exc:
            raise ConfigError([f"cannot read {path}: {exc}"]) from None
    else:
        res = resources.files("searchlight") / "scenarios" / f"{name_or_path}.yaml"
        if not res.is_file():
            raise ConfigError([f"unknown scenario '{name_or_path}'; bundled: "
                               f"{', '.join(bundled_scenarios())}"])
        text = res.read_text()
    return parse_scenario(text, strict)
