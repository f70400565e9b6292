"""Monte Carlo comparison of planning methods against sampled ground truth.

Each trial draws a true environment and object count for every cell, plus a
stack of ``k`` search counts and ``k`` environment readings per cell that
visits consume in order.  All methods see the same draws for a given trial.

Performance is reported as a log ratio against prior certainty:
``sum over visited cells of log(posterior max / prior max)``.  The *actual*
value conditions on the true environment; the *anticipated* value conditions
on the environment estimate available to the planner at the time.

Only the proposed combined method turns the environment readings it gathers
into an environment estimate.  The entropy and mowing-the-lawn vehicles carry
the same sensor but anticipate from prior beliefs, unless the scenario sets
``baseline_readings``.
"""

from __future__ import annotations

import csv
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .bayes import update_env
from .characterization import CharacterizationContext, LossParams, char_path_optimal
from .combined import bayes_env_estimate_w, combined_entropy_path, combined_path_optimal, \
    realized_accuracy
from .grid import DomainError, MotionModel, PathPlan, ScenarioGrid
from .objective import SearchPlanner, env_values, joint_count_table
from .planner import mowing_the_lawn_path
from .sensors import CharSensorModel, SearchSensorModel

COMBINED_METHODS = ("proposed-combined", "entropy-combined", "mtl-combined", "no-env-search")
SEPARATE_METHODS = ("proposed-separate", "entropy-separate", "no-char-search")
METHODS = COMBINED_METHODS + SEPARATE_METHODS
BASELINES = {m: "no-env-search" for m in COMBINED_METHODS}
BASELINES.update({m: "no-char-search" for m in SEPARATE_METHODS})


@dataclass(frozen=True, eq=False)
class Scenario:
    grid: ScenarioGrid
    search_sensor: SearchSensorModel
    char_sensor: CharSensorModel
    params: LossParams = LossParams()
    motion: MotionModel = MotionModel()
    char_motion: MotionModel = MotionModel(max_visits=1)
    search_budget: float = 60.0
    char_budget: float = 35.0
    n_bar: int = 20
    beta: float = 0.5
    weighted: bool = True
    char_method: str = "line-approx"
    baseline_readings: bool = False
    seed: int = 0


@dataclass(frozen=True)
class GroundTruth:
    env: np.ndarray      # true environment per cell
    count: np.ndarray    # true object count per cell
    z: np.ndarray        # (cells, k) pre-drawn search counts
    y: np.ndarray        # (cells, k) pre-drawn environment readings
    seed: tuple[int, int]


@dataclass(frozen=True)
class TrialRecord:
    trial: int
    method: str
    anticipated: float
    actual: float
    error: float
    planned: float
    n_cells: int


def trial_rng(root_seed: int, trial: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([root_seed, trial]))


def sample_ground_truth(scenario: Scenario, root_seed: int, trial: int) -> GroundTruth:
    """Truth and measurement stacks for one trial; a pure function of the seeds."""
    grid, sensor = scenario.grid, scenario.search_sensor
    k = max(scenario.motion.max_visits, scenario.char_motion.max_visits)
    rng = trial_rng(root_seed, trial)
    n = grid.size
    env_cdf = np.cumsum(np.array([c.env for c in grid.cells]), axis=1)
    env = np.minimum((rng.random(n)[:, None] >= env_cdf).sum(axis=1), grid.n_envs - 1)
    obj_cdf = np.cumsum(np.array([c.obj for c in grid.cells]), axis=1)
    count = np.minimum((rng.random(n)[:, None] >= obj_cdf).sum(axis=1), sensor.max_count)
    z_cdf = np.cumsum(sensor.table[env, count], axis=1)                   # (n, zmax+1)
    z = np.minimum((rng.random((n, k))[:, :, None] >= z_cdf[:, None, :]).sum(axis=2),
                   sensor.z_max)
    y_cdf = np.cumsum(scenario.char_sensor.confusion[:, env].T, axis=1)   # (n, m)
    y = np.minimum((rng.random((n, k))[:, :, None] >= y_cdf[:, None, :]).sum(axis=2),
                   grid.n_envs - 1)
    for a in (env, count, z, y):
        a.setflags(write=False)
    return GroundTruth(env, count, z, y, (root_seed, trial))


def _realized(scenario: Scenario, cell: int, zs: np.ndarray) -> np.ndarray:
    """``W(w_j) = max_x P(x | zs, w_j)`` for every environment."""
    obj = scenario.grid.cells[cell].obj
    lik = scenario.search_sensor.table[:, :, zs].prod(axis=-1) * obj[None, :]
    return realized_accuracy(lik[:, :, None], float(obj.max()))[:, 0]


def actual_performance(grid: ScenarioGrid, path: Sequence[int], truth: GroundTruth,
                       sensor: SearchSensorModel) -> float:
    """Log gain in certainty over the prior, conditioning on the true environments."""
    counts = np.bincount(np.asarray(path, dtype=int), minlength=grid.size)
    total = []
    for cell in np.nonzero(counts)[0]:
        obj = grid.cells[cell].obj
        zs = truth.z[cell, :counts[cell]]
        lik = sensor.table[truth.env[cell], :, zs].prod(axis=0) * obj
        if lik.sum() <= 0.0:
            raise DomainError(f"measurements {zs.tolist()} are impossible in cell {cell}")
        total.append(math.log(lik.max() / lik.sum()) - math.log(obj.max()))
    return math.fsum(total)


def _walk(scenario: Scenario, path: Sequence[int], truth: GroundTruth,
          env_belief: dict[int, np.ndarray], readings: bool) -> tuple[float, float]:
    """Anticipated and actual log performance of walking ``path``.

    ``env_belief`` holds environment beliefs updated before the walk; with
    ``readings`` every visit also takes an environment reading.
    """
    grid, params = scenario.grid, scenario.params
    counts = np.bincount(np.asarray(path, dtype=int), minlength=grid.size)
    ant, act = [], []
    for cell in np.nonzero(counts)[0]:
        n = int(counts[cell])
        w = _realized(scenario, cell, truth.z[cell, :n])
        env = env_belief.get(cell, grid.cells[cell].env)
        if readings:
            env = update_env(env, truth.y[cell, :n], scenario.char_sensor)
        fb = env_values(grid.cells[cell].obj, scenario.search_sensor)
        est = bayes_env_estimate_w(env, w, params, fb)
        base = math.log(grid.cells[cell].obj.max())
        ant.append(math.log(w[est]) - base)
        act.append(math.log(w[truth.env[cell]]) - base)
    return math.fsum(ant), math.fsum(act)


class MethodPlans:
    """Trial-independent plans for a scenario, computed on first use."""

    def __init__(self, scenario: Scenario):
        self.scenario = scenario
        self._cache: dict[str, PathPlan] = {}
        self._search: SearchPlanner | None = None
        self._ctx: CharacterizationContext | None = None

    @property
    def search(self) -> SearchPlanner:
        if self._search is None:
            s = self.scenario
            self._search = SearchPlanner(s.grid, s.search_sensor, s.motion, s.search_budget)
        return self._search

    @property
    def context(self) -> CharacterizationContext:
        if self._ctx is None:
            s = self.scenario
            self._ctx = CharacterizationContext(s.grid, s.search_sensor, s.char_sensor, s.motion,
                                                s.search_budget, s.params, planner=self.search)
        return self._ctx

    def get(self, name: str) -> PathPlan:
        if name in self._cache:
            return self._cache[name]
        s = self.scenario
        if name == "search":
            plan = self.search.prior_plan
        elif name == "combined":
            plan = combined_path_optimal(s.grid, s.motion, s.search_budget, s.search_sensor,
                                         s.char_sensor, s.params)
        elif name == "combined-entropy":
            plan = combined_entropy_path(s.grid, s.motion, s.search_budget, s.search_sensor,
                                         s.char_sensor, s.beta, s.weighted)
        elif name == "mtl":
            cells = mowing_the_lawn_path(s.grid, s.motion, s.search_budget)
            from .objective import search_path_value
            from .grid import path_cost
            plan = PathPlan(cells, path_cost(s.grid, cells, s.motion),
                            search_path_value(s.grid, cells, s.search_sensor))
        elif name == "char-proposed":
            plan = char_path_optimal(self.context, s.char_motion, s.char_budget, s.char_method,
                                     s.n_bar, s.seed, s.weighted)
        elif name == "char-entropy":
            plan = char_path_optimal(self.context, s.char_motion, s.char_budget, "entropy",
                                     weighted=s.weighted)
        else:
            raise DomainError(f"unknown plan {name!r}")
        self._cache[name] = plan
        return plan


_PLAN_OF = {"proposed-combined": "combined", "entropy-combined": "combined-entropy",
            "mtl-combined": "mtl", "no-env-search": "search", "no-char-search": "search"}
_CHAR_OF = {"proposed-separate": "char-proposed", "entropy-separate": "char-entropy"}


def simulate_trial(scenario: Scenario, method: str, root_seed: int, trial: int,
                   plans: MethodPlans | None = None,
                   truth: GroundTruth | None = None) -> TrialRecord:
    """Run one method on one sampled world."""
    if method not in METHODS:
        raise DomainError(f"unknown method {method!r}; choose from {', '.join(METHODS)}")
    plans = plans or MethodPlans(scenario)
    truth = truth or sample_ground_truth(scenario, root_seed, trial)
    if method in _PLAN_OF:
        plan = plans.get(_PLAN_OF[method])
        readings = method == "proposed-combined" or (
            scenario.baseline_readings and method.endswith("-combined"))
        ant, act = _walk(scenario, plan.cells, truth, {}, readings)
    else:
        char = plans.get(_CHAR_OF[method])
        counts = np.bincount(np.asarray(char.cells, dtype=int), minlength=scenario.grid.size)
        beliefs = {int(c): update_env(scenario.grid.cells[c].env, truth.y[c, :counts[c]],
                                      scenario.char_sensor)
                   for c in np.nonzero(counts)[0]}
        plan = plans.search.plan(beliefs)
        ant, act = _walk(scenario, plan.cells, truth, beliefs, readings=False)
    return TrialRecord(trial, method, ant, act, abs(ant - act), plan.value, len(plan.cells))


@dataclass
class CampaignResult:
    records: list[TrialRecord]
    methods: tuple[str, ...]
    summary: dict[str, dict[str, float]] = field(default_factory=dict)
    plans: dict[str, tuple[int, ...]] = field(default_factory=dict)

    def errors(self, method: str) -> np.ndarray:
        return np.array([r.error for r in self.records if r.method == method])

    def actuals(self, method: str) -> np.ndarray:
        return np.array([r.actual for r in self.records if r.method == method])


def error_reduction(mean_error: float, baseline_error: float) -> float:
    """Percent reduction of mean error relative to a baseline."""
    if baseline_error == 0.0:
        return 0.0
    return 100.0 * (1.0 - mean_error / baseline_error)


def _run_chunk(args) -> list[TrialRecord]:
    scenario, methods, root_seed, trials = args
    plans = MethodPlans(scenario)
    out = []
    for t in trials:
        truth = sample_ground_truth(scenario, root_seed, t)
        out.extend(simulate_trial(scenario, m, root_seed, t, plans, truth) for m in methods)
    return out


def worker_count() -> int:
    try:
        return max(1, int(os.environ.get("SEARCHLIGHT_THREADS", "1")))
    except ValueError:
        raise DomainError("SEARCHLIGHT_THREADS must be an integer") from None


def run_campaign(scenario: Scenario, methods: Iterable[str], n_trials: int, root_seed: int,
                 plans: MethodPlans | None = None, workers: int | None = None) -> CampaignResult:
    """All methods on ``n_trials`` shared worlds; records ordered by (trial, method)."""
    methods = tuple(methods)
    if n_trials < 1:
        raise DomainError("n_trials must be at least 1")
    for m in methods:
        if m not in METHODS:
            raise DomainError(f"unknown method {m!r}; choose from {', '.join(METHODS)}")
    workers = worker_count() if workers is None else workers
    if workers > 1 and n_trials > 1:
        chunks = [range(i, n_trials, workers) for i in range(workers)]
        with ProcessPoolExecutor(workers) as pool:
            parts = pool.map(_run_chunk, [(scenario, methods, root_seed, c) for c in chunks])
            records = [r for part in parts for r in part]
        order = {m: i for i, m in enumerate(methods)}
        records.sort(key=lambda r: (r.trial, order[r.method]))
        plans = plans or MethodPlans(scenario)
    else:
        plans = plans or MethodPlans(scenario)
        records = []
        for t in range(n_trials):
            truth = sample_ground_truth(scenario, root_seed, t)
            records.extend(simulate_trial(scenario, m, root_seed, t, plans, truth)
                           for m in methods)
    for m in methods:
        plans.get(_PLAN_OF.get(m) or _CHAR_OF[m])
    result = CampaignResult(records, methods)
    means = {m: float(np.mean(result.errors(m))) for m in methods}
    for m in methods:
        base = BASELINES[m] if BASELINES[m] in methods else None
        result.summary[m] = {
            "mean_error": means[m],
            "mean_actual": float(np.mean(result.actuals(m))),
            "reduction_pct": error_reduction(means[m], means[base]) if base else float("nan"),
        }
    for name in ("search", "combined", "combined-entropy", "mtl", "char-proposed",
                 "char-entropy"):
        if name in plans._cache:
            result.plans[name] = plans._cache[name].cells
    return result


def histogram(values: Sequence[float], bins: int = 40,
              value_range: tuple[float, float] | None = None) -> list[tuple[float, float, float]]:
    """``(bin_start, bin_end, percent)`` rows over uniform bins."""
    v = np.asarray(values, dtype=float)
    if value_range is None:
        value_range = (float(v.min()), float(v.max()))
    lo, hi = value_range
    if hi <= lo:
        hi = lo + 1.0
    counts, edges = np.histogram(v, bins=bins, range=(lo, hi))
    pct = 100.0 * counts / max(v.size, 1)
    return [(float(a), float(b), float(p)) for a, b, p in zip(edges[:-1], edges[1:], pct)]


def fmt(x: float) -> str:
    return f"{x:.12g}"


def write_campaign(result: CampaignResult, out_dir: str | Path, bins: int = 40) -> list[Path]:
    """Trial, summary, plan and histogram CSVs; histograms share bins across methods."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    path = out / "trials.csv"
    with path.open("w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["trial", "method", "anticipated", "actual", "error", "planned", "n_cells"])
        for r in result.records:
            w.writerow([r.trial, r.method, fmt(r.anticipated), fmt(r.actual), fmt(r.error),
                        fmt(r.planned), r.n_cells])
    written.append(path)
    path = out / "summary.csv"
    with path.open("w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["method", "mean_error", "reduction_pct", "mean_actual"])
        for m in result.methods:
            s = result.summary[m]
            w.writerow([m, fmt(s["mean_error"]), fmt(s["reduction_pct"]), fmt(s["mean_actual"])])
    written.append(path)
    if result.plans:
        path = out / "plans.csv"
        with path.open("w", newline="") as f:
            w = csv.writer(f, lineterminator="\n")
            w.writerow(["plan", "step", "cell"])
            for name, cells in result.plans.items():
                w.writerows([name, i, c] for i, c in enumerate(cells))
        written.append(path)
    for quantity, getter in (("error", result.errors), ("actual", result.actuals)):
        pooled = np.concatenate([getter(m) for m in result.methods])
        rng = (float(pooled.min()), float(pooled.max()))
        for m in result.methods:
            path = out / f"hist_{quantity}_{m}.csv"
            with path.open("w", newline="") as f:
                w = csv.writer(f, lineterminator="\n")
                w.writerow(["bin_start", "bin_end", "pct"])
                for a, b, p in histogram(getter(m), bins, rng):
                    w.writerow([fmt(a), fmt(b), fmt(p)])
            written.append(path)
    return written
