"""Where to survey the environment before (or while) searching.

A characterization measurement ``y`` of a cell's environment is only worth
something if it changes how well we can anticipate search accuracy in a cell
the search vehicle will actually visit.  The value of ``y`` is the drop in
Bayes risk under an asymmetric loss on expected accuracy; a path's gain adds
these drops over its cells, gated by membership in the replanned search path.
An entropy-reduction objective is provided as the conventional baseline.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np

from .grid import LANE, DomainError, MotionModel, PathPlan, ScenarioGrid
from .objective import SearchPlanner, env_values, multisets
from .planner import PathObjective, SeparableObjective, branch_and_bound_optimal
from .sensors import CharSensorModel, SearchSensorModel

EXACT_OUTCOME_CAP = 20_000
TABLE_OUTCOME_CAP = 4_096


@dataclass(frozen=True)
class LossParams:
    """Asymmetric loss weights.

    ``c1`` charges underestimating the environment's accuracy and ``c2``
    overestimating it (for the expected-accuracy loss).  ``c_prime`` is the
    credit given to a characterized cell the search path skips.  ``swap_w``
    flips which weight the realized-accuracy loss applies to overestimation.
    """

    c1: float = 1.0
    c2: float = 3.0
    c_prime: float = 0.0
    swap_w: bool = False

    def __post_init__(self):
        if not (self.c1 > 0 and self.c2 > 0):
            raise DomainError("loss weights c1 and c2 must be positive")
        if not 0.0 <= self.c_prime < 1.0:
            raise DomainError("c_prime must lie in [0, 1)")

    @property
    def threshold(self) -> float:
        return self.c1 / (self.c1 + self.c2)

    def normalized(self) -> "LossParams":
        s = max(self.c1, self.c2)
        return LossParams(self.c1 / s, self.c2 / s, self.c_prime, self.swap_w)


@dataclass
class GainEstimate:
    """Sampled characterization gain with its Hoeffding certificate.

    ``counts`` maps ``(cell, outcome)`` to ``(k, k_pool, n_pool)``: containment
    hits in the cell's own trials and the hits/trials pooled from other cells'
    trials that happened to draw the same outcome.
    """

    value: float
    n_bar: int
    n_total: int
    epsilon: float
    confidence: float
    counts: dict = field(default_factory=dict)
    p_hat: dict = field(default_factory=dict)


# -- entropy ------------------------------------------------------------------

def entropy(p: Sequence[float]) -> float:
    """Shannon entropy in nats, with 0 log 0 = 0."""
    p = np.asarray(p, dtype=float)
    nz = p[p > 0]
    return float(-(nz * np.log(nz)).sum())


def char_outcomes(env: Sequence[float], sensor: CharSensorModel, visits: int = 1):
    """Every multiset of ``visits`` environment readings.

    Returns ``(index, prob, posterior)`` with shapes (M, visits), (M,), (M, m).
    Outcomes of probability zero keep the prior as their posterior.
    """
    env = np.asarray(env, dtype=float)
    if env.size != sensor.n_envs:
        raise DomainError("environment distribution does not match confusion matrix")
    index, weight = multisets(sensor.n_envs, visits)
    lik = sensor.confusion[index, :].prod(axis=1) * weight[:, None]  # (M, m)
    joint = lik * env[None, :]
    prob = joint.sum(axis=1)
    safe = np.where(prob > 0, prob, 1.0)
    post = np.where(prob[:, None] > 0, joint / safe[:, None], env[None, :])
    return index, prob, post


def entropy_change(env: Sequence[float], sensor: CharSensorModel, weighted: bool = True,
                   visits: int = 1) -> float:
    """Prior entropy minus posterior entropy after ``visits`` readings.

    ``weighted`` averages the posterior entropy over the outcome distribution.
    Without it the posterior entropies are summed unweighted, which can go
    negative; the value is returned as is.
    """
    if visits == 0:
        return 0.0
    _, prob, post = char_outcomes(env, sensor, visits)
    h_post = np.array([entropy(row) for row in post])
    if weighted:
        return entropy(env) - float(np.dot(prob, h_post))
    return entropy(env) - float(h_post.sum())


def entropy_path(grid: ScenarioGrid, motion: MotionModel, budget: float, sensor: CharSensorModel,
                 weighted: bool = True) -> PathPlan:
    """Characterization path maximizing the summed entropy reduction."""
    table = np.array([[entropy_change(c.env, sensor, weighted, n)
                       for n in range(motion.max_visits + 1)] for c in grid.cells])
    return branch_and_bound_optimal(grid, motion, budget, SeparableObjective(table))


# -- expected-accuracy loss and its Bayes estimator -----------------------------

def loss_v(true_env: int, estimate: int, values: Sequence[float], params: LossParams) -> float:
    """Loss of reporting ``estimate`` when the environment is ``true_env``."""
    v = np.asarray(values, dtype=float)
    diff = v[true_env] - v[estimate]
    if diff >= 0:
        return params.c1 * diff
    return params.c2 * -diff


def loss_v_matrix(values: Sequence[float], params: LossParams) -> np.ndarray:
    """``L[e, d]`` for every true environment ``e`` and estimate ``d``."""
    v = np.asarray(values, dtype=float)
    diff = v[:, None] - v[None, :]
    return np.where(diff >= 0, params.c1 * diff, -params.c2 * diff)


def _v_order(values: np.ndarray) -> np.ndarray:
    return np.argsort(values, kind="stable")


def bayes_env_estimate(posterior: Sequence[float], values: Sequence[float],
                       params: LossParams) -> int:
    """Environment estimate minimizing posterior expected loss, read off the
    cumulative distribution in ascending-accuracy order."""
    p = np.asarray(posterior, dtype=float)
    order = _v_order(np.asarray(values, dtype=float))
    cdf = np.cumsum(p[order])
    below = int(np.count_nonzero(cdf[:-1] <= params.threshold))
    return int(order[below])


def bayes_env_estimate_bruteforce(posterior: Sequence[float], values: Sequence[float],
                                  params: LossParams, tol: float = 1e-12) -> int:
    """Direct minimization over all candidates; near-ties go to the higher accuracy."""
    p = np.asarray(posterior, dtype=float)
    v = np.asarray(values, dtype=float)
    exp_loss = p @ loss_v_matrix(v, params)
    best = exp_loss.min()
    cands = [d for d in range(v.size) if exp_loss[d] <= best + tol * (1.0 + abs(best))]
    return max(cands, key=lambda d: (v[d], d))


def bayes_risk(posterior: Sequence[float], values: Sequence[float], params: LossParams) -> float:
    p = np.asarray(posterior, dtype=float)
    d = bayes_env_estimate(p, values, params)
    return float(p @ loss_v_matrix(values, params)[:, d])


def _risks(post: np.ndarray, values: np.ndarray, params: LossParams) -> np.ndarray:
    """Bayes risk of each posterior row."""
    exp_loss = post @ loss_v_matrix(values, params)  # (M, m)
    order = _v_order(values)
    cdf = np.cumsum(post[:, order], axis=1)
    below = np.count_nonzero(cdf[:, :-1] <= params.threshold, axis=1)
    est = order[below]
    return exp_loss[np.arange(post.shape[0]), est]


def uncertainty_reduction(prior_env: Sequence[float], y, sensor: CharSensorModel,
                          values: Sequence[float], params: LossParams) -> float:
    """Prior Bayes risk minus the Bayes risk after observing ``y`` (one or more readings)."""
    from .bayes import update_env

    post = update_env(prior_env, y, sensor)
    return bayes_risk(prior_env, values, params) - bayes_risk(post, values, params)


def reduction_table(env: Sequence[float], sensor: CharSensorModel, values: Sequence[float],
                    params: LossParams, visits: int = 1):
    """Outcome multisets with their probability, risk reduction and posterior."""
    env = np.asarray(env, dtype=float)
    values = np.asarray(values, dtype=float)
    index, prob, post = char_outcomes(env, sensor, visits)
    prior_risk = _risks(env[None, :], values, params)[0]
    return index, prob, prior_risk - _risks(post, values, params), post


def expected_reduction(env: Sequence[float], sensor: CharSensorModel, values: Sequence[float],
                       params: LossParams, visits: int = 1) -> float:
    _, prob, red, _ = reduction_table(env, sensor, values, params, visits)
    return float(np.dot(prob, red))


def hoeffding_confidence(epsilon: float, n_total: float) -> float:
    """``1 - 2 exp(-2 eps^2 N)``, clamped at zero where the bound is vacuous."""
    if not epsilon > 0:
        raise DomainError("epsilon must be positive")
    if n_total < 0:
        raise DomainError("sample count must be nonnegative")
    return max(0.0, 1.0 - 2.0 * math.exp(-2.0 * epsilon * epsilon * n_total))


# -- characterization gain of a path ---------------------------------------------

class CharacterizationContext:
    """Everything needed to value a characterization path.

    Holds the search planner (re-solved for each hypothetical set of readings),
    the per-cell accuracy values, and cached outcome tables.
    """

    def __init__(self, grid: ScenarioGrid, search_sensor: SearchSensorModel,
                 char_sensor: CharSensorModel, search_motion: MotionModel, search_budget: float,
                 params: LossParams = LossParams(), planner: SearchPlanner | None = None):
        if char_sensor.n_envs != grid.n_envs or search_sensor.n_envs != grid.n_envs:
            raise DomainError("sensor models and grid disagree on the number of environments")
        self.grid, self.search_sensor, self.char_sensor = grid, search_sensor, char_sensor
        self.search_motion, self.search_budget, self.params = search_motion, search_budget, params
        self.planner = planner or SearchPlanner(grid, search_sensor, search_motion, search_budget)
        self._tables: dict = {}

    def values(self, cell: int) -> np.ndarray:
        return env_values(self.grid.cells[cell].obj, self.search_sensor)

    def outcomes(self, cell: int, visits: int):
        """``(index, prob, reduction, posterior)`` for ``visits`` readings of ``cell``."""
        key = (self.grid.cells[cell].key, visits)
        hit = self._tables.get(key)
        if hit is None:
            hit = reduction_table(self.grid.cells[cell].env, self.char_sensor,
                                  self.values(cell), self.params, visits)
            self._tables[key] = hit
        return hit

    def informative(self, cell: int, visits: int) -> bool:
        """Whether some reading of ``cell`` can move its environment belief."""
        _, prob, _, post = self.outcomes(cell, visits)
        env = self.grid.cells[cell].env
        return bool(np.any(np.abs(post[prob > 0] - env) > 1e-15))

    def searched(self, updates: dict[int, np.ndarray]) -> frozenset[int]:
        return self.planner.plan(updates).cell_set

    def indicator(self, contained) -> np.ndarray:
        c = np.asarray(contained, dtype=float)
        return c + self.params.c_prime * (1.0 - c)


def _path_cells(grid: ScenarioGrid, eta: Sequence[int]) -> dict[int, int]:
    counts: dict[int, int] = {}
    for c in eta:
        if not 0 <= c < grid.size:
            raise DomainError(f"cell {c} outside grid")
        counts[int(c)] = counts.get(int(c), 0) + 1
    return dict(sorted(counts.items()))


def exact_char_gain(ctx: CharacterizationContext, eta: Sequence[int],
                    cap: int = EXACT_OUTCOME_CAP) -> float:
    """Expected gain of characterizing ``eta``, enumerating every joint reading.

    Cells whose readings cannot move their belief contribute nothing and are
    left out of the enumeration.
    """
    visits = _path_cells(ctx.grid, eta)
    cells = [c for c, n in visits.items() if ctx.informative(c, n)]
    tables = [ctx.outcomes(c, visits[c]) for c in cells]
    total = math.prod(len(t[1]) for t in tables)
    if total > cap:
        raise DomainError(f"{total} joint outcomes exceed the enumeration cap {cap}; "
                          "use approximate_char_gain instead")
    gain = 0.0
    for combo in itertools.product(*(range(len(t[1])) for t in tables)):
        p = math.prod(t[1][o] for t, o in zip(tables, combo))
        if p == 0.0:
            continue
        searched = ctx.searched({c: t[3][o] for c, t, o in zip(cells, tables, combo)})
        ind = ctx.indicator([c in searched for c in cells])
        gain += p * float(sum(i * t[2][o] for i, t, o in zip(ind, tables, combo)))
    return gain


class _Containment:
    """Search-path membership of each cell for joint outcome indices.

    Small outcome spaces are tabulated up front so lookups vectorize.
    """

    def __init__(self, ctx: CharacterizationContext, cells: list[int], tables: list):
        self.ctx, self.cells, self.tables = ctx, cells, tables
        self.radix = [len(t[1]) for t in tables]
        total = math.prod(self.radix)
        self.table = None
        if total <= TABLE_OUTCOME_CAP:
            self.table = np.zeros((total, len(cells)), dtype=bool)
            for code, combo in enumerate(itertools.product(*(range(r) for r in self.radix))):
                if any(t[1][o] == 0.0 for t, o in zip(tables, combo)):
                    continue
                self.table[code] = self._solve(combo)

    def _solve(self, combo) -> np.ndarray:
        searched = self.ctx.searched({c: t[3][o] for c, t, o in
                                      zip(self.cells, self.tables, combo)})
        return np.array([c in searched for c in self.cells])

    def __call__(self, outcomes: np.ndarray) -> np.ndarray:
        if self.table is not None:
            code = np.ravel_multi_index(outcomes.T, self.radix)
            return self.table[code]
        return np.array([self._solve(tuple(row)) for row in outcomes.tolist()], dtype=bool)


def approximate_char_gain(ctx: CharacterizationContext, eta: Sequence[int], n_bar: int = 20,
                          seed: int = 0, epsilon: float = 0.1) -> GainEstimate:
    """Sampled gain: containment probabilities estimated from ``n_bar`` trials
    per (cell, reading), pooling the readings other cells' trials drew.

    Each (cell, reading) block draws from its own seed stream derived from
    ``(seed, cell, reading index)``, so blocks are independent of evaluation order.
    """
    if n_bar < 1:
        raise DomainError("n_bar must be at least 1")
    visits = _path_cells(ctx.grid, eta)
    cells = [c for c, n in visits.items() if ctx.informative(c, n)]
    tables = [ctx.outcomes(c, visits[c]) for c in cells]
    n = len(cells)
    if n == 0:
        return GainEstimate(0.0, n_bar, n_bar, epsilon, hoeffding_confidence(epsilon, n_bar))
    lookup = _Containment(ctx, cells, tables)
    cdfs = [np.cumsum(t[1]) / t[1].sum() for t in tables]
    k = [np.zeros(len(t[1])) for t in tables]
    trials = [np.zeros(len(t[1])) for t in tables]
    k_pool = [np.zeros(len(t[1])) for t in tables]
    n_pool = [np.zeros(len(t[1])) for t in tables]
    for i, (cell, t) in enumerate(zip(cells, tables)):
        for o in np.nonzero(t[1] > 0)[0]:
            rng = np.random.default_rng(np.random.SeedSequence([seed, cell, int(o)]))
            u = rng.random((n_bar, n))
            out = np.empty((n_bar, n), dtype=np.int64)
            for j in range(n):
                out[:, j] = np.minimum(np.searchsorted(cdfs[j], u[:, j], side="right"),
                                       len(cdfs[j]) - 1)
            out[:, i] = o
            hit = lookup(out)
            k[i][o] += hit[:, i].sum()
            trials[i][o] += n_bar
            for j in range(n):
                if j != i:
                    np.add.at(n_pool[j], out[:, j], 1)
                    np.add.at(k_pool[j], out[:, j], hit[:, j])
    value = 0.0
    counts, p_hat = {}, {}
    n_total = math.inf
    for i, (cell, t) in enumerate(zip(cells, tables)):
        for o in np.nonzero(t[1] > 0)[0]:
            denom = trials[i][o] + n_pool[i][o]
            ph = (k[i][o] + k_pool[i][o]) / denom
            label = (cell, tuple(int(v) for v in t[0][o]))
            counts[label] = (int(k[i][o]), int(k_pool[i][o]), int(n_pool[i][o]))
            p_hat[label] = float(ph)
            n_total = min(n_total, denom)
            value += float(ctx.indicator(ph) * t[1][o] * t[2][o])
    n_total = int(n_total)
    return GainEstimate(value, n_bar, n_total, epsilon, hoeffding_confidence(epsilon, n_total),
                        counts, p_hat)


def line_approx_char_gain(ctx: CharacterizationContext, cell: int, line: int | None = None,
                          n_bar: int = 20, seed: int = 0, visits: int = 1) -> float:
    """Gain of characterizing ``cell`` alone, with its search-path membership
    estimated from trials that sample readings of the other cells of its row.

    The membership probability is estimated separately for each reading of
    ``cell``; a line with nothing else informative needs a single solve.
    """
    grid = ctx.grid
    row = grid.rc(cell)[0] if line is None else line
    if grid.rc(cell)[0] != row:
        raise DomainError(f"cell {cell} is not on line {row}")
    if visits == 0 or not ctx.informative(cell, visits):
        return 0.0
    index, prob, red, post = ctx.outcomes(cell, visits)
    others = [c for c in grid.row_cells(row) if c != cell and ctx.informative(c, 1)]
    o_tables = [ctx.outcomes(c, 1) for c in others]
    cdfs = [np.cumsum(t[1]) / t[1].sum() for t in o_tables]
    gain = 0.0
    for o in np.nonzero(prob > 0)[0]:
        if red[o] == 0.0:
            continue
        if others:
            rng = np.random.default_rng(np.random.SeedSequence([seed, cell, visits, int(o)]))
            u = rng.random((n_bar, len(others)))
            draws = np.stack([np.minimum(np.searchsorted(cdf, u[:, j], side="right"),
                                         len(cdf) - 1) for j, cdf in enumerate(cdfs)], axis=1)
            hits = 0
            for row_draw in draws.tolist():
                updates = {c: t[3][d] for c, t, d in zip(others, o_tables, row_draw)}
                updates[cell] = post[o]
                hits += cell in ctx.searched(updates)
            ph = hits / n_bar
        else:
            ph = float(cell in ctx.searched({cell: post[o]}))
        gain += float(ctx.indicator(ph) * prob[o] * red[o])
    return gain


# -- path selection ------------------------------------------------------------

class _GainObjective(PathObjective):
    """Non-separable characterization gain with a separable admissible bound.

    The bound credits every reading's positive risk reduction in full, as if
    the cell were certain to be searched.
    """

    order_invariant = True

    def __init__(self, gain_fn, bound_table: np.ndarray):
        self.gain_fn = gain_fn
        self.bound = SeparableObjective(bound_table)
        self._cache: dict = {}

    def score(self, cells, counts) -> float:
        key = counts.tobytes()
        hit = self._cache.get(key)
        if hit is None:
            hit = float(self.gain_fn(tuple(cells)))
            self._cache[key] = hit
        return hit

    def upper_bound(self, cells, counts, score, remaining, n_more) -> float:
        base = self.bound.score(cells, counts)
        return self.bound.upper_bound(cells, counts, base, remaining, n_more)


def _bound_table(ctx: CharacterizationContext, max_visits: int) -> np.ndarray:
    table = np.zeros((ctx.grid.size, max_visits + 1))
    for c in range(ctx.grid.size):
        for n in range(1, max_visits + 1):
            _, prob, red, _ = ctx.outcomes(c, n)
            table[c, n] = float(np.dot(prob, np.maximum(red, 0.0)))
    return table


def line_gain_table(ctx: CharacterizationContext, max_visits: int, n_bar: int = 20,
                    seed: int = 0) -> np.ndarray:
    """Per-cell line-approximated gains for 0..max_visits readings."""
    table = np.zeros((ctx.grid.size, max_visits + 1))
    for c in range(ctx.grid.size):
        for n in range(1, max_visits + 1):
            table[c, n] = line_approx_char_gain(ctx, c, n_bar=n_bar, seed=seed, visits=n)
    return table


CHAR_METHODS = ("exact", "path-sample", "line-approx", "entropy")


def char_path_optimal(ctx: CharacterizationContext, motion: MotionModel, budget: float,
                      method: str = "line-approx", n_bar: int = 20, seed: int = 0,
                      weighted: bool = True) -> PathPlan:
    """Characterization path chosen by one of :data:`CHAR_METHODS`."""
    grid = ctx.grid
    if method == "entropy":
        return entropy_path(grid, motion, budget, ctx.char_sensor, weighted)
    if method == "line-approx":
        if motion.mode != LANE:
            raise DomainError("line approximation needs lane motion")
        table = line_gain_table(ctx, motion.max_visits, n_bar, seed)
        plan = branch_and_bound_optimal(grid, motion, budget, SeparableObjective(table))
        return plan
    bound = _bound_table(ctx, motion.max_visits)
    if method == "exact":
        obj = _GainObjective(lambda cells: exact_char_gain(ctx, cells), bound)
    elif method == "path-sample":
        obj = _GainObjective(lambda cells: approximate_char_gain(ctx, cells, n_bar, seed).value,
                             bound)
    else:
        raise DomainError(f"unknown characterization method {method!r}; "
                          f"choose from {', '.join(CHAR_METHODS)}")
    return branch_and_bound_optimal(grid, motion, budget, obj)


# -- empirical certificates ---------------------------------------------------------

@dataclass
class BoundCheck:
    """Observed frequency of a bound event against its Hoeffding guarantee."""

    name: str
    epsilon: float
    n_total: int
    guarantee: float
    frequency: float
    tight_frequency: float
    repetitions: int

    @property
    def passed(self) -> bool:
        return self.frequency >= self.guarantee


def validate_gain_bound(ctx: CharacterizationContext, eta: Sequence[int], epsilon: float,
                        n_bar: int = 200, repetitions: int = 500, seed: int = 0) -> BoundCheck:
    """Frequency of ``|approx - exact| < eps * N * |eta|`` over seeded repetitions.

    ``tight_frequency`` reports the stricter event ``< eps * |eta|``.
    """
    exact = exact_char_gain(ctx, eta)
    hits = tight = 0
    n_min = math.inf
    for r in range(repetitions):
        est = approximate_char_gain(ctx, eta, n_bar, seed=_rep_seed(seed, r), epsilon=epsilon)
        n_min = min(n_min, est.n_total)
        err = abs(est.value - exact)
        hits += err < epsilon * est.n_total * len(eta)
        tight += err < epsilon * len(eta)
    n_min = int(n_min)
    return BoundCheck("gain", epsilon, n_min, hoeffding_confidence(epsilon, n_min),
                      hits / repetitions, tight / repetitions, repetitions)


def validate_optimal_bound(ctx: CharacterizationContext, motion: MotionModel, budget: float,
                           epsilon: float, n_bar: int = 200, repetitions: int = 500,
                           seed: int = 0) -> BoundCheck:
    """Frequency of ``gain(exact optimum) - gain(sampled optimum) < 2 eps N |eta|``.

    Candidate paths are enumerated once; each repetition re-estimates every
    candidate with a fresh seed and keeps its argmax.
    """
    from .grid import enumerate_feasible_paths

    seen: dict[bytes, tuple[int, ...]] = {}
    for cells in enumerate_feasible_paths(ctx.grid, motion, budget):
        key = np.bincount(np.asarray(cells, dtype=int), minlength=ctx.grid.size).tobytes()
        if key not in seen or cells < seen[key]:
            seen[key] = cells
    cands = sorted(seen.values())
    exact = {c: exact_char_gain(ctx, c) for c in cands}
    best = max(exact.values())
    longest = max(len(c) for c in cands)
    hits = tight = 0
    n_min = math.inf
    for r in range(repetitions):
        s = _rep_seed(seed, r)
        ests = [approximate_char_gain(ctx, c, n_bar, seed=s, epsilon=epsilon) for c in cands]
        pick = max(range(len(cands)), key=lambda i: (ests[i].value, [-v for v in cands[i]]))
        n_r = min(e.n_total for e in ests)
        n_min = min(n_min, n_r)
        gap = best - exact[cands[pick]]
        hits += gap < 2 * epsilon * n_r * longest or gap <= 0.0
        tight += gap < 2 * epsilon * longest or gap <= 0.0
    n_min = int(n_min)
    return BoundCheck("optimal", epsilon, n_min, hoeffding_confidence(epsilon, n_min),
                      hits / repetitions, tight / repetitions, repetitions)


@lru_cache(maxsize=None)
def _rep_seed(seed: int, rep: int) -> int:
    return int(np.random.SeedSequence([seed, rep]).generate_state(1)[0])
