"""Estimation-accuracy utility for the search vehicle.

Accuracy of a cell is the posterior probability of the Bayes (argmax) estimate
of its object count.  Expected accuracies are exact sums over the truncated
measurement space; a cell visited ``n`` times sees ``n`` independent counts.
"""

from __future__ import annotations

from functools import lru_cache
from itertools import combinations_with_replacement
from math import factorial
from typing import Sequence

import numpy as np

from .grid import CellBelief, DomainError, ScenarioGrid
from .sensors import SearchSensorModel

V_TIE_TOL = 1e-12


@lru_cache(maxsize=None)
def multisets(n_symbols: int, size: int) -> tuple[np.ndarray, np.ndarray]:
    """All size-``size`` multisets over ``range(n_symbols)`` with multinomial weights.

    Returns ``(index, weight)``: ``index`` has shape (M, size) and ``weight[k]``
    is the number of ordered tuples collapsing onto multiset ``k``.
    """
    combos = list(combinations_with_replacement(range(n_symbols), size))
    index = np.array(combos, dtype=int).reshape(len(combos), size)
    weight = np.empty(len(combos))
    for k, c in enumerate(combos):
        w = factorial(size)
        for s in set(c):
            w //= factorial(c.count(s))
        weight[k] = w
    index.setflags(write=False)
    weight.setflags(write=False)
    return index, weight


@lru_cache(maxsize=256)
def joint_count_table(sensor: SearchSensorModel, prior_obj: tuple[float, ...],
                      visits: int) -> np.ndarray:
    """``P(zset, x | w_j)`` with shape (m, L+1, M) over count multisets of size ``visits``."""
    index, weight = multisets(sensor.z_max + 1, visits)
    lik = sensor.table[:, :, index].prod(axis=-1)
    out = lik * np.asarray(prior_obj)[None, :, None] * weight[None, None, :]
    out.setflags(write=False)
    return out


def bayes_obj_estimate(posterior: Sequence[float]) -> tuple[int, float]:
    """Argmax estimate (smallest count on ties) and its posterior probability."""
    p = np.asarray(posterior, dtype=float)
    x = int(np.argmax(p))
    return x, float(p[x])


@lru_cache(maxsize=256)
def _v_table(sensor: SearchSensorModel, prior_obj: tuple[float, ...], visits: int) -> np.ndarray:
    if visits == 0:
        return np.full(sensor.n_envs, max(prior_obj))
    joint = joint_count_table(sensor, prior_obj, visits)
    v = joint.max(axis=1).sum(axis=1)
    v.setflags(write=False)
    return v


def eea_given_env(prior: Sequence[float], env: int, sensor: SearchSensorModel,
                  visits: int = 1) -> float:
    """Expected accuracy of searching a cell ``visits`` times in environment ``env``."""
    prior = tuple(float(p) for p in prior)
    if len(prior) != sensor.max_count + 1:
        raise DomainError("prior length does not match sensor max_count")
    return float(_v_table(sensor, prior, visits)[env])


def env_values(prior: Sequence[float], sensor: SearchSensorModel, visits: int = 1) -> np.ndarray:
    """V(w_j) for every environment."""
    return _v_table(sensor, tuple(float(p) for p in prior), visits).copy()


def anticipated_eea(cell: CellBelief, sensor: SearchSensorModel, visits: int = 1) -> float:
    v = _v_table(sensor, cell.key[1], visits)
    return float(np.dot(cell.env, v))


def cell_value_table(cell: CellBelief, sensor: SearchSensorModel, max_visits: int) -> np.ndarray:
    """Anticipated accuracy for 0..max_visits visits (index 0 is the prior maximum)."""
    return np.array([anticipated_eea(cell, sensor, n) for n in range(max_visits + 1)])


def search_path_value(grid: ScenarioGrid, path: Sequence[int], sensor: SearchSensorModel) -> float:
    """Joint anticipated accuracy of a search path: visited cells use their
    multi-visit expectation, unvisited cells keep their prior certainty."""
    counts = np.bincount(np.asarray(path, dtype=int), minlength=grid.size)
    log_v = 0.0
    for cell, n in zip(grid.cells, counts):
        log_v += np.log(anticipated_eea(cell, sensor, int(n)))
    return float(np.exp(log_v))


def order_by_preference(prior: Sequence[float], sensor: SearchSensorModel,
                        labels: Sequence[str] | None = None) -> list[int]:
    """Environment indices sorted by ascending expected accuracy V.

    Raises DomainError if two environments share a V value; such environments
    are indistinguishable for search and should be merged.
    """
    v = env_values(prior, sensor)
    order = sorted(range(v.size), key=lambda j: v[j])
    for a, b in zip(order, order[1:]):
        if abs(v[b] - v[a]) <= V_TIE_TOL * max(1.0, abs(v[a])):
            names = labels if labels is not None else [f"w{j + 1}" for j in range(v.size)]
            raise DomainError(
                f"environments {names[a]} and {names[b]} have equal expected accuracy "
                f"{v[a]:.12g}; merge them into one environment")
    return order


def search_objective(grid: ScenarioGrid, sensor: SearchSensorModel, max_visits: int):
    """Multiplicative planner objective: per-cell anticipated accuracy by visit count."""
    from .planner import SeparableObjective

    table = np.array([cell_value_table(c, sensor, max_visits) for c in grid.cells])
    return SeparableObjective.from_factors(table)


class SearchPlanner:
    """Optimal search paths for a grid whose environment beliefs get updated.

    Results are cached on the set of updated beliefs, so replanning for a
    repeated measurement outcome is free.  The prior-belief optimum seeds the
    incumbent of every later solve.
    """

    def __init__(self, grid: ScenarioGrid, sensor: SearchSensorModel, motion, budget: float):
        from .planner import branch_and_bound_optimal

        self._solve = branch_and_bound_optimal
        self.grid, self.sensor, self.motion, self.budget = grid, sensor, motion, budget
        self._base = np.log(np.array([cell_value_table(c, sensor, motion.max_visits)
                                      for c in grid.cells]))
        self._row_cache: dict[tuple, np.ndarray] = {}
        self._plans: dict[tuple, object] = {}
        self.solves = 0
        self.prior_plan = self.plan({})

    def _row(self, cell: int, env: np.ndarray) -> np.ndarray:
        key = (self.grid.cells[cell].key[1], tuple(np.round(env, 15).tolist()))
        row = self._row_cache.get(key)
        if row is None:
            belief = CellBelief(env, self.grid.cells[cell].obj)
            row = np.log(cell_value_table(belief, self.sensor, self.motion.max_visits))
            self._row_cache[key] = row
        return row

    def objective(self, updates: dict[int, np.ndarray]):
        from .planner import SeparableObjective

        table = self._base.copy()
        for cell, env in updates.items():
            table[cell] = self._row(cell, np.asarray(env, dtype=float))
        return SeparableObjective(table, log_space=True)

    def plan(self, updates: dict[int, np.ndarray]):
        key = tuple(sorted((int(c), np.asarray(e, dtype=float).round(15).tobytes())
                           for c, e in updates.items()))
        hit = self._plans.get(key)
        if hit is not None:
            return hit
        seeds = [self.prior_plan.cells] if self._plans else []
        result = self._solve(self.grid, self.motion, self.budget, self.objective(updates),
                             initial=seeds)
        self.solves += 1
        self._plans[key] = result
        return result
