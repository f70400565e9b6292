"""Budget-constrained path optimization.

Two solvers share one objective protocol: an exhaustive oracle over
:func:`enumerate_feasible_paths` and a best-first branch-and-bound.  Objectives
must depend on the multiset of visited cells only (not on visit order), which
is true of every objective in this package.  Scores are compared internally in
log space for multiplicative objectives.
"""

from __future__ import annotations

import heapq
import itertools
import math
from typing import Callable, Iterable, Sequence

import numpy as np

from .grid import (FREE, LANE, DomainError, MotionModel, PathPlan, ScenarioGrid,
                   enumerate_feasible_paths, path_cost)


class PathObjective:
    """Protocol for planner objectives.

    ``score`` is the exact internal objective (a log value when ``log_space``)
    and must be a deterministic function of the visit counts.  ``upper_bound``
    must dominate the score of every completion reachable with at most
    ``n_more`` further visits and ``remaining`` budget.
    """

    log_space = False
    order_invariant = True

    def score(self, cells: tuple[int, ...], counts: np.ndarray) -> float:
        raise NotImplementedError

    def marginal(self, cell: int, before: int) -> float | None:
        """Score change of one more visit to ``cell``; None when not separable."""
        return None

    def upper_bound(self, cells, counts, score: float, remaining: float, n_more: int) -> float:
        return math.inf

    def value(self, cells: Sequence[int], n_cells: int) -> float:
        cells = tuple(cells)
        counts = np.bincount(np.asarray(cells, dtype=int), minlength=n_cells)
        s = self.score(cells, counts)
        return math.exp(s) if self.log_space else s


class SeparableObjective(PathObjective):
    """Sum over cells of ``table[i, n_i]``; ``table[:, 0]`` holds unvisited terms.

    With ``log_space`` the table holds log factors and the path value is their
    exponentiated sum, i.e. a product of per-cell factors.
    """

    def __init__(self, table: np.ndarray, log_space: bool = False):
        table = np.array(table, dtype=float)
        if table.ndim != 2 or table.shape[1] < 1:
            raise DomainError("objective table must be (cells, visits + 1)")
        self.table = table
        self.log_space = log_space
        self._rows = table.tolist()
        gains = np.diff(table, axis=1)
        self.gains = gains
        self._gain_rows = gains.tolist()
        # positive marginal gains, best first, for the admissible bound
        cells, visits = np.nonzero(gains > 0)
        order = np.argsort(-gains[cells, visits], kind="stable")
        self._ranked = [(float(gains[c, v]), int(c), int(v)) for c, v in
                        zip(cells[order], visits[order])]

    @classmethod
    def from_factors(cls, factors: np.ndarray) -> "SeparableObjective":
        factors = np.asarray(factors, dtype=float)
        if np.any(factors <= 0):
            raise DomainError("multiplicative factors must be positive")
        return cls(np.log(factors), log_space=True)

    @property
    def max_visits(self) -> int:
        return self.table.shape[1] - 1

    def score(self, cells, counts) -> float:
        rows = self._rows
        return math.fsum(rows[i][n] for i, n in enumerate(counts.tolist()))

    def marginal(self, cell: int, before: int) -> float | None:
        row = self._gain_rows[cell]
        return row[before] if before < len(row) else None

    def upper_bound(self, cells, counts, score, remaining, n_more) -> float:
        total = score
        taken = 0
        if n_more <= 0:
            return total
        for g, c, v in self._ranked:
            if v >= counts[c]:
                total += g
                taken += 1
                if taken >= n_more:
                    break
        return total


class FunctionObjective(PathObjective):
    """Wrap a plain ``cells -> value`` callable (and optional bound callable).

    ``bound(cells, remaining_budget)`` must return a value-space upper bound on
    every completion of ``cells``.  Without one, branch-and-bound degenerates to
    exhaustive search.
    """

    def __init__(self, fn: Callable[[tuple[int, ...]], float],
                 bound: Callable[[tuple[int, ...], float], float] | None = None,
                 order_invariant: bool = False):
        self.fn = fn
        self.bound_fn = bound
        self.order_invariant = order_invariant

    def score(self, cells, counts) -> float:
        return float(self.fn(tuple(cells)))

    def upper_bound(self, cells, counts, score, remaining, n_more) -> float:
        if self.bound_fn is None:
            return math.inf
        return float(self.bound_fn(tuple(cells), remaining))


def as_objective(objective) -> PathObjective:
    if isinstance(objective, PathObjective):
        return objective
    if callable(objective):
        return FunctionObjective(objective)
    raise TypeError(f"not an objective: {objective!r}")


def _plan(grid: ScenarioGrid, motion: MotionModel, obj: PathObjective, cells, stats=None) -> PathPlan:
    cells = tuple(int(c) for c in cells)
    return PathPlan(cells, path_cost(grid, cells, motion) if cells else 0.0,
                    obj.value(cells, grid.size), stats or {})


def brute_force_optimal(grid: ScenarioGrid, motion: MotionModel, budget: float, objective,
                        max_paths: int = 200_000) -> PathPlan:
    """Exhaustive maximization; ties go to the lexicographically smallest path."""
    obj = as_objective(objective)
    best_score, best_cells = -math.inf, None
    n = 0
    for cells in enumerate_feasible_paths(grid, motion, budget):
        n += 1
        if n > max_paths:
            raise DomainError(f"more than {max_paths} feasible paths; instance too large "
                              "for exhaustive search")
        counts = np.bincount(np.asarray(cells, dtype=int), minlength=grid.size)
        s = obj.score(cells, counts)
        if s > best_score or (s == best_score and cells < best_cells):
            best_score, best_cells = s, cells
    return _plan(grid, motion, obj, best_cells, {"paths": n})


# -- branch and bound ---------------------------------------------------------

def _lane_capacity(motion: MotionModel, n_cols: int, remaining: float, at_exit: bool) -> int:
    """Most further cell visits affordable; each lane change costs a turn."""
    step, tp = motion.step_cost, motion.turn_penalty
    if not at_exit:
        return int(math.floor(remaining / step + 1e-12))
    t = 0
    while True:
        nxt = t + 1
        need = nxt * step + tp * math.ceil(nxt / n_cols)
        if need > remaining + 1e-12:
            return t
        t = nxt


class _Search:
    def __init__(self, grid, motion, budget, obj: PathObjective):
        self.grid, self.motion, self.budget, self.obj = grid, motion, budget, obj
        self.k = motion.max_visits
        self.best_score = -math.inf
        self.best_cells: tuple[int, ...] = ()
        self.stats = {"expanded": 0, "generated": 0, "evaluated": 0}
        self.seen: dict = {}

    def _slack(self) -> float:
        return 1e-11 * (1.0 + abs(self.best_score)) if math.isfinite(self.best_score) else 0.0

    def offer(self, cells: tuple[int, ...], counts: np.ndarray) -> float:
        self.stats["evaluated"] += 1
        s = self.obj.score(cells, counts)
        if s > self.best_score or (s == self.best_score and cells < self.best_cells):
            self.best_score, self.best_cells = s, cells
        return s

    def promising(self, bound: float, cells: tuple[int, ...]) -> bool:
        slack = self._slack()
        if bound + slack < self.best_score:
            return False
        if bound <= self.best_score + slack and cells > self.best_cells:
            return False
        return True

    def dominated(self, key, cost: float, cells: tuple[int, ...]) -> bool:
        if not self.obj.order_invariant:
            return False
        prev = self.seen.get(key)
        if prev is not None and prev[0] <= cost and prev[1] <= cells:
            return True
        if prev is None or (cost, cells) < prev:
            self.seen[key] = (cost, cells)
        return False


def _segment(grid: ScenarioGrid, row: int, start_col: int, d: int) -> list[int]:
    end = grid.n_cols - 1 if d > 0 else 0
    return [grid.index(row, c) for c in range(start_col, end + d, d)]


def branch_and_bound_optimal(grid: ScenarioGrid, motion: MotionModel, budget: float, objective,
                             bound: Callable | None = None,
                             initial: Iterable[Sequence[int]] = ()) -> PathPlan:
    """Best-first branch-and-bound over feasible paths.

    ``objective`` is a :class:`PathObjective` or a ``cells -> value`` callable;
    ``bound(cells, remaining_budget)`` optionally supplies an admissible bound
    for callables.  ``initial`` paths seed the incumbent.  The result has the
    same value as :func:`brute_force_optimal`; ties resolve to the
    lexicographically smallest cell sequence.
    """
    if budget < 0:
        raise DomainError("budget must be nonnegative")
    obj = FunctionObjective(objective, bound) if (callable(objective) and
                                                  not isinstance(objective, PathObjective)) \
        else as_objective(objective)
    if not 0 <= motion.start < grid.size:
        raise DomainError(f"start cell {motion.start} outside grid")
    search = _Search(grid, motion, budget, obj)
    zero = np.zeros(grid.size, dtype=np.int64)
    search.offer((), zero)
    for cells in initial:
        cells = tuple(int(c) for c in cells)
        try:
            ok = path_cost(grid, cells, motion) <= budget
        except DomainError:
            ok = False
        counts = np.bincount(np.asarray(cells, dtype=int), minlength=grid.size)
        if ok and (not cells or counts.max() <= motion.max_visits):
            search.offer(cells, counts)
    if motion.mode == FREE:
        _bnb_free(search)
    else:
        _bnb_lane(search)
    stats = dict(search.stats)
    return _plan(grid, motion, obj, search.best_cells, stats)


def _bnb_free(search: _Search) -> None:
    grid, motion, obj = search.grid, search.motion, search.obj
    from .grid import _free_next
    step = motion.step_cost
    if step > search.budget:
        return
    heap = []
    tick = itertools.count()

    def push(cells, counts, cost, cell):
        search.stats["generated"] += 1
        s = search.offer(cells, counts)
        remaining = search.budget - cost
        n_more = int(math.floor(remaining / step + 1e-12))
        b = obj.upper_bound(cells, counts, s, remaining, n_more)
        if not search.promising(b, cells):
            return
        if search.dominated((cell, counts.tobytes()), cost, cells):
            return
        heapq.heappush(heap, (-b, cells, next(tick), cost, cell, counts))

    counts = np.zeros(grid.size, dtype=np.int64)
    counts[motion.start] = 1
    push((motion.start,), counts, step, motion.start)
    while heap:
        nb, cells, _, cost, cell, counts = heapq.heappop(heap)
        if not search.promising(-nb, cells):
            continue
        search.stats["expanded"] += 1
        for nxt in _free_next(grid, cell):
            if cost + step > search.budget + 1e-12 or counts[nxt] >= motion.max_visits:
                continue
            c2 = counts.copy()
            c2[nxt] += 1
            push(cells + (nxt,), c2, cost + step, nxt)


def _bnb_lane(search: _Search) -> None:
    """Lane motion expanded one full row pass at a time.

    A path is a sequence of full row passes (the vehicle may only leave a row at
    its end) optionally followed by a truncated final pass.  Full passes enter
    from the west: an east pass and a west pass of the same row cost the same,
    visit the same cells and leave the vehicle at an exit, and the west variant
    is never lexicographically smaller.  Truncated passes are leaves.
    """
    grid, motion, obj = search.grid, search.motion, search.obj
    step, k = motion.step_cost, motion.max_visits
    n_cols = grid.n_cols
    budget = search.budget
    s_row, s_col = grid.rc(motion.start)
    heap = []
    tick = itertools.count()
    eps = 1e-12

    def leaves(cells, counts, score, cost, seg):
        """Offer every truncated prefix of ``seg`` that is affordable."""
        approx = score
        added = []
        c2 = counts
        best_possible = search.best_score - search._slack()
        for n, cell in enumerate(seg[:-1] if len(seg) > 1 else []):
            if cost + (n + 1) * step > budget + eps or counts[cell] >= k:
                return
            g = obj.marginal(cell, int(counts[cell]))
            added.append(cell)
            if g is None:
                c2 = counts.copy()
                np.add.at(c2, added, 1)
                search.offer(cells + tuple(added), c2)
                continue
            approx += g
            if approx >= best_possible:
                c2 = counts.copy()
                np.add.at(c2, added, 1)
                search.offer(cells + tuple(added), c2)
                best_possible = search.best_score - search._slack()

    def full(cells, counts, score, cost, seg, row):
        total = cost + len(seg) * step
        if total > budget + eps or any(counts[c] >= k for c in seg):
            return
        search.stats["generated"] += 1
        c2 = counts.copy()
        c2[seg] += 1
        new_cells = cells + tuple(seg)
        s = search.offer(new_cells, c2)
        remaining = budget - total
        n_more = _lane_capacity(motion, n_cols, remaining, at_exit=True)
        b = obj.upper_bound(new_cells, c2, s, remaining, n_more)
        if not search.promising(b, new_cells):
            return
        if search.dominated((row, c2.tobytes()), total, new_cells):
            return
        heapq.heappush(heap, (-b, new_cells, next(tick), total, row, s, c2))

    zero = np.zeros(grid.size, dtype=np.int64)
    root_score = obj.score((), zero)
    # deployment at the start cell, heading either way
    for d in (+1, -1):
        seg = _segment(grid, s_row, s_col, d)
        if n_cols == 1 and d < 0:
            continue
        leaves((), zero, root_score, 0.0, seg)
        full((), zero, root_score, 0.0, seg, s_row)

    def transitions(cells, counts, score, cost, from_row):
        for row in range(grid.n_rows):
            base = cost + motion.transition_cost(from_row, row)
            if base + step > budget + eps:
                continue
            east = _segment(grid, row, 0, +1)
            if not cells and east[0] == motion.start:
                pass
            else:
                full(cells, counts, score, base, east, row)
                leaves(cells, counts, score, base, east)
            if n_cols > 1:
                west = _segment(grid, row, n_cols - 1, -1)
                if cells or west[0] != motion.start:
                    if not obj.order_invariant:
                        full(cells, counts, score, base, west, row)
                    leaves(cells, counts, score, base, west)

    # launches into other lanes from the deployment point
    transitions((), zero, root_score, 0.0, s_row)

    while heap:
        nb, cells, _, cost, row, score, counts = heapq.heappop(heap)
        if not search.promising(-nb, cells):
            continue
        search.stats["expanded"] += 1
        transitions(cells, counts, score, cost, row)


def default_search_bound(objective: SeparableObjective, cells: Sequence[int], grid: ScenarioGrid,
                         motion: MotionModel, remaining: float, at_exit: bool = False) -> float:
    """Value-space bound: current value times the best remaining per-visit gain
    ratios, one per affordable step."""
    cells = tuple(cells)
    counts = np.bincount(np.asarray(cells, dtype=int), minlength=grid.size)
    s = objective.score(cells, counts)
    if motion.mode == LANE:
        n_more = _lane_capacity(motion, grid.n_cols, remaining, at_exit)
    else:
        n_more = int(math.floor(remaining / motion.step_cost + 1e-12))
    b = objective.upper_bound(cells, counts, s, remaining, n_more)
    return math.exp(b) if objective.log_space else b


def mowing_the_lawn_path(grid: ScenarioGrid, motion: MotionModel, budget: float,
                         start: int | None = None) -> tuple[int, ...]:
    """Boustrophedon coverage from ``start`` until the budget runs out.

    The first row is swept away from the nearer edge; subsequent rows are taken
    in order, bouncing back at the last row, each entered at the end where the
    previous one was left.  Stops early if a cell would exceed its visit cap.
    """
    if motion.mode != LANE:
        raise DomainError("mowing-the-lawn needs lane motion")
    start = motion.start if start is None else start
    row, col = grid.rc(start)
    d = +1 if col <= (grid.n_cols - 1) / 2 else -1
    dr = +1 if row < grid.n_rows - 1 else -1
    counts = [0] * grid.size
    path: list[int] = []
    cost = 0.0
    seg = _segment(grid, row, col, d)
    while True:
        for cell in seg:
            if cost + motion.step_cost > budget + 1e-12 or counts[cell] >= motion.max_visits:
                return tuple(path)
            cost += motion.step_cost
            counts[cell] += 1
            path.append(cell)
        if grid.n_rows > 1:
            if not 0 <= row + dr < grid.n_rows:
                dr = -dr
            nxt = row + dr
        else:
            nxt = row
        cost += motion.transition_cost(row, nxt)
        row = nxt
        d = -d
        seg = _segment(grid, row, 0 if d > 0 else grid.n_cols - 1, d)
