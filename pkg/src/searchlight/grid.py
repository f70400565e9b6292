"""Search grid, per-cell beliefs and the motion/cost model shared by all planners."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

PROB_TOL = 1e-9

LANE = "lane"
FREE = "free"


class DomainError(ValueError):
    """Raised when an input lies outside the domain of an operation."""


def _as_prob_vector(values: Sequence[float], what: str) -> np.ndarray:
    arr = np.array(values, dtype=float)
    if arr.ndim != 1 or arr.size == 0:
        raise DomainError(f"{what} must be a non-empty 1-d vector")
    if np.any(arr < -PROB_TOL) or np.any(arr > 1 + PROB_TOL):
        raise DomainError(f"{what} has entries outside [0, 1]: {arr.tolist()}")
    if abs(arr.sum() - 1.0) > PROB_TOL:
        raise DomainError(f"{what} sums to {arr.sum():.12g}, expected 1")
    arr = np.clip(arr, 0.0, 1.0)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class EnvAlphabet:
    labels: tuple[str, ...]

    def __post_init__(self):
        if len(self.labels) < 1:
            raise DomainError("at least one environment is required")
        if len(set(self.labels)) != len(self.labels):
            raise DomainError(f"duplicate environment labels: {self.labels}")

    def __len__(self) -> int:
        return len(self.labels)

    def reordered(self, order: Sequence[int]) -> "EnvAlphabet":
        return EnvAlphabet(tuple(self.labels[j] for j in order))


@dataclass(frozen=True, eq=False)
class CellBelief:
    """Environment distribution and object-count distribution of one cell."""

    env: np.ndarray
    obj: np.ndarray

    def __init__(self, env: Sequence[float], obj: Sequence[float]):
        object.__setattr__(self, "env", _as_prob_vector(env, "environment distribution"))
        object.__setattr__(self, "obj", _as_prob_vector(obj, "object-count distribution"))

    @property
    def max_count(self) -> int:
        return self.obj.size - 1

    @property
    def key(self) -> tuple:
        # hashable identity used by per-belief caches
        return (tuple(self.env.tolist()), tuple(self.obj.tolist()))

    def with_env(self, env: Sequence[float]) -> "CellBelief":
        return CellBelief(env, self.obj)

    def __eq__(self, other):
        return isinstance(other, CellBelief) and self.key == other.key

    def __hash__(self):
        return hash(self.key)


def uniform_counts(max_count: int) -> np.ndarray:
    return np.full(max_count + 1, 1.0 / (max_count + 1))


@dataclass(frozen=True)
class ScenarioGrid:
    n_rows: int
    n_cols: int
    cells: tuple[CellBelief, ...]
    regions: tuple[str, ...] | None = None

    def __post_init__(self):
        if self.n_rows < 1 or self.n_cols < 1:
            raise DomainError("grid dimensions must be positive")
        if len(self.cells) != self.n_rows * self.n_cols:
            raise DomainError(
                f"expected {self.n_rows * self.n_cols} cells, got {len(self.cells)}")
        m = {c.env.size for c in self.cells}
        if len(m) != 1:
            raise DomainError("all cells must share one environment alphabet")
        if self.regions is not None and len(self.regions) != len(self.cells):
            raise DomainError("region labels must cover every cell")

    @property
    def size(self) -> int:
        return self.n_rows * self.n_cols

    @property
    def n_envs(self) -> int:
        return self.cells[0].env.size

    def rc(self, cell: int) -> tuple[int, int]:
        return divmod(cell, self.n_cols)

    def index(self, row: int, col: int) -> int:
        return row * self.n_cols + col

    def row_cells(self, row: int) -> list[int]:
        return list(range(row * self.n_cols, (row + 1) * self.n_cols))

    def region_cells(self, label: str) -> set[int]:
        if self.regions is None:
            return set()
        return {i for i, r in enumerate(self.regions) if r == label}

    def prior_max(self) -> np.ndarray:
        return np.array([c.obj.max() for c in self.cells])

    def with_cells(self, cells: Sequence[CellBelief]) -> "ScenarioGrid":
        return ScenarioGrid(self.n_rows, self.n_cols, tuple(cells), self.regions)

    def with_env(self, updates: dict[int, np.ndarray]) -> "ScenarioGrid":
        cells = list(self.cells)
        for i, env in updates.items():
            cells[i] = cells[i].with_env(env)
        return self.with_cells(cells)


@dataclass(frozen=True)
class MotionModel:
    """Vehicle motion and cost accounting.

    ``lane`` mode: the vehicle moves forward along a row; it may only leave a
    row at its far end, and changing to row ``j`` from row ``i`` costs
    ``step_cost * |i - j| + turn_penalty`` on top of the cells visited.  The
    vehicle is deployed at ``start``; entering any other row end as the first
    cell is charged like a row change from the start row.

    ``free`` mode: 4-connected moves starting at ``start``.

    Every visited cell costs ``step_cost``.
    """

    mode: str = LANE
    turn_penalty: int = 2
    step_cost: float = 1.0
    max_visits: int = 3
    start: int = 0

    def __post_init__(self):
        if self.mode not in (LANE, FREE):
            raise DomainError(f"unknown motion mode {self.mode!r}")
        if self.step_cost <= 0:
            raise DomainError("step_cost must be positive")
        if self.turn_penalty < 0:
            raise DomainError("turn_penalty must be nonnegative")
        if self.max_visits < 1:
            raise DomainError("max_visits must be at least 1")

    def transition_cost(self, row_from: int, row_to: int) -> float:
        return self.step_cost * abs(row_from - row_to) + self.turn_penalty


def _check_start(grid: ScenarioGrid, motion: MotionModel, start: int | None) -> int:
    start = motion.start if start is None else start
    if not 0 <= start < grid.size:
        raise DomainError(f"start cell {start} outside grid of {grid.size} cells")
    return start


# Lane-mode bookkeeping: a state maps travel direction (+1 east, -1 west) to the
# cheapest cost of reaching the current cell while heading that way.

def _lane_is_exit(col: int, d: int, n_cols: int) -> bool:
    return col == (n_cols - 1 if d > 0 else 0)


def _lane_entries(grid: ScenarioGrid) -> list[tuple[int, int]]:
    """Cells where a row can be entered from off-grid, with the resulting heading."""
    out = []
    for r in range(grid.n_rows):
        out.append((grid.index(r, 0), +1))
        out.append((grid.index(r, grid.n_cols - 1), -1))
    return out


def _lane_first(grid: ScenarioGrid, motion: MotionModel, start: int) -> dict[int, dict[int, float]]:
    s_row = start // grid.n_cols
    first: dict[int, dict[int, float]] = {start: {+1: motion.step_cost, -1: motion.step_cost}}
    for cell, d in _lane_entries(grid):
        if cell == start:
            continue
        c = motion.transition_cost(s_row, cell // grid.n_cols) + motion.step_cost
        states = first.setdefault(cell, {})
        if c < states.get(d, np.inf):
            states[d] = c
    return first


def _lane_next(grid: ScenarioGrid, motion: MotionModel, cell: int,
               states: dict[int, float]) -> dict[int, dict[int, float]]:
    row, col = grid.rc(cell)
    out: dict[int, dict[int, float]] = {}

    def put(nxt, d, c):
        st = out.setdefault(nxt, {})
        if c < st.get(d, np.inf):
            st[d] = c

    exit_cost = min((c for d, c in states.items() if _lane_is_exit(col, d, grid.n_cols)),
                    default=None)
    for d, c in states.items():
        ncol = col + d
        if 0 <= ncol < grid.n_cols:
            put(cell + d, d, c + motion.step_cost)
    if exit_cost is not None:
        for nxt, d in _lane_entries(grid):
            put(nxt, d, exit_cost + motion.transition_cost(row, nxt // grid.n_cols)
                + motion.step_cost)
    return out


def _free_next(grid: ScenarioGrid, cell: int) -> list[int]:
    r, c = grid.rc(cell)
    out = []
    for dr, dc in ((-1, 0), (0, -1), (0, 1), (1, 0)):
        rr, cc = r + dr, c + dc
        if 0 <= rr < grid.n_rows and 0 <= cc < grid.n_cols:
            out.append(grid.index(rr, cc))
    return sorted(out)


def path_cost(grid: ScenarioGrid, path: Sequence[int], motion: MotionModel) -> float:
    """Cheapest traversal cost of ``path`` under ``motion``; 0 for the empty path.

    Raises DomainError when the sequence is not traversable in the given mode.
    """
    path = list(path)
    if not path:
        return 0.0
    for cell in path:
        if not 0 <= cell < grid.size:
            raise DomainError(f"cell {cell} outside grid")
    start = _check_start(grid, motion, None)
    if motion.mode == FREE:
        if path[0] != start:
            raise DomainError(f"free-mode paths must begin at start cell {start}")
        for a, b in zip(path, path[1:]):
            if b not in _free_next(grid, a):
                raise DomainError(f"cells {a} and {b} are not adjacent")
        return motion.step_cost * len(path)

    states = _lane_first(grid, motion, start).get(path[0])
    if not states:
        raise DomainError(f"lane path cannot begin at cell {path[0]}")
    for a, b in zip(path, path[1:]):
        states = _lane_next(grid, motion, a, states).get(b)
        if not states:
            raise DomainError(f"lane motion cannot move from cell {a} to cell {b}")
    return min(states.values())


def enumerate_feasible_paths(grid: ScenarioGrid, motion: MotionModel, budget: float,
                             start: int | None = None) -> Iterator[tuple[int, ...]]:
    """Yield every distinct cell sequence with cost <= budget, depth-first.

    The empty path is always yielded first.  Visits per cell are capped at
    ``motion.max_visits``.
    """
    start = _check_start(grid, motion, start)
    if budget < 0:
        raise DomainError("budget must be nonnegative")
    if motion.start != start:
        motion = MotionModel(motion.mode, motion.turn_penalty, motion.step_cost,
                             motion.max_visits, start)
    yield ()
    counts = [0] * grid.size
    path: list[int] = []

    if motion.mode == FREE:
        def walk(cell: int, cost: float):
            for nxt in _free_next(grid, cell):
                c = cost + motion.step_cost
                if c <= budget and counts[nxt] < motion.max_visits:
                    path.append(nxt)
                    counts[nxt] += 1
                    yield tuple(path)
                    yield from walk(nxt, c)
                    counts[nxt] -= 1
                    path.pop()

        if motion.step_cost <= budget:
            path.append(start)
            counts[start] += 1
            yield (start,)
            yield from walk(start, motion.step_cost)
        return

    def lane_walk(options: dict[int, dict[int, float]]):
        for nxt in sorted(options):
            states = {d: c for d, c in options[nxt].items() if c <= budget}
            if not states or counts[nxt] >= motion.max_visits:
                continue
            path.append(nxt)
            counts[nxt] += 1
            yield tuple(path)
            yield from lane_walk(_lane_next(grid, motion, nxt, states))
            counts[nxt] -= 1
            path.pop()

    yield from lane_walk(_lane_first(grid, motion, start))


@dataclass(frozen=True)
class PathPlan:
    cells: tuple[int, ...]
    cost: float
    value: float
    stats: dict = field(default_factory=dict, compare=False)

    def visit_counts(self, n_cells: int) -> np.ndarray:
        return np.bincount(np.asarray(self.cells, dtype=int), minlength=n_cells)

    @property
    def cell_set(self) -> frozenset[int]:
        return frozenset(self.cells)
