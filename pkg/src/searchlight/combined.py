"""One vehicle carrying both sensors.

Search counts ``z`` and environment readings ``y`` arrive together, so the
environment used to interpret ``z`` is itself an estimate.  The estimate
minimizes an asymmetric loss on the realized accuracy ``W(w) = max_x P(x|z,w)``,
and a cell's value is the accuracy it delivers under that estimate, averaged
over the joint outcome.
"""

from __future__ import annotations

from functools import lru_cache
from typing import Sequence

import numpy as np

from .characterization import LossParams, char_outcomes, entropy, entropy_change
from .grid import CellBelief, DomainError, MotionModel, PathPlan, ScenarioGrid
from .objective import env_values, joint_count_table, multisets
from .planner import SeparableObjective, branch_and_bound_optimal
from .sensors import CharSensorModel, SearchSensorModel

TIE_TOL = 1e-12


def _weights(params: LossParams) -> tuple[float, float]:
    """(overestimation weight, underestimation weight) for the realized-accuracy loss."""
    return (params.c2, params.c1) if params.swap_w else (params.c1, params.c2)


def loss_w(true_env: int, estimate: int, realized: Sequence[float], params: LossParams) -> float:
    """Loss of estimating ``estimate`` when the realized accuracies are ``realized``."""
    w = np.asarray(realized, dtype=float)
    over, under = _weights(params)
    diff = w[estimate] - w[true_env]
    return over * diff if diff > 0 else under * -diff


def loss_w_matrix(realized: np.ndarray, params: LossParams) -> np.ndarray:
    """``L[..., e, d]`` for realized accuracies with trailing environment axis."""
    w = np.asarray(realized, dtype=float)
    over, under = _weights(params)
    diff = w[..., None, :] - w[..., :, None]  # estimate minus truth
    return np.where(diff > 0, over * diff, -under * diff)


def _rank(realized: np.ndarray, fallback: np.ndarray) -> np.ndarray:
    """Position of each environment when sorted by realized accuracy, ties by fallback."""
    order = np.lexsort((fallback, realized))
    rank = np.empty_like(order)
    rank[order] = np.arange(order.size)
    return rank


def bayes_env_estimate_w(posterior: Sequence[float], realized: Sequence[float],
                         params: LossParams, fallback: Sequence[float] | None = None) -> int:
    """Direct minimizer of posterior expected realized-accuracy loss.

    Near-ties go to the environment ranked highest by realized accuracy, with
    ``fallback`` (normally the expected accuracies) breaking equal realized values.
    """
    p = np.asarray(posterior, dtype=float)
    w = np.asarray(realized, dtype=float)
    if p.size != w.size:
        raise DomainError("posterior and realized accuracies differ in length")
    fb = np.arange(w.size, dtype=float) if fallback is None else np.asarray(fallback, dtype=float)
    exp_loss = p @ loss_w_matrix(w, params)
    best = exp_loss.min()
    cands = np.nonzero(exp_loss <= best + TIE_TOL * (1.0 + abs(best)))[0]
    rank = _rank(w, fb)
    return int(cands[np.argmax(rank[cands])])


def realized_accuracy(joint: np.ndarray, prior_max: float) -> np.ndarray:
    """``W`` per environment from ``P(zset, x | w)`` of shape (m, L+1, M).

    Where ``zset`` is impossible under an environment there is no posterior;
    the prior certainty stands in.
    """
    pz = joint.sum(axis=1)
    top = joint.max(axis=1)
    return np.where(pz > 0, top / np.where(pz > 0, pz, 1.0), prior_max)


@lru_cache(maxsize=1024)
def _combined_value(search: SearchSensorModel, char: CharSensorModel, params: LossParams,
                    env: tuple, obj: tuple, visits: int) -> float:
    if visits == 0:
        return max(obj)
    env_a = np.asarray(env)
    joint = joint_count_table(search, obj, visits)            # (m, L+1, Mz)
    pz_w = joint.sum(axis=1)                                  # (m, Mz)
    w = realized_accuracy(joint, max(obj)).T                  # (Mz, m)
    _, _, post = char_outcomes(env_a, char, visits)           # (My, m)
    index, weight = multisets(char.n_envs, visits)
    py_w = char.confusion[index, :].prod(axis=1) * weight[:, None]  # (My, m)
    p_zy = np.einsum("jz,yj,j->zy", pz_w, py_w, env_a)        # (Mz, My)
    exp_loss = np.einsum("yj,zjd->zyd", post, loss_w_matrix(w, params))
    best = exp_loss.min(axis=2, keepdims=True)
    cand = exp_loss <= best + TIE_TOL * (1.0 + np.abs(best))
    fb = env_values(obj, search)
    rank = np.array([_rank(row, fb) for row in w])            # (Mz, m)
    score = np.where(cand, rank[:, None, :], -1)
    est = score.argmax(axis=2)                                # (Mz, My)
    acc = np.take_along_axis(w, est, axis=1)                  # (Mz, My)
    return float((p_zy * acc).sum())


def expected_combined_cell_value(cell: CellBelief, search: SearchSensorModel,
                                 char: CharSensorModel, params: LossParams,
                                 visits: int = 1) -> float:
    """Accuracy delivered by ``visits`` joint (count, reading) measurements of a cell."""
    if char.n_envs != cell.env.size or search.n_envs != cell.env.size:
        raise DomainError("sensor models do not match the cell's environment alphabet")
    return _combined_value(search, char, params, cell.key[0], cell.key[1], visits)


def combined_cell_table(grid: ScenarioGrid, search: SearchSensorModel, char: CharSensorModel,
                        params: LossParams, max_visits: int) -> np.ndarray:
    return np.array([[expected_combined_cell_value(c, search, char, params, n)
                      for n in range(max_visits + 1)] for c in grid.cells])


def combined_path_optimal(grid: ScenarioGrid, motion: MotionModel, budget: float,
                          search: SearchSensorModel, char: CharSensorModel,
                          params: LossParams = LossParams()) -> PathPlan:
    """Path maximizing the product of per-cell combined accuracies."""
    table = combined_cell_table(grid, search, char, params, motion.max_visits)
    return branch_and_bound_optimal(grid, motion, budget, SeparableObjective.from_factors(table))


def object_entropy_change(cell: CellBelief, search: SearchSensorModel, visits: int = 1) -> float:
    """Expected drop in object-count entropy, with the environment marginalized."""
    if visits == 0:
        return 0.0
    joint = joint_count_table(search, cell.key[1], visits)   # (m, L+1, M)
    pzx = np.einsum("j,jxz->xz", cell.env, joint)
    pz = pzx.sum(axis=0)
    keep = pz > 0
    post = pzx[:, keep] / pz[keep]
    with np.errstate(divide="ignore", invalid="ignore"):
        h = -np.where(post > 0, post * np.log(post), 0.0).sum(axis=0)
    return entropy(cell.obj) - float(np.dot(pz[keep], h))


def combined_entropy_path(grid: ScenarioGrid, motion: MotionModel, budget: float,
                          search: SearchSensorModel, char: CharSensorModel, beta: float = 0.5,
                          weighted: bool = True) -> PathPlan:
    """Path maximizing object entropy reduction plus ``beta`` times environment entropy reduction."""
    if not 0.0 <= beta < 1.0:
        raise DomainError("beta must lie in [0, 1)")
    table = np.array([[object_entropy_change(c, search, n)
                       + beta * entropy_change(c.env, char, weighted, n)
                       for n in range(motion.max_visits + 1)] for c in grid.cells])
    return branch_and_bound_optimal(grid, motion, budget, SeparableObjective(table))
