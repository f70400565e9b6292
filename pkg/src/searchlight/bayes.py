"""Sequential Bayesian updates for object counts and environment labels."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .grid import DomainError
from .sensors import CharSensorModel, SearchSensorModel


def _normalize(unnorm: np.ndarray, what: str) -> np.ndarray:
    total = unnorm.sum()
    if not total > 0.0:
        raise DomainError(f"zero evidence: {what} is impossible under the prior")
    return unnorm / total


def _zs(z) -> list[int]:
    return [int(z)] if np.ndim(z) == 0 else [int(v) for v in z]


def search_set_likelihood(sensor: SearchSensorModel, env: int, z) -> np.ndarray:
    """P(z_1..z_n | x, w_env) over x, from the truncated table (product of visits)."""
    table = sensor.table
    lik = np.ones(sensor.max_count + 1)
    for v in _zs(z):
        if not 0 <= v <= sensor.z_max:
            raise DomainError(f"observation z={v} outside 0..{sensor.z_max}")
        lik = lik * table[env, :, v]
    return lik


def update_objects(prior: Sequence[float], z, env: int, sensor: SearchSensorModel) -> np.ndarray:
    """P(X | z, w_env).  ``z`` may be a single count or a sequence of counts."""
    prior = np.asarray(prior, dtype=float)
    if prior.size != sensor.max_count + 1:
        raise DomainError("prior length does not match sensor max_count")
    return _normalize(search_set_likelihood(sensor, env, z) * prior,
                      f"search observation {z} in environment {env}")


def _ys(y) -> list[int]:
    return [int(y)] if np.ndim(y) == 0 else [int(v) for v in y]


def char_set_likelihood(sensor: CharSensorModel, y) -> np.ndarray:
    """P(y_1..y_n | w_j) over j."""
    lik = np.ones(sensor.n_envs)
    for v in _ys(y):
        if not 0 <= v < sensor.n_envs:
            raise DomainError(f"environment observation {v} outside alphabet")
        lik = lik * sensor.confusion[v, :]
    return lik


def update_env(prior: Sequence[float], y, sensor: CharSensorModel) -> np.ndarray:
    """P(E | y).  ``y`` may be a single label index or a sequence of them."""
    prior = np.asarray(prior, dtype=float)
    if prior.size != sensor.n_envs:
        raise DomainError("environment prior does not match confusion matrix size")
    return _normalize(char_set_likelihood(sensor, y) * prior, f"environment observation {y}")


def update_joint(prior_obj: Sequence[float], prior_env: Sequence[float], z, y,
                 search: SearchSensorModel, char: CharSensorModel) -> np.ndarray:
    """Object posterior unconditioned on environment: sum_j P(X|z,w_j) P(w_j|y).

    Environments under which ``z`` is impossible carry no object posterior; they
    are dropped and the mixture renormalized.
    """
    env_post = update_env(prior_env, y, char)
    prior_obj = np.asarray(prior_obj, dtype=float)
    mix = np.zeros(prior_obj.size)
    for j, wj in enumerate(env_post):
        if wj == 0.0:
            continue
        unnorm = search_set_likelihood(search, j, z) * prior_obj
        if unnorm.sum() > 0.0:
            mix += wj * unnorm / unnorm.sum()
    return _normalize(mix, f"joint observation z={z}, y={y}")
