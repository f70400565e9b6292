"""Search-sensor and characterization-sensor observation models.

The search sensor reports ``z = z_d + z_f``: binomially thinned true detections
plus geometrically distributed false alarms, with per-environment parameters.
The characterization sensor is a confusion matrix over environment labels.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from math import comb
from typing import Sequence

import numpy as np

from .grid import DomainError, PROB_TOL


@dataclass(frozen=True)
class SearchSensorModel:
    detection: tuple[float, ...]
    false_alarm: tuple[float, ...]
    max_count: int = 2
    tail_tol: float = 1e-9

    def __post_init__(self):
        object.__setattr__(self, "detection", tuple(float(d) for d in self.detection))
        object.__setattr__(self, "false_alarm", tuple(float(f) for f in self.false_alarm))
        if len(self.detection) != len(self.false_alarm) or not self.detection:
            raise DomainError("detection and false-alarm parameters must pair up per environment")
        for d in self.detection:
            if not 0.0 < d <= 1.0:
                raise DomainError(f"detection probability {d} outside (0, 1]")
        for f in self.false_alarm:
            if not 0.0 <= f < 1.0:
                raise DomainError(f"false-alarm parameter {f} outside [0, 1)")
        if self.max_count < 0:
            raise DomainError("max_count must be nonnegative")
        if not 0.0 < self.tail_tol < 1.0:
            raise DomainError("tail_tol must lie in (0, 1)")

    @property
    def n_envs(self) -> int:
        return len(self.detection)

    @cached_property
    def z_max(self) -> int:
        """Smallest truncation keeping at least ``1 - tail_tol`` mass for every (x, env)."""
        mass = np.zeros((self.n_envs, self.max_count + 1))
        z = 0
        while True:
            for j in range(self.n_envs):
                for x in range(self.max_count + 1):
                    mass[j, x] += search_likelihood(self, j, x, z)
            if z >= self.max_count and mass.min() >= 1.0 - self.tail_tol:
                return z
            z += 1

    @cached_property
    def table(self) -> np.ndarray:
        """P(z | x, w_j) on {0..z_max}, renormalized; shape (m, L+1, z_max+1), read-only."""
        zs = self.z_max
        t = np.array([[[search_likelihood(self, j, x, z) for z in range(zs + 1)]
                       for x in range(self.max_count + 1)]
                      for j in range(self.n_envs)])
        t /= t.sum(axis=2, keepdims=True)
        t.setflags(write=False)
        return t


def false_alarm_pmf(model: SearchSensorModel, env: int, k: int) -> float:
    f = model.false_alarm[env]
    if k < 0:
        return 0.0
    return (1.0 - f) * f ** k


def detection_pmf(model: SearchSensorModel, env: int, x: int, detected: int) -> float:
    if not 0 <= detected <= x:
        raise DomainError(f"cannot detect {detected} of {x} objects")
    d = model.detection[env]
    return comb(x, detected) * d ** detected * (1.0 - d) ** (x - detected)


def search_likelihood(model: SearchSensorModel, env: int, x: int, z: int) -> float:
    """Untruncated P(z | x, w_env): detections convolved with false alarms."""
    if x < 0 or z < 0:
        return 0.0
    return sum(detection_pmf(model, env, x, k) * false_alarm_pmf(model, env, z - k)
               for k in range(min(x, z) + 1))


@dataclass(frozen=True, eq=False)
class CharSensorModel:
    """Confusion matrix ``a[i, j] = P(Y = w_i | E = w_j)``; columns sum to one."""

    confusion: np.ndarray

    def __init__(self, confusion: Sequence[Sequence[float]]):
        a = np.array(confusion, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1] or a.size == 0:
            raise DomainError("confusion matrix must be square")
        if np.any(a < 0) or np.any(a > 1):
            raise DomainError("confusion entries must lie in [0, 1]")
        sums = a.sum(axis=0)
        if np.any(np.abs(sums - 1.0) > PROB_TOL):
            raise DomainError(f"confusion columns must sum to 1, got {sums.tolist()}")
        a.setflags(write=False)
        object.__setattr__(self, "confusion", a)

    @property
    def n_envs(self) -> int:
        return self.confusion.shape[0]

    @classmethod
    def symmetric(cls, diagonal: Sequence[float]) -> "CharSensorModel":
        """Spread each column's off-diagonal mass evenly over the wrong labels."""
        m = len(diagonal)
        if m == 1:
            return cls([[1.0]])
        a = np.empty((m, m))
        for j, d in enumerate(diagonal):
            a[:, j] = (1.0 - d) / (m - 1)
            a[j, j] = d
        return cls(a)

    def __eq__(self, other):
        return isinstance(other, CharSensorModel) and np.array_equal(self.confusion, other.confusion)

    def __hash__(self):
        return hash(self.confusion.tobytes())


def char_likelihood(model: CharSensorModel, true_env: int, observed: int) -> float:
    return float(model.confusion[observed, true_env])
