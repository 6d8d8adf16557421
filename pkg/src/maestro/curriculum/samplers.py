"""Co-player samplers: MAESTRO's regret-led choice and the SP/FSP/PFSP family."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ParameterError
from ..regret import ESTIMATORS
from .buffer import Population, sample_index

SELF = -1  # sentinel for "play against the live student"


@dataclass(frozen=True)
class MaestroConfig:
    lambda_floor: float = 0.1
    checkpoint_interval: int = 8000
    member_capacity: int = 1000
    estimator: str = "maxmc"

    def __post_init__(self):
        if not (0.0 <= self.lambda_floor <= 1.0):
            raise ParameterError("lambda_floor must lie in [0, 1]")
        if self.checkpoint_interval < 1:
            raise ParameterError("checkpoint_interval must be >= 1")
        if self.member_capacity < 1:
            raise ParameterError("member_capacity must be >= 1")
        if self.estimator not in ESTIMATORS:
            raise ParameterError(f"unknown estimator {self.estimator!r}")


@dataclass(frozen=True)
class PfspConfig:
    power: float = 2.0
    smoothing: float = 0.1

    def __post_init__(self):
        if self.power < 0 or self.smoothing < 0:
            raise ParameterError("PFSP power and smoothing must be >= 0")


def _require_members(pop: Population) -> int:
    if len(pop) == 0:
        raise ParameterError("population is empty")
    return len(pop)


def regret_leader(pop: Population) -> int:
    """Member whose buffer holds the highest score; ties go to the lowest checkpoint id."""
    n = _require_members(pop)
    scores = pop.buffer_max_scores() if pop.has_buffers else np.full(n, -np.inf)
    ids = [m.checkpoint_id for m in pop.members]
    best = max(scores)
    return min((i for i in range(n) if scores[i] == best), key=lambda i: ids[i])


def coplayer_distribution(pop: Population, lambda_floor: float) -> np.ndarray:
    n = _require_members(pop)
    p = np.full(n, lambda_floor / n)
    p[regret_leader(pop)] = (n - lambda_floor * (n - 1)) / n
    return p


def select_coplayer(pop: Population, cfg: MaestroConfig, rng: np.random.Generator) -> int:
    return sample_index(coplayer_distribution(pop, cfg.lambda_floor), rng)


def uniform_distribution(pop: Population) -> np.ndarray:
    n = _require_members(pop)
    return np.full(n, 1.0 / n)


def select_coplayer_random(pop: Population, rng: np.random.Generator) -> int:
    return sample_index(uniform_distribution(pop), rng)


def select_coplayer_fsp(pop: Population, rng: np.random.Generator) -> int:
    return sample_index(uniform_distribution(pop), rng)


def select_coplayer_sp(student_id: int = SELF) -> int:
    return student_id


def pfsp_distribution(win_rates, power: float = 2.0, smoothing: float = 0.1) -> np.ndarray:
    w = (1.0 - np.asarray(win_rates, dtype=np.float64)) ** power + smoothing
    total = w.sum()
    if total <= 0:
        return np.full(len(w), 1.0 / len(w))
    return w / total


def select_coplayer_pfsp(
    pop: Population,
    student_id: int = SELF,
    power: float = 2.0,
    smoothing: float = 0.1,
    rng: np.random.Generator | None = None,
) -> int:
    """Sample by ``(1 - win rate)^p + c``; win rates are the student's against each member."""
    _require_members(pop)
    if rng is None:
        raise ParameterError("PFSP sampling needs an rng")
    return sample_index(pfsp_distribution(pop.win_rates(), power, smoothing), rng)
