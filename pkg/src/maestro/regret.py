"""Regret score functions: MaxMC, positive value loss, and an exact oracle."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Hashable

import numpy as np

from .core import GaeConfig, Trajectory, gae_advantages
from .errors import ParameterError
from .learner.tabular import (
    DEFAULT_MAX_STATES,
    TabularModel,
    best_response_tabular,
    evaluate_policy,
    lasertag_model,
)

ESTIMATORS = ("maxmc", "pvl", "exact")


@dataclass(frozen=True)
class RegretScore:
    value: float
    estimator: str
    episodes: int = 1
    residual: float | None = None  # Bellman certificate, exact scores only

    def __post_init__(self):
        if self.estimator not in ESTIMATORS:
            raise ParameterError(f"unknown estimator {self.estimator!r}")
        if not math.isfinite(self.value):
            raise ParameterError("regret score must be finite")
        if self.estimator == "pvl" and self.value < 0:
            raise ParameterError("PVL scores are non-negative")

    def __float__(self) -> float:
        return self.value


class MaxReturnRegistry:
    """Highest episodic return seen per ``(environment, co-player)`` key."""

    def __init__(self, data: dict | None = None):
        self._best: dict[Hashable, float] = dict(data or {})

    def __contains__(self, key) -> bool:
        return key in self._best

    def __getitem__(self, key) -> float:
        return self._best[key]

    def __len__(self) -> int:
        return len(self._best)

    def get(self, key, default: float | None = None) -> float | None:
        return self._best.get(key, default)

    def update(self, key, episodic_return: float) -> float:
        old = self._best.get(key)
        new = float(episodic_return) if old is None else max(old, float(episodic_return))
        self._best[key] = new
        return new

    def items(self):
        return self._best.items()

    def to_dict(self) -> list:
        # keys are (env_hash, coplayer_id) tuples; JSON wants lists
        return [[list(k) if isinstance(k, tuple) else k, v] for k, v in self._best.items()]

    @classmethod
    def from_dict(cls, rows: list) -> "MaxReturnRegistry":
        return cls({tuple(k) if isinstance(k, list) else k: float(v) for k, v in rows})


def update_max_return(registry: MaxReturnRegistry, key, episodic_return: float) -> MaxReturnRegistry:
    registry.update(key, episodic_return)
    return registry


def _require_steps(traj: Trajectory) -> None:
    if len(traj) == 0:
        raise ParameterError("cannot score an empty trajectory")


def score_maxmc(traj: Trajectory, r_max: float) -> RegretScore:
    """Mean of ``r_max - V(s_t)`` over the episode. Not clipped at zero."""
    _require_steps(traj)
    v = np.asarray(traj.values, dtype=np.float64)
    return RegretScore(float(np.mean(r_max - v)), "maxmc")


def score_pvl(traj: Trajectory, cfg: GaeConfig) -> RegretScore:
    """Mean of the positively clipped GAE advantages."""
    _require_steps(traj)
    adv = gae_advantages(traj, cfg)
    return RegretScore(float(np.mean(np.maximum(adv, 0.0))), "pvl")


def score_exact(
    env,
    opponent,
    student,
    gamma: float,
    tolerance: float = 1e-6,
    max_states: int = DEFAULT_MAX_STATES,
) -> RegretScore:
    """``V*(s0) - V^student(s0)`` against a fixed opponent.

    ``env`` is LaserTag parameters or a :class:`TabularModel`. The optimal
    value comes from certified value iteration, the student's from an exact
    linear solve.
    """
    model = env if isinstance(env, TabularModel) else lasertag_model(env, 0, max_states)
    br = best_response_tabular(model, opponent, gamma, tolerance, max_states)
    v_student = evaluate_policy(model, student, opponent, gamma)[model.initial_state]
    return RegretScore(float(br.value - v_student), "exact", residual=br.residual)
