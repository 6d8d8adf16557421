"""Shared game abstraction: environment parameters, trajectories, returns and GAE.

Everything here is a value type or a pure function. Randomness is always
passed in explicitly as a :class:`numpy.random.Generator`.
"""
from __future__ import annotations

import hashlib
import json
from functools import cached_property
from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

import numpy as np

from . import kernels
from .errors import ParameterError

SERIAL_VERSION = 1

_PAYLOAD_TYPES: dict[str, type] = {}


def register_payload(kind: str) -> Callable[[type], type]:
    """Class decorator registering an environment payload for serialization.

    A payload class must be hashable, define ``kind`` and provide
    ``to_dict()`` / ``from_dict(d)``.
    """

    def wrap(cls: type) -> type:
        cls.kind = kind
        _PAYLOAD_TYPES[kind] = cls
        return cls

    return wrap


def make_rng(seed: int | None) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


def split_rng(rng: np.random.Generator, n: int) -> list[np.random.Generator]:
    """Derive ``n`` independent child generators from ``rng``."""
    return list(rng.spawn(n))


def _check_gamma(gamma: float) -> None:
    if not (0.0 < gamma <= 1.0):
        raise ParameterError(f"gamma must lie in (0, 1], got {gamma}")


@dataclass(frozen=True)
class UposgSpec:
    action_space: tuple[str, ...]
    observation_shape: tuple[int, ...]
    gamma: float
    max_episode_steps: int
    num_players: int = 2

    def __post_init__(self):
        if self.num_players != 2:
            raise ParameterError("only two-player games are supported")
        _check_gamma(self.gamma)
        if self.max_episode_steps < 1:
            raise ParameterError("max_episode_steps must be >= 1")

    @property
    def num_actions(self) -> int:
        return len(self.action_space)


@dataclass(frozen=True)
class EnvParams:
    """One point in an environment's free-parameter space.

    Equality and hashing look only at ``payload``; ``seed`` records how the
    payload was produced and is carried along for logging and regeneration.
    """

    payload: Any
    seed: int | None = field(default=None, compare=False)

    def to_dict(self) -> dict:
        return {
            "version": SERIAL_VERSION,
            "kind": self.payload.kind,
            "seed": self.seed,
            "payload": self.payload.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "EnvParams":
        if d.get("version") != SERIAL_VERSION:
            raise ParameterError(f"unsupported EnvParams version {d.get('version')!r}")
        try:
            ptype = _PAYLOAD_TYPES[d["kind"]]
        except KeyError:
            raise ParameterError(f"unknown payload kind {d.get('kind')!r}") from None
        return cls(ptype.from_dict(d["payload"]), d["seed"])

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    @classmethod
    def from_json(cls, text: str) -> "EnvParams":
        return cls.from_dict(json.loads(text))

    @cached_property
    def env_hash(self) -> str:
        """Stable content hash of the payload (16 hex chars)."""
        blob = json.dumps(
            {"kind": self.payload.kind, "payload": self.payload.to_dict()},
            sort_keys=True,
            separators=(",", ":"),
        )
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


@dataclass(frozen=True)
class GaeConfig:
    gamma: float = 0.995
    lam: float = 0.95

    def __post_init__(self):
        _check_gamma(self.gamma)
        if not (0.0 <= self.lam <= 1.0):
            raise ParameterError(f"lambda must lie in [0, 1], got {self.lam}")


@dataclass
class Trajectory:
    """One episode from the student's point of view.

    ``bootstrap_value`` is the critic's estimate for the state after the last
    step. It is only used when the episode was truncated (final ``done`` is
    False); true terminations bootstrap with 0.
    """

    observations: list
    actions: list[int]
    rewards: list[float]
    values: list[float]
    dones: list[bool]
    gamma: float
    log_probs: list[float] = field(default_factory=list)
    bootstrap_value: float = 0.0

    def __post_init__(self):
        n = len(self.rewards)
        lens = {len(self.observations), len(self.actions), len(self.values), len(self.dones)}
        if self.log_probs:
            lens.add(len(self.log_probs))
        if lens != {n}:
            raise ParameterError("trajectory fields must share one length")
        if any(self.dones[:-1]):
            raise ParameterError("only the final step may be terminal")
        _check_gamma(self.gamma)

    def __len__(self) -> int:
        return len(self.rewards)

    @property
    def terminated(self) -> bool:
        return bool(self.dones) and bool(self.dones[-1])

    @property
    def episode_return(self) -> float:
        return discounted_return(self.rewards, self.gamma)

    @property
    def max_return_bound(self) -> float:
        """This episode's realized return, the candidate for the running max."""
        return self.episode_return

    def to_dict(self) -> dict:
        return {
            "version": SERIAL_VERSION,
            "observations": [np.asarray(o).tolist() for o in self.observations],
            "actions": [int(a) for a in self.actions],
            "rewards": [float(r) for r in self.rewards],
            "values": [float(v) for v in self.values],
            "dones": [bool(d) for d in self.dones],
            "log_probs": [float(x) for x in self.log_probs],
            "gamma": self.gamma,
            "bootstrap_value": float(self.bootstrap_value),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Trajectory":
        if d.get("version") != SERIAL_VERSION:
            raise ParameterError(f"unsupported Trajectory version {d.get('version')!r}")
        return cls(
            observations=[np.asarray(o, dtype=np.uint8) for o in d["observations"]],
            actions=list(d["actions"]),
            rewards=list(d["rewards"]),
            values=list(d["values"]),
            dones=list(d["dones"]),
            gamma=d["gamma"],
            log_probs=list(d["log_probs"]),
            bootstrap_value=d["bootstrap_value"],
        )


def discounted_return(rewards: Sequence[float], gamma: float) -> float:
    _check_gamma(gamma)
    total = 0.0
    for r in reversed(rewards):
        total = float(r) + gamma * total
    return total


def _next_values(traj: Trajectory) -> np.ndarray:
    v = np.asarray(traj.values, dtype=np.float64)
    nxt = np.empty_like(v)
    nxt[:-1] = v[1:]
    if len(v):
        nxt[-1] = 0.0 if traj.dones[-1] else traj.bootstrap_value
    return nxt


def td_errors(traj: Trajectory, gamma: float) -> np.ndarray:
    """One-step TD errors ``r_t + gamma * V(s_{t+1}) * (1 - done_t) - V(s_t)``."""
    _check_gamma(gamma)
    r = np.asarray(traj.rewards, dtype=np.float64)
    v = np.asarray(traj.values, dtype=np.float64)
    nonterminal = 1.0 - np.asarray(traj.dones, dtype=np.float64)
    return r + gamma * _next_values(traj) * nonterminal - v


def gae_advantages(traj: Trajectory, cfg: GaeConfig) -> np.ndarray:
    """Generalized advantage estimates, computed in one backward pass."""
    return kernels.gae_backward(
        np.asarray(traj.rewards, dtype=np.float64),
        np.asarray(traj.values, dtype=np.float64),
        np.asarray(traj.dones, dtype=np.uint8),
        float(traj.bootstrap_value),
        cfg.gamma,
        cfg.lam,
    )


def value_targets(traj: Trajectory, cfg: GaeConfig) -> np.ndarray:
    return gae_advantages(traj, cfg) + np.asarray(traj.values, dtype=np.float64)
