"""Top-K environment buffers and the prioritized replay distribution."""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field, replace

import numpy as np

from ..core import EnvParams
from ..errors import ParameterError
from ..learner.policy import FrozenPolicy
from ..matrix_lab import MixedStrategy

WIN_MEMORY = 128


@dataclass(frozen=True)
class ReplayEntry:
    params: EnvParams
    score: float
    last_sampled_at: int = 0
    insert_at: int = 0

    def __post_init__(self):
        if not math.isfinite(self.score):
            raise ParameterError("buffer scores must be finite")

    def to_dict(self) -> dict:
        return {
            "params": self.params.to_dict(),
            "score": self.score,
            "last_sampled_at": self.last_sampled_at,
            "insert_at": self.insert_at,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ReplayEntry":
        return cls(EnvParams.from_dict(d["params"]), d["score"], d["last_sampled_at"], d["insert_at"])


@dataclass(frozen=True)
class InsertOutcome:
    action: str  # "updated" | "appended" | "replaced" | "rejected"
    evicted: ReplayEntry | None = None

    @property
    def stored(self) -> bool:
        return self.action != "rejected"


class EnvBuffer:
    """Keeps the ``capacity`` highest-scoring environments for one owner.

    Environments are unique within a buffer. When full, a new environment
    replaces the lowest-scoring entry (oldest first on ties) only if its
    score is strictly higher.
    """

    def __init__(self, capacity: int, owner=None):
        if capacity < 1:
            raise ParameterError("buffer capacity must be >= 1")
        self.capacity = int(capacity)
        self.owner = owner
        self.entries: list[ReplayEntry] = []
        self._index: dict[EnvParams, int] = {}

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, params: EnvParams) -> bool:
        return params in self._index

    def __iter__(self):
        return iter(self.entries)

    def get(self, params: EnvParams) -> ReplayEntry | None:
        i = self._index.get(params)
        return None if i is None else self.entries[i]

    @property
    def max_score(self) -> float:
        return max((e.score for e in self.entries), default=-math.inf)

    @property
    def min_score(self) -> float:
        return min((e.score for e in self.entries), default=-math.inf)

    def _min_slot(self) -> int:
        return min(range(len(self.entries)), key=lambda i: (self.entries[i].score, self.entries[i].insert_at))

    def insert(self, entry: ReplayEntry) -> InsertOutcome:
        i = self._index.get(entry.params)
        if i is not None:
            self.entries[i] = entry
            return InsertOutcome("updated")
        if len(self.entries) < self.capacity:
            self._index[entry.params] = len(self.entries)
            self.entries.append(entry)
            return InsertOutcome("appended")
        slot = self._min_slot()
        old = self.entries[slot]
        if entry.score <= old.score:
            return InsertOutcome("rejected")
        del self._index[old.params]
        self.entries[slot] = entry
        self._index[entry.params] = slot
        return InsertOutcome("replaced", old)

    def mark_sampled(self, index: int, now: int) -> None:
        self.entries[index] = replace(self.entries[index], last_sampled_at=now)

    def to_dict(self) -> dict:
        return {"capacity": self.capacity, "owner": self.owner, "entries": [e.to_dict() for e in self.entries]}

    @classmethod
    def from_dict(cls, d: dict) -> "EnvBuffer":
        buf = cls(d["capacity"], d["owner"])
        for e in d["entries"]:
            entry = ReplayEntry.from_dict(e)
            buf._index[entry.params] = len(buf.entries)
            buf.entries.append(entry)
        return buf


def buffer_insert(buffer: EnvBuffer, entry: ReplayEntry) -> EnvBuffer:
    buffer.insert(entry)
    return buffer


@dataclass(frozen=True)
class ReplayDistributionConfig:
    replay_probability: float = 0.5
    staleness_coef: float = 0.3
    temperature: float = 0.3
    prioritization: str = "rank"
    capacity: int = 4000  # shared buffer size for the PLR baselines

    def __post_init__(self):
        if not (0.0 <= self.replay_probability <= 1.0):
            raise ParameterError("replay_probability must lie in [0, 1]")
        if not (0.0 <= self.staleness_coef <= 1.0):
            raise ParameterError("staleness_coef must lie in [0, 1]")
        if self.temperature <= 0:
            raise ParameterError("temperature must be positive")
        if self.prioritization != "rank":
            raise ParameterError(f"unsupported prioritization {self.prioritization!r}")
        if self.capacity < 1:
            raise ParameterError("capacity must be >= 1")


def replay_distribution(buffer: EnvBuffer, cfg: ReplayDistributionConfig, now: int) -> MixedStrategy:
    """Rank-prioritized scores mixed with staleness, in buffer order."""
    n = len(buffer)
    if n == 0:
        raise ParameterError("replay from an empty buffer")
    scores = np.array([e.score for e in buffer.entries])
    inserted = np.array([e.insert_at for e in buffer.entries])
    # rank 1 = highest score; older insert first among equal scores
    order = np.lexsort((inserted, -scores))
    ranks = np.empty(n)
    ranks[order] = np.arange(1, n + 1)
    p_score = ranks ** (-1.0 / cfg.temperature)
    p_score /= p_score.sum()
    stale = np.array([now - e.last_sampled_at for e in buffer.entries], dtype=np.float64)
    stale = np.maximum(stale, 0.0)
    p_stale = stale / stale.sum() if stale.sum() > 0 else np.full(n, 1.0 / n)
    p = (1.0 - cfg.staleness_coef) * p_score + cfg.staleness_coef * p_stale
    return MixedStrategy(p / p.sum())


def sample_index(probs: np.ndarray, rng: np.random.Generator) -> int:
    """Inverse-CDF draw using one uniform variate."""
    c = np.cumsum(probs)
    i = int(np.searchsorted(c, rng.random() * c[-1], side="right"))
    return min(i, len(probs) - 1)


@dataclass
class Population:
    """Frozen co-players, optionally each with its own environment buffer."""

    members: list[FrozenPolicy] = field(default_factory=list)
    buffers: list[EnvBuffer] = field(default_factory=list)
    win_history: list[deque] = field(default_factory=list)
    member_capacity: int | None = 1000  # None disables per-member buffers
    win_memory: int = WIN_MEMORY

    def __len__(self) -> int:
        return len(self.members)

    @property
    def has_buffers(self) -> bool:
        return self.member_capacity is not None

    def add(self, member: FrozenPolicy) -> int:
        self.members.append(member)
        if self.has_buffers:
            self.buffers.append(EnvBuffer(self.member_capacity, member.checkpoint_id))
        self.win_history.append(deque(maxlen=self.win_memory))
        return len(self.members) - 1

    def record(self, index: int, outcome: float) -> None:
        """Store the student's result against member ``index``: 1 win, 0.5 draw, 0 loss."""
        self.win_history[index].append(float(outcome))

    def win_rate(self, index: int) -> float:
        h = self.win_history[index]
        return float(np.mean(h)) if h else 0.5

    def win_rates(self) -> np.ndarray:
        return np.array([self.win_rate(i) for i in range(len(self))])

    def buffer_max_scores(self) -> np.ndarray:
        return np.array([b.max_score for b in self.buffers])

    def to_dict(self) -> dict:
        return {
            "member_capacity": self.member_capacity,
            "win_memory": self.win_memory,
            "members": [m.to_dict() for m in self.members],
            "buffers": [b.to_dict() for b in self.buffers],
            "win_history": [list(h) for h in self.win_history],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Population":
        pop = cls(member_capacity=d["member_capacity"], win_memory=d["win_memory"])
        pop.members = [FrozenPolicy.from_dict(m) for m in d["members"]]
        pop.buffers = [EnvBuffer.from_dict(b) for b in d["buffers"]]
        pop.win_history = [deque(h, maxlen=pop.win_memory) for h in d["win_history"]]
        return pop
