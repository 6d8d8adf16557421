"""The joint environment/co-player curriculum loop and its baselines.

One call to :func:`training_step` runs one iteration: pick a co-player, pick
an environment (replay or fresh), collect one episode, score it, update the
buffer, and train the student only when the environment came from replay
(DR trains on everything). Each iteration appends one event record; the
event stream alone is enough to audit the run.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from ..core import EnvParams, GaeConfig
from ..errors import ParameterError
from ..learner.policy import FrozenPolicy, PolicyParams
from ..learner.ppo import Adam, Sgd, optimizer_from_state
from ..regret import MaxReturnRegistry, RegretScore, score_maxmc, score_pvl
from .buffer import EnvBuffer, Population, ReplayDistributionConfig, ReplayEntry, replay_distribution, sample_index
from .domains import Domain
from .samplers import (
    SELF,
    MaestroConfig,
    PfspConfig,
    select_coplayer,
    select_coplayer_fsp,
    select_coplayer_pfsp,
    select_coplayer_random,
    select_coplayer_sp,
)

MAESTRO_METHODS = ("maestro", "maestro-r", "maestro-p")
BASELINE_METHODS = tuple(f"{c}-{s}" for c in ("dr", "plr") for s in ("sp", "fsp", "pfsp"))
METHODS = MAESTRO_METHODS + BASELINE_METHODS
SHARED = "shared"
SEED_BOUND = 2**63 - 1


@dataclass
class TrainingState:
    method: str
    domain: Domain
    student: PolicyParams
    optimizer: Adam | Sgd
    population: Population
    replay: ReplayDistributionConfig = field(default_factory=ReplayDistributionConfig)
    maestro: MaestroConfig = field(default_factory=MaestroConfig)
    pfsp: PfspConfig = field(default_factory=PfspConfig)
    shared_buffer: EnvBuffer | None = None
    registry: MaxReturnRegistry = field(default_factory=MaxReturnRegistry)
    iteration: int = 0
    episodes: int = 0
    updates: int = 0
    budget: int | None = None  # total student updates, used for lr annealing
    events: list = field(default_factory=list)

    @property
    def curriculum(self) -> str:
        return "maestro" if self.method in MAESTRO_METHODS else self.method.split("-")[0]

    @property
    def sampler(self) -> str:
        return {"maestro": "maestro", "maestro-r": "random", "maestro-p": "pfsp"}.get(
            self.method, self.method.split("-")[-1]
        )

    def buffer_sizes(self) -> list[int]:
        if self.shared_buffer is not None:
            return [len(self.shared_buffer)]
        return [len(b) for b in self.population.buffers]

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "student": self.student.to_dict(),
            "optimizer": self.optimizer.state_dict(),
            "population": self.population.to_dict(),
            "shared_buffer": None if self.shared_buffer is None else self.shared_buffer.to_dict(),
            "registry": self.registry.to_dict(),
            "iteration": self.iteration,
            "episodes": self.episodes,
            "updates": self.updates,
            "budget": self.budget,
        }

    def load_dict(self, d: dict) -> None:
        """Restore the mutable parts saved by :meth:`to_dict`; configs come from the caller."""
        if d["method"] != self.method:
            raise ParameterError(f"snapshot is for method {d['method']!r}, not {self.method!r}")
        self.student = PolicyParams.from_dict(d["student"])
        self.optimizer = optimizer_from_state(d["optimizer"])
        self.population = Population.from_dict(d["population"])
        self.shared_buffer = None if d["shared_buffer"] is None else EnvBuffer.from_dict(d["shared_buffer"])
        self.registry = MaxReturnRegistry.from_dict(d["registry"])
        self.iteration, self.episodes, self.updates = d["iteration"], d["episodes"], d["updates"]
        self.budget = d["budget"]
        self.events = []


def init_state(
    method: str,
    domain: Domain,
    rng: np.random.Generator,
    replay: ReplayDistributionConfig | None = None,
    maestro: MaestroConfig | None = None,
    pfsp: PfspConfig | None = None,
) -> TrainingState:
    """Fresh student, and a population seeded with one frozen copy of it."""
    if method not in METHODS:
        raise ParameterError(f"unknown method {method!r}; expected one of {', '.join(METHODS)}")
    replay = replay or ReplayDistributionConfig()
    maestro = maestro or MaestroConfig()
    student = domain.init_student(rng)
    per_member = maestro.member_capacity if method in MAESTRO_METHODS else None
    pop = Population(member_capacity=per_member)
    pop.add(FrozenPolicy.freeze(student, 0, 0))
    shared = EnvBuffer(replay.capacity, SHARED) if method.startswith("plr") else None
    return TrainingState(
        method,
        domain,
        student,
        domain.make_optimizer(),
        pop,
        replay,
        maestro,
        pfsp or PfspConfig(),
        shared,
    )


def _choose_coplayer(state: TrainingState, rng) -> int:
    pop, s = state.population, state.sampler
    if s == "maestro":
        return select_coplayer(pop, state.maestro, rng)
    if s == "random":
        return select_coplayer_random(pop, rng)
    if s == "fsp":
        return select_coplayer_fsp(pop, rng)
    if s == "pfsp":
        return select_coplayer_pfsp(pop, SELF, state.pfsp.power, state.pfsp.smoothing, rng)
    return select_coplayer_sp()


def _score(state: TrainingState, episode, env: EnvParams, coplayer, coplayer_id: int) -> RegretScore:
    traj = episode.trajectory
    r_max = state.registry.update((env.env_hash, coplayer_id), traj.episode_return)
    est = state.maestro.estimator
    if est == "maxmc":
        return score_maxmc(traj, r_max)
    if est == "pvl":
        return score_pvl(traj, GaeConfig(state.domain.gamma, state.domain.ppo.gae.lam))
    return state.domain.exact_regret(env, state.student, coplayer)


def _fresh_env(state: TrainingState, rng) -> EnvParams:
    return state.domain.generate(int(rng.integers(SEED_BOUND)))


def _run_iteration(state: TrainingState, rng, idx: int, buffer: EnvBuffer | None, train_all: bool) -> dict:
    """Shared body of MAESTRO and baseline iterations."""
    pop = state.population
    coplayer = state.student if idx == SELF else pop.members[idx]
    coplayer_id = SELF if idx == SELF else coplayer.checkpoint_id
    now = state.episodes

    slot = None
    if buffer is None:
        branch = "dr"
        env = _fresh_env(state, rng)
    else:
        want_replay = rng.random() < state.replay.replay_probability
        if want_replay and len(buffer):
            branch = "replay"
            slot = sample_index(replay_distribution(buffer, state.replay, now).probabilities, rng)
            env = buffer.entries[slot].params
        else:
            # an empty buffer cannot be replayed from, so evaluate a fresh level instead
            branch = "fallback" if want_replay else "generate"
            env = _fresh_env(state, rng)

    episode = state.domain.rollout(env, state.student, coplayer, rng)
    score = _score(state, episode, env, coplayer, coplayer_id)
    trained = train_all or branch == "replay"

    insert = evicted = None
    if buffer is not None:
        if slot is not None:
            entry = replace(buffer.entries[slot], score=score.value, last_sampled_at=now)
        else:
            entry = ReplayEntry(env, score.value, now, now)
        outcome = buffer.insert(entry)
        insert = outcome.action
        evicted = outcome.evicted.params.env_hash if outcome.evicted is not None else None

    diag = {}
    if trained:
        ppo = state.domain.ppo
        if ppo.anneal_lr and state.budget:
            state.optimizer.lr = ppo.learning_rate * max(0.0, 1.0 - state.updates / state.budget)
        state.student, diag = state.domain.train(state.student, state.optimizer, [episode.trajectory], rng)
        state.updates += 1
    if idx != SELF:
        pop.record(idx, episode.outcome)

    added = None
    if trained and state.updates % state.maestro.checkpoint_interval == 0:
        added = len(pop)
        pop.add(FrozenPolicy.freeze(state.student, added, state.updates))

    density, size = state.domain.env_stats(env)
    event = {
        "iteration": state.iteration,
        "episode": now,
        "branch": branch,
        "coplayer_id": coplayer_id,
        "buffer": None if buffer is None else buffer.owner,
        "env_seed": env.seed,
        "env_hash": env.env_hash,
        "score": score.value,
        "trained": trained,
        "insert": insert,
        "evicted": evicted,
        "buffer_sizes": state.buffer_sizes(),
        "population_size": len(pop),
        "checkpoint_added": added,
        "updates": state.updates,
        "return": episode.returns[0],
        "outcome": episode.outcome,
        "length": episode.length,
        "wall_density": density,
        "grid_size": size,
        "loss": diag.get("loss"),
    }
    state.iteration += 1
    state.episodes += 1
    state.events.append(event)
    return event


def maestro_step(state: TrainingState, rng: np.random.Generator) -> TrainingState:
    if state.method not in MAESTRO_METHODS:
        raise ParameterError(f"maestro_step cannot run method {state.method!r}")
    idx = _choose_coplayer(state, rng)
    _run_iteration(state, rng, idx, state.population.buffers[idx], train_all=False)
    return state


def run_baseline(combo: str, state: TrainingState, rng: np.random.Generator) -> TrainingState:
    if combo not in BASELINE_METHODS or combo != state.method:
        raise ParameterError(f"baseline {combo!r} does not match state method {state.method!r}")
    idx = _choose_coplayer(state, rng)
    if state.curriculum == "dr":
        _run_iteration(state, rng, idx, None, train_all=True)
    else:
        _run_iteration(state, rng, idx, state.shared_buffer, train_all=False)
    return state


def training_step(state: TrainingState, rng: np.random.Generator) -> TrainingState:
    if state.method in MAESTRO_METHODS:
        return maestro_step(state, rng)
    return run_baseline(state.method, state, rng)


def train_until(state: TrainingState, rng: np.random.Generator, updates: int, max_iterations: int | None = None):
    """Iterate until the student has received ``updates`` updates in total."""
    if state.budget is None:
        state.budget = updates
    start = state.iteration
    while state.updates < updates:
        if max_iterations is not None and state.iteration - start >= max_iterations:
            break
        training_step(state, rng)
    return state
