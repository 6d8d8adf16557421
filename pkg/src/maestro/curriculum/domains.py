"""Training domains: how to generate environments, collect episodes and update.

The curriculum loop only talks to a domain through this small surface, so the
same loop drives LaserTag and the fully observable matrix-game testbed.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..core import EnvParams, Trajectory, make_rng, register_payload
from ..errors import ParameterError
from ..lasertag.env import (
    DEFAULT_MAX_STEPS,
    MAX_SIDE,
    MIN_SIDE,
    NUM_ACTIONS,
    OBS_SHAPE,
    LaserTagParams,
    generate_env,
    initial_state,
    observe,
    step,
)
from ..learner.policy import FrozenPolicy, MLPPolicy, PolicyParams, TabularPolicy, act, softmax
from ..learner.ppo import PpoConfig, make_optimizer, ppo_update
from ..matrix_lab import MixedStrategy, ZeroSumGame, true_regret
from ..regret import RegretScore, score_exact


@dataclass(frozen=True)
class Episode:
    trajectory: Trajectory
    returns: tuple[float, float]  # undiscounted (student, co-player)
    outcome: float  # student's result: 1 win, 0.5 draw, 0 loss
    length: int


def _params_of(policy) -> PolicyParams:
    return policy.params if isinstance(policy, FrozenPolicy) else policy


class Domain:
    name = ""

    def __init__(self, ppo: PpoConfig):
        self.ppo = ppo
        self.gamma = ppo.gae.gamma

    def init_student(self, rng: np.random.Generator) -> PolicyParams:
        raise NotImplementedError

    def generate(self, seed: int) -> EnvParams:
        raise NotImplementedError

    def rollout(self, env: EnvParams, student, coplayer, rng: np.random.Generator, greedy: bool = False) -> Episode:
        raise NotImplementedError

    def exact_regret(self, env: EnvParams, student, coplayer) -> RegretScore:
        raise NotImplementedError

    def env_stats(self, env: EnvParams) -> tuple[float | None, int | None]:
        return None, None

    def make_optimizer(self):
        return make_optimizer(self.ppo)

    def train(self, student: PolicyParams, optimizer, trajectories, rng) -> tuple[PolicyParams, dict]:
        return ppo_update(student, trajectories, self.ppo, rng, optimizer)


class LaserTagDomain(Domain):
    """The student is agent 0 and the co-player agent 1."""

    name = "lasertag"

    def __init__(
        self,
        ppo: PpoConfig,
        policy: str = "mlp",
        hidden: int = 64,
        min_side: int = MIN_SIDE,
        max_side: int = MAX_SIDE,
        max_episode_steps: int = DEFAULT_MAX_STEPS,
        fixed_level: LaserTagParams | None = None,
        exact_tolerance: float = 1e-6,
    ):
        super().__init__(ppo)
        if policy not in ("mlp", "tabular"):
            raise ParameterError(f"unknown policy kind {policy!r}")
        self.policy, self.hidden = policy, hidden
        self.min_side, self.max_side = min_side, max_side
        self.max_episode_steps = max_episode_steps
        self.fixed_level = fixed_level
        self.exact_tolerance = exact_tolerance

    def init_student(self, rng):
        if self.policy == "tabular":
            return TabularPolicy(NUM_ACTIONS, OBS_SHAPE)
        return MLPPolicy.init(NUM_ACTIONS, OBS_SHAPE, rng, hidden=self.hidden)

    def generate(self, seed):
        if self.fixed_level is not None:
            return EnvParams(self.fixed_level, seed)
        return generate_env(seed, self.min_side, self.max_side)

    def rollout(self, env, student, coplayer, rng, greedy=False):
        level = env.payload
        pi, mu = _params_of(student), _params_of(coplayer)
        state = initial_state(level)
        obs, acts, rews, vals, logps = [], [], [], [], []
        done = False
        while not done:
            o0 = observe(state, 0)
            a0, lp, v = act(pi, o0, rng, greedy)
            a1, _, _ = act(mu, observe(state, 1), rng, greedy)
            state, (r0, _), done = step(state, (a0, a1), self.max_episode_steps)
            obs.append(o0)
            acts.append(a0)
            rews.append(r0)
            vals.append(v)
            logps.append(lp)
        dones = [False] * (len(rews) - 1) + [state.tagged]
        bootstrap = 0.0
        if not state.tagged:
            _, _, bootstrap = act(pi, observe(state, 0), greedy=True)
        traj = Trajectory(obs, acts, rews, vals, dones, self.gamma, logps, bootstrap)
        ret = float(sum(rews))
        outcome = 1.0 if state.winner == 0 else 0.0 if state.winner == 1 else 0.5
        return Episode(traj, (ret, -ret), outcome, len(rews))

    def exact_regret(self, env, student, coplayer):
        return score_exact(env.payload, coplayer, _params_of(student), self.gamma, self.exact_tolerance)

    def env_stats(self, env):
        return env.payload.wall_density, env.payload.grid_size


@register_payload("matrix")
@dataclass(frozen=True)
class MatrixGameParams:
    """One game of a finite suite; ``index`` doubles as the student's observation."""

    index: int
    payoff: tuple[tuple[float, ...], ...]

    @property
    def game(self) -> ZeroSumGame:
        return ZeroSumGame(np.array(self.payoff, dtype=np.float64))

    def to_dict(self) -> dict:
        return {"index": self.index, "payoff": [list(r) for r in self.payoff]}

    @classmethod
    def from_dict(cls, d: dict) -> "MatrixGameParams":
        return cls(int(d["index"]), tuple(tuple(float(x) for x in r) for r in d["payoff"]))


class MatrixDomain(Domain):
    """Fully observable one-shot zero-sum games.

    The student is a tabular policy with one row per game. Every population
    member is an exact best responder to the *current* student: it plays the
    column minimizing the student's expected payoff (lowest index on ties).
    """

    name = "matrix"

    def __init__(self, ppo: PpoConfig, games):
        super().__init__(ppo)
        games = [g if isinstance(g, ZeroSumGame) else ZeroSumGame(np.asarray(g)) for g in games]
        if not games:
            raise ParameterError("matrix suite is empty")
        if len({g.shape for g in games}) != 1:
            raise ParameterError("all games in a suite must share one shape")
        if len(games) > 256:
            raise ParameterError("at most 256 games per suite")
        self.games = games
        self.rows, self.cols = games[0].shape
        self._params = [
            MatrixGameParams(k, tuple(tuple(float(x) for x in r) for r in g.payoff)) for k, g in enumerate(games)
        ]

    @staticmethod
    def observation(index: int) -> np.ndarray:
        return np.array([index], dtype=np.uint8)

    def init_student(self, rng):
        pol = TabularPolicy(self.rows, (1,))
        pol.ensure_keys([self.observation(k) for k in range(len(self.games))])
        return pol

    def generate(self, seed):
        k = int(make_rng(seed).integers(len(self.games)))
        return EnvParams(self._params[k], seed)

    def student_strategy(self, student, index: int) -> np.ndarray:
        probs, _ = _params_of(student).distribution([self.observation(index)])
        return probs[0]

    def best_response(self, student, index: int) -> int:
        x = self.student_strategy(student, index)
        return int(np.argmin(x @ self.games[index].payoff))

    def rollout(self, env, student, coplayer, rng, greedy=False):
        k = env.payload.index
        pi = _params_of(student)
        o = self.observation(k)
        a, lp, v = act(pi, o, rng, greedy)
        b = self.best_response(student, k)
        r = float(self.games[k].payoff[a, b])
        traj = Trajectory([o], [a], [r], [v], [True], self.gamma, [lp])
        outcome = 1.0 if r > 0 else 0.0 if r < 0 else 0.5
        return Episode(traj, (r, -r), outcome, 1)

    def exact_regret(self, env, student, coplayer):
        k = env.payload.index
        x = MixedStrategy(self.student_strategy(student, k))
        y = MixedStrategy.pure(self.cols, self.best_response(student, k))
        return RegretScore(true_regret(self.games[k], x, y), "exact", residual=0.0)

    def strategies(self, student) -> list[MixedStrategy]:
        pi = _params_of(student)
        logits, _ = pi.forward(pi.featurize([self.observation(k) for k in range(len(self.games))]))
        return [MixedStrategy(p / p.sum()) for p in softmax(logits)]
