"""Exact tabular solvers over enumerated joint states.

A :class:`TabularModel` is a two-player game with enumerated states whose
transitions are deterministic given both actions. Fixing the opponent's
(stochastic) policy induces a single-agent MDP for the student, which value
iteration solves to a certified Bellman residual.

The episode step limit is not part of the state: the model is the stationary
discounted game, so values here are infinite-horizon discounted values.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .. import kernels
from ..core import EnvParams
from ..errors import CapacityError, ConvergenceError, ParameterError
from .policy import FrozenPolicy, PolicyParams, TabularPolicy

DEFAULT_MAX_STATES = 2_000_000


@dataclass
class TabularModel:
    next_state: np.ndarray  # int32 [S, A, B]
    reward: np.ndarray  # float64 [S, A, B], student's reward
    done: np.ndarray  # uint8 [S, A, B]
    initial_state: int = 0
    student_obs: np.ndarray | None = None  # [S, *obs_shape]
    opponent_obs: np.ndarray | None = None
    poses: np.ndarray | None = None  # [S, 6] for LaserTag models

    def __post_init__(self):
        self.next_state = np.ascontiguousarray(self.next_state, dtype=np.int32)
        self.reward = np.ascontiguousarray(self.reward, dtype=np.float64)
        self.done = np.ascontiguousarray(self.done, dtype=np.uint8)
        if not (self.next_state.shape == self.reward.shape == self.done.shape) or self.next_state.ndim != 3:
            raise ParameterError("next_state, reward and done must share shape [S, A, B]")
        if not (0 <= self.initial_state < self.num_states):
            raise ParameterError("initial_state out of range")

    @property
    def num_states(self) -> int:
        return self.next_state.shape[0]

    @property
    def num_actions(self) -> int:
        return self.next_state.shape[1]

    @property
    def num_opponent_actions(self) -> int:
        return self.next_state.shape[2]

    def permute_actions(self, perm) -> "TabularModel":
        """Relabel student actions: new action ``i`` behaves like old ``perm[i]``."""
        perm = np.asarray(perm)
        return TabularModel(
            self.next_state[:, perm],
            self.reward[:, perm],
            self.done[:, perm],
            self.initial_state,
            self.student_obs,
            self.opponent_obs,
            self.poses,
        )


def _encode(poses: np.ndarray, w: int, h: int) -> np.ndarray:
    cell0 = poses[:, 1] * w + poses[:, 0]
    cell1 = poses[:, 4] * w + poses[:, 3]
    n = w * h * 4
    return (cell0 * 4 + poses[:, 2]) * n + cell1 * 4 + poses[:, 5]


def _all_action_pairs(n: int, num_actions: int = 5):
    a = np.repeat(np.arange(num_actions), num_actions)
    b = np.tile(np.arange(num_actions), num_actions)
    return np.tile(a, n), np.tile(b, n)


def lasertag_model(params, student: int = 0, max_states: int = DEFAULT_MAX_STATES) -> TabularModel:
    """Enumerate every joint state reachable from the level's start."""
    from ..lasertag.env import NUM_ACTIONS, LaserTagParams

    if isinstance(params, EnvParams):
        params = params.payload
    if not isinstance(params, LaserTagParams):
        raise ParameterError("expected LaserTag parameters")
    if student not in (0, 1):
        raise ParameterError("student must be agent 0 or 1")
    walls = np.ascontiguousarray(params.wall_array)
    w, h = params.width, params.height
    free = int((walls == 0).sum())
    bound = 16 * free * (free - 1)
    if bound > max_states:
        raise CapacityError(f"up to {bound} joint states exceeds bound {max_states}")

    start = np.array([[*params.agent_starts[0], *params.agent_starts[1]]], dtype=np.int64)
    visited = {int(_encode(start, w, h)[0]): 0}
    order = [start[0]]
    frontier = start
    k = NUM_ACTIONS * NUM_ACTIONS
    while len(frontier):
        a0, a1 = _all_action_pairs(len(frontier), NUM_ACTIONS)
        src = np.repeat(frontier, k, axis=0)
        nxt, hits = kernels.lt_step_batch(walls, src, a0, a1)
        live = (hits[:, 0] == 0) & (hits[:, 1] == 0)
        cand = nxt[live]
        codes = _encode(cand, w, h)
        uniq, first = np.unique(codes, return_index=True)
        fresh = []
        for c, i in zip(uniq.tolist(), first.tolist()):
            if c not in visited:
                visited[c] = len(order)
                order.append(cand[i])
                fresh.append(cand[i])
        frontier = np.array(fresh, dtype=np.int64).reshape(-1, 6)

    poses = np.array(order, dtype=np.int64)
    n = len(poses)
    a0, a1 = _all_action_pairs(n, NUM_ACTIONS)
    src = np.repeat(poses, k, axis=0)
    nxt, hits = kernels.lt_step_batch(walls, src, a0, a1)
    hit0 = hits[:, 0].astype(bool)
    hit1 = hits[:, 1].astype(bool)
    tagged = hit0 | hit1
    reward0 = np.where(hit0 & ~hit1, 1.0, 0.0) + np.where(hit1 & ~hit0, -1.0, 0.0)
    state_codes = _encode(poses, w, h)
    sorter = np.argsort(state_codes)
    pos = np.searchsorted(state_codes[sorter], _encode(nxt, w, h))
    next_id = np.where(tagged, 0, sorter[np.minimum(pos, n - 1)]).astype(np.int32)

    shape = (n, NUM_ACTIONS, NUM_ACTIONS)  # [state, a0, a1]
    next_id = next_id.reshape(shape)
    reward0 = reward0.reshape(shape)
    done = tagged.reshape(shape).astype(np.uint8)
    if student == 1:
        next_id = next_id.transpose(0, 2, 1)
        reward0 = -reward0.transpose(0, 2, 1)
        done = done.transpose(0, 2, 1)
    return TabularModel(
        next_id,
        reward0,
        done,
        0,
        student_obs=kernels.lt_observe_batch(walls, poses, student),
        opponent_obs=kernels.lt_observe_batch(walls, poses, 1 - student),
        poses=poses,
    )


def policy_probs(policy, observations: np.ndarray | None, num_states: int, num_actions: int) -> np.ndarray:
    """Per-state action distribution of ``policy`` (a policy, frozen policy or array)."""
    if isinstance(policy, FrozenPolicy):
        policy = policy.params
    if isinstance(policy, PolicyParams):
        if observations is None:
            raise ParameterError("model carries no observations for this policy")
        probs, _ = policy.distribution(list(observations) if isinstance(policy, TabularPolicy) else observations)
    else:
        probs = np.asarray(policy, dtype=np.float64)
        if probs.ndim == 1:
            probs = np.broadcast_to(probs, (num_states, len(probs)))
    if probs.shape != (num_states, num_actions):
        raise ParameterError(f"policy table shape {probs.shape} != {(num_states, num_actions)}")
    return np.ascontiguousarray(probs, dtype=np.float64)


def bellman_q(model: TabularModel, opp: np.ndarray, gamma: float, values: np.ndarray) -> np.ndarray:
    return kernels.bellman_q(model.next_state, model.reward, model.done, opp, gamma, values)


@dataclass
class BestResponse:
    policy: TabularPolicy  # keyed on state index, see state_observations()
    value: float  # V*(s0)
    values: np.ndarray
    residual: float
    sweeps: int
    model: TabularModel
    greedy_actions: np.ndarray


def state_observations(n: int) -> np.ndarray:
    """Observation stand-ins for state-indexed tabular policies: the index as 4 bytes."""
    return np.arange(n, dtype="<u4").view(np.uint8).reshape(n, 4)


def deterministic_policy(actions: np.ndarray, num_actions: int, observations: np.ndarray) -> TabularPolicy:
    """A tabular policy that plays ``actions[s]`` with probability one."""
    logits = np.full((len(actions), num_actions), -1e3)
    logits[np.arange(len(actions)), actions] = 0.0
    keys = {np.ascontiguousarray(o, dtype=np.uint8).tobytes(): i for i, o in enumerate(observations)}
    pol = TabularPolicy(num_actions, observations.shape[1:], {"logits": logits, "values": np.zeros(len(actions))}, keys)
    return pol


def best_response_tabular(
    env,
    opponent,
    gamma: float,
    tolerance: float = 1e-6,
    max_states: int = DEFAULT_MAX_STATES,
    max_iters: int = 1_000_000,
    student: int = 0,
) -> BestResponse:
    """Value iteration against a fixed opponent.

    ``env`` is LaserTag parameters or a prebuilt :class:`TabularModel`;
    ``opponent`` is a policy evaluated on the model's opponent observations or
    an explicit ``[S, B]`` probability table.
    """
    if not (0.0 <= gamma <= 1.0):
        raise ParameterError("gamma must lie in [0, 1]")
    model = env if isinstance(env, TabularModel) else lasertag_model(env, student, max_states)
    if model.num_states > max_states:
        raise CapacityError(f"{model.num_states} states exceeds bound {max_states}")
    opp = policy_probs(opponent, model.opponent_obs, model.num_states, model.num_opponent_actions)
    values = np.zeros(model.num_states)
    values, residual, sweeps = kernels.vi_solve(
        model.next_state, model.reward, model.done, opp, gamma, tolerance, max_iters, values
    )
    values = np.asarray(values)
    if residual > tolerance:
        raise ConvergenceError(f"value iteration did not reach residual {tolerance}", residual)
    q = bellman_q(model, opp, gamma, values)
    greedy = np.argmax(q, axis=1)
    obs = state_observations(model.num_states)
    pol = deterministic_policy(greedy, model.num_actions, obs)
    pol.weights["values"] = values.copy()
    return BestResponse(pol, float(values[model.initial_state]), values, float(residual), int(sweeps), model, greedy)


def evaluate_policy_exact(model: TabularModel, student_probs: np.ndarray, opp_probs: np.ndarray, gamma: float) -> np.ndarray:
    """Solve ``V = r_pi + gamma * P_pi V`` (BiCGSTAB, with a direct sparse solve as fallback)."""
    n, na, nb = model.next_state.shape
    joint = student_probs[:, :, None] * opp_probs[:, None, :]
    r = (joint * model.reward).sum(axis=(1, 2))
    weight = gamma * joint * (1.0 - model.done)
    rows = np.repeat(np.arange(n), na * nb)
    cols = model.next_state.reshape(-1)
    data = weight.reshape(-1)
    keep = data != 0.0
    p = sp.csr_matrix((data[keep], (rows[keep], cols[keep])), shape=(n, n))
    a = sp.identity(n, format="csr") - p
    # I - gamma P is well conditioned for gamma < 1; a Krylov solve avoids LU fill-in
    values, info = spla.bicgstab(a, r, rtol=1e-13, atol=0.0, maxiter=20_000)
    if info != 0 or not np.all(np.isfinite(values)) or np.max(np.abs(a @ values - r), initial=0.0) > 1e-10:
        values = spla.spsolve(a.tocsc(), r)
    if not np.all(np.isfinite(values)):
        raise ConvergenceError("policy evaluation system is singular", float("inf"))
    return np.asarray(values, dtype=np.float64)


def evaluate_policy(model: TabularModel, student, opponent, gamma: float) -> np.ndarray:
    """Exact values of ``student`` against ``opponent`` for every model state."""
    pi = policy_probs(student, model.student_obs, model.num_states, model.num_actions)
    q = policy_probs(opponent, model.opponent_obs, model.num_states, model.num_opponent_actions)
    return evaluate_policy_exact(model, pi, q, gamma)
