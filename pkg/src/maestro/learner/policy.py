"""Policy parameterizations: a tabular softmax table and a small MLP.

Both expose the same surface: ``featurize`` turns raw observations into model
inputs, ``forward`` gives logits and critic values, ``backward`` maps
gradients w.r.t. logits/values onto the weights. Everything is float64 numpy
so analytic gradients can be checked against finite differences.
"""
from __future__ import annotations

import base64
import copy
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..errors import ParameterError

NUM_OBS_CODES = 5


def log_softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))


def softmax(logits: np.ndarray) -> np.ndarray:
    return np.exp(log_softmax(logits))


def encode_array(a: np.ndarray) -> dict:
    a = np.ascontiguousarray(a)
    return {
        "dtype": str(a.dtype),
        "shape": list(a.shape),
        "data": base64.b64encode(a.astype(a.dtype.newbyteorder("<")).tobytes()).decode(),
    }


def decode_array(d: dict) -> np.ndarray:
    dtype = np.dtype(d["dtype"]).newbyteorder("<")
    return np.frombuffer(base64.b64decode(d["data"]), dtype=dtype).reshape(d["shape"]).astype(d["dtype"])


class PolicyParams:
    """Base class. Subclasses keep all trainable arrays in ``self.weights``."""

    kind: str = ""

    def __init__(self, num_actions: int, obs_shape: tuple[int, ...], weights: dict[str, np.ndarray]):
        self.num_actions = int(num_actions)
        self.obs_shape = tuple(obs_shape)
        self.weights = weights

    # subclasses implement
    def featurize(self, observations: Sequence[np.ndarray]):
        raise NotImplementedError

    def forward(self, features) -> tuple[np.ndarray, np.ndarray]:
        raise NotImplementedError

    def backward(self, features, dlogits: np.ndarray, dvalues: np.ndarray) -> dict[str, np.ndarray]:
        raise NotImplementedError

    def check_obs(self, obs: np.ndarray) -> None:
        if np.shape(obs) != self.obs_shape:
            raise ParameterError(f"observation shape {np.shape(obs)} != expected {self.obs_shape}")

    def distribution(self, observations: Sequence[np.ndarray]) -> tuple[np.ndarray, np.ndarray]:
        """Action probabilities and values for a batch of raw observations."""
        logits, values = self.forward(self.featurize(observations))
        return softmax(logits), values

    def copy(self) -> "PolicyParams":
        return copy.deepcopy(self)

    def num_parameters(self) -> int:
        return sum(w.size for w in self.weights.values())

    def flat(self) -> np.ndarray:
        return np.concatenate([self.weights[k].ravel() for k in sorted(self.weights)])

    def set_flat(self, vec: np.ndarray) -> None:
        i = 0
        for k in sorted(self.weights):
            n = self.weights[k].size
            self.weights[k] = vec[i : i + n].reshape(self.weights[k].shape).copy()
            i += n

    def all_finite(self) -> bool:
        return all(np.all(np.isfinite(w)) for w in self.weights.values())

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "num_actions": self.num_actions,
            "obs_shape": list(self.obs_shape),
            "weights": {k: encode_array(v) for k, v in sorted(self.weights.items())},
            **self._extra_state(),
        }

    def _extra_state(self) -> dict:
        return {}

    @staticmethod
    def from_dict(d: dict) -> "PolicyParams":
        cls = {"tabular": TabularPolicy, "mlp": MLPPolicy}[d["kind"]]
        return cls._from_dict(d)

    def set_read_only(self) -> None:
        for w in self.weights.values():
            w.setflags(write=False)


class TabularPolicy(PolicyParams):
    """One row of logits and one value per distinct observation.

    Unseen observations behave as a zero row (uniform policy, value 0) until
    :meth:`ensure_keys` allocates them, which the trainer does before updates.
    """

    kind = "tabular"

    def __init__(self, num_actions: int, obs_shape: tuple[int, ...], weights=None, keys=None):
        weights = weights or {
            "logits": np.zeros((0, num_actions)),
            "values": np.zeros(0),
        }
        super().__init__(num_actions, obs_shape, weights)
        self.keys: dict[bytes, int] = dict(keys or {})

    @staticmethod
    def _key(obs: np.ndarray) -> bytes:
        return np.ascontiguousarray(obs, dtype=np.uint8).tobytes()

    def featurize(self, observations):
        rows = np.empty(len(observations), dtype=np.int64)
        for i, obs in enumerate(observations):
            self.check_obs(obs)
            rows[i] = self.keys.get(self._key(obs), -1)
        return rows

    def ensure_keys(self, observations) -> None:
        new = []
        for obs in observations:
            k = self._key(obs)
            if k not in self.keys:
                self.keys[k] = len(self.keys)
                new.append(k)
        if new:
            self.weights["logits"] = np.vstack([self.weights["logits"], np.zeros((len(new), self.num_actions))])
            self.weights["values"] = np.concatenate([self.weights["values"], np.zeros(len(new))])

    def forward(self, rows):
        rows = np.asarray(rows)
        known = rows >= 0
        logits = np.zeros((len(rows), self.num_actions))
        values = np.zeros(len(rows))
        logits[known] = self.weights["logits"][rows[known]]
        values[known] = self.weights["values"][rows[known]]
        return logits, values

    def backward(self, rows, dlogits, dvalues):
        rows = np.asarray(rows)
        if np.any(rows < 0):
            raise ParameterError("gradient requested for unallocated observation keys")
        gl = np.zeros_like(self.weights["logits"])
        gv = np.zeros_like(self.weights["values"])
        np.add.at(gl, rows, dlogits)
        np.add.at(gv, rows, dvalues)
        return {"logits": gl, "values": gv}

    def _extra_state(self):
        ordered = sorted(self.keys.items(), key=lambda kv: kv[1])
        return {"keys": [base64.b64encode(k).decode() for k, _ in ordered]}

    @classmethod
    def _from_dict(cls, d):
        weights = {k: decode_array(v) for k, v in d["weights"].items()}
        keys = {base64.b64decode(k): i for i, k in enumerate(d.get("keys", []))}
        return cls(d["num_actions"], tuple(d["obs_shape"]), weights, keys)


class MLPPolicy(PolicyParams):
    """Separate one-hidden-layer tanh networks for actor and critic.

    Input is the one-hot encoding of every observation cell.
    """

    kind = "mlp"

    def __init__(self, num_actions, obs_shape, weights=None, hidden: int = 64, num_codes: int = NUM_OBS_CODES):
        self.num_codes = num_codes
        super().__init__(num_actions, obs_shape, weights or {})
        self.hidden = hidden if not weights else weights["actor_w1"].shape[1]

    @classmethod
    def init(
        cls,
        num_actions: int,
        obs_shape: tuple[int, ...],
        rng: np.random.Generator,
        hidden: int = 64,
        num_codes: int = NUM_OBS_CODES,
    ) -> "MLPPolicy":
        n_in = int(np.prod(obs_shape)) * num_codes
        scale = 1.0 / np.sqrt(n_in)
        w = {
            "actor_w1": rng.normal(0.0, scale, (n_in, hidden)),
            "actor_b1": np.zeros(hidden),
            # small output layer keeps the initial policy close to uniform
            "actor_w2": rng.normal(0.0, 0.01 / np.sqrt(hidden), (hidden, num_actions)),
            "actor_b2": np.zeros(num_actions),
            "critic_w1": rng.normal(0.0, scale, (n_in, hidden)),
            "critic_b1": np.zeros(hidden),
            "critic_w2": rng.normal(0.0, 1.0 / np.sqrt(hidden), (hidden, 1)),
            "critic_b2": np.zeros(1),
        }
        return cls(num_actions, obs_shape, w, hidden, num_codes)

    def featurize(self, observations):
        obs = np.asarray(observations)
        if obs.shape[1:] != self.obs_shape:
            raise ParameterError(f"observation shape {obs.shape[1:]} != expected {self.obs_shape}")
        return np.eye(self.num_codes)[obs.reshape(len(obs), -1)].reshape(len(obs), -1)

    def _hidden(self, x):
        w = self.weights
        ha = np.tanh(x @ w["actor_w1"] + w["actor_b1"])
        hc = np.tanh(x @ w["critic_w1"] + w["critic_b1"])
        return ha, hc

    def forward(self, x):
        w = self.weights
        ha, hc = self._hidden(x)
        logits = ha @ w["actor_w2"] + w["actor_b2"]
        values = (hc @ w["critic_w2"] + w["critic_b2"])[:, 0]
        return logits, values

    def backward(self, x, dlogits, dvalues):
        w = self.weights
        ha, hc = self._hidden(x)
        g = {}
        g["actor_w2"] = ha.T @ dlogits
        g["actor_b2"] = dlogits.sum(axis=0)
        dha = (dlogits @ w["actor_w2"].T) * (1.0 - ha**2)
        g["actor_w1"] = x.T @ dha
        g["actor_b1"] = dha.sum(axis=0)
        dv = dvalues[:, None]
        g["critic_w2"] = hc.T @ dv
        g["critic_b2"] = dv.sum(axis=0)
        dhc = (dv @ w["critic_w2"].T) * (1.0 - hc**2)
        g["critic_w1"] = x.T @ dhc
        g["critic_b1"] = dhc.sum(axis=0)
        return g

    def _extra_state(self):
        return {"num_codes": self.num_codes}

    @classmethod
    def _from_dict(cls, d):
        weights = {k: decode_array(v) for k, v in d["weights"].items()}
        return cls(d["num_actions"], tuple(d["obs_shape"]), weights, num_codes=d.get("num_codes", NUM_OBS_CODES))


def act(
    policy: PolicyParams, observation: np.ndarray, rng: np.random.Generator | None = None, greedy: bool = False
) -> tuple[int, float, float]:
    """Sample (or pick greedily) one action; returns ``(action, log_prob, value)``.

    Greedy ties go to the lowest action index.
    """
    policy.check_obs(observation)
    logits, values = policy.forward(policy.featurize([observation]))
    logp = log_softmax(logits)[0]
    if greedy:
        a = int(np.argmax(logp))
    else:
        if rng is None:
            raise ParameterError("stochastic action selection needs an rng")
        p = np.exp(logp)
        a = int(np.searchsorted(np.cumsum(p), rng.random() * p.sum(), side="right"))
        a = min(a, policy.num_actions - 1)
    return a, float(logp[a]), float(values[0])


@dataclass(frozen=True)
class FrozenPolicy:
    """An immutable population member."""

    params: PolicyParams
    checkpoint_id: int
    creation_update: int = 0
    meta: dict = field(default_factory=dict, compare=False)

    @classmethod
    def freeze(cls, params: PolicyParams, checkpoint_id: int, creation_update: int = 0, **meta) -> "FrozenPolicy":
        snap = params.copy()
        snap.set_read_only()
        return cls(snap, checkpoint_id, creation_update, meta)

    def act(self, observation, rng=None, greedy=False):
        return act(self.params, observation, rng, greedy)

    def to_dict(self) -> dict:
        return {
            "checkpoint_id": self.checkpoint_id,
            "creation_update": self.creation_update,
            "meta": self.meta,
            "params": self.params.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FrozenPolicy":
        return cls.freeze(PolicyParams.from_dict(d["params"]), d["checkpoint_id"], d["creation_update"], **d["meta"])


BUILTIN_POLICIES = ("noop", "shoot", "uniform", "forward")


def builtin_policy(name: str, num_actions: int = 5, obs_shape: tuple[int, ...] = (5, 5)) -> MLPPolicy:
    """Observation-independent toy policies, expressed as zero-weight MLPs."""
    if name not in BUILTIN_POLICIES:
        raise ParameterError(f"unknown builtin policy {name!r}")
    pol = MLPPolicy.init(num_actions, obs_shape, np.random.default_rng(0), hidden=4)
    for k in pol.weights:
        pol.weights[k] = np.zeros_like(pol.weights[k])
    if name != "uniform":
        action = {"noop": 4, "shoot": 3, "forward": 2}[name]
        pol.weights["actor_b2"][action] = 50.0
    return pol
