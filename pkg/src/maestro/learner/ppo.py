"""Clipped-surrogate policy optimisation with GAE targets."""
from __future__ import annotations

import copy
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..core import GaeConfig, Trajectory, gae_advantages
from ..errors import NumericalError, ParameterError
from .policy import PolicyParams, TabularPolicy, decode_array, encode_array, log_softmax


@dataclass(frozen=True)
class PpoConfig:
    learning_rate: float = 1e-4
    clip_range: float = 0.2
    value_loss_coef: float = 0.5
    entropy_coef: float = 0.0
    max_grad_norm: float = 0.5
    epochs: int = 5
    minibatches: int = 4
    rollout_length: int = 256
    num_workers: int = 1
    adam_eps: float = 1e-5
    optimizer: str = "adam"
    anneal_lr: bool = False  # linear decay to 0 over the run's update budget
    clip_value_loss: bool = True
    normalize_advantages: bool = True
    gae: GaeConfig = field(default_factory=GaeConfig)

    def __post_init__(self):
        if self.clip_range <= 0:
            raise ParameterError("clip_range must be positive")
        if self.epochs < 1 or self.minibatches < 1:
            raise ParameterError("epochs and minibatches must be >= 1")
        if self.learning_rate <= 0:
            raise ParameterError("learning_rate must be positive")
        if self.optimizer not in OPTIMIZERS:
            raise ParameterError(f"unknown optimizer {self.optimizer!r}")


class Adam:
    """Adam keyed by weight name; moments grow with tabular row allocation."""

    def __init__(self, lr: float, eps: float = 1e-5, beta1: float = 0.9, beta2: float = 0.999):
        self.lr, self.eps, self.beta1, self.beta2 = lr, eps, beta1, beta2
        self.t = 0
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}

    def _moment(self, store, name, shape):
        cur = store.get(name)
        if cur is None:
            cur = np.zeros(shape)
        elif cur.shape != shape:
            grown = np.zeros(shape)
            grown[tuple(slice(0, s) for s in cur.shape)] = cur
            cur = grown
        store[name] = cur
        return cur

    def step(self, weights: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> None:
        self.t += 1
        c1 = 1.0 - self.beta1**self.t
        c2 = 1.0 - self.beta2**self.t
        for name in sorted(grads):
            g = grads[name]
            m = self._moment(self.m, name, g.shape)
            v = self._moment(self.v, name, g.shape)
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            weights[name] = weights[name] - self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)

    def state_dict(self) -> dict:
        return {
            "kind": "adam",
            "lr": self.lr,
            "eps": self.eps,
            "t": self.t,
            "m": {k: encode_array(v) for k, v in sorted(self.m.items())},
            "v": {k: encode_array(v) for k, v in sorted(self.v.items())},
        }

    @classmethod
    def from_state_dict(cls, d: dict) -> "Adam":
        opt = cls(d["lr"], d["eps"])
        opt.t = d["t"]
        opt.m = {k: decode_array(v) for k, v in d["m"].items()}
        opt.v = {k: decode_array(v) for k, v in d["v"].items()}
        return opt


class Sgd:
    """Plain gradient descent; stateless apart from the step counter."""

    def __init__(self, lr: float):
        self.lr = lr
        self.t = 0

    def step(self, weights: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> None:
        self.t += 1
        for name in sorted(grads):
            weights[name] = weights[name] - self.lr * grads[name]

    def state_dict(self) -> dict:
        return {"kind": "sgd", "lr": self.lr, "t": self.t}

    @classmethod
    def from_state_dict(cls, d: dict) -> "Sgd":
        opt = cls(d["lr"])
        opt.t = d["t"]
        return opt


OPTIMIZERS = ("adam", "sgd")


def make_optimizer(cfg: "PpoConfig"):
    return Adam(cfg.learning_rate, cfg.adam_eps) if cfg.optimizer == "adam" else Sgd(cfg.learning_rate)


def optimizer_from_state(d: dict):
    return Sgd.from_state_dict(d) if d.get("kind") == "sgd" else Adam.from_state_dict(d)


@dataclass
class Batch:
    """Flattened samples ready for the surrogate."""

    features: object
    actions: np.ndarray
    old_log_probs: np.ndarray
    old_values: np.ndarray
    advantages: np.ndarray
    returns: np.ndarray

    def __len__(self):
        return len(self.actions)

    def subset(self, policy: PolicyParams, idx: np.ndarray) -> "Batch":
        feats = self.features[idx]
        return Batch(
            feats,
            self.actions[idx],
            self.old_log_probs[idx],
            self.old_values[idx],
            self.advantages[idx],
            self.returns[idx],
        )


def build_batch(policy: PolicyParams, trajectories: Sequence[Trajectory], cfg: PpoConfig) -> Batch:
    if not trajectories:
        raise ParameterError("empty batch")
    obs, actions, logp, values, adv, ret = [], [], [], [], [], []
    for tr in trajectories:
        if len(tr) == 0:
            continue
        a = gae_advantages(tr, cfg.gae)
        v = np.asarray(tr.values, dtype=np.float64)
        obs.extend(tr.observations)
        actions.extend(tr.actions)
        logp.extend(tr.log_probs if tr.log_probs else [np.nan] * len(tr))
        values.append(v)
        adv.append(a)
        ret.append(a + v)
    if not actions:
        raise ParameterError("batch contains no transitions")
    if isinstance(policy, TabularPolicy):
        policy.ensure_keys(obs)
    feats = policy.featurize(obs)
    adv_arr = np.concatenate(adv)
    if cfg.normalize_advantages and len(adv_arr) > 1:
        adv_arr = (adv_arr - adv_arr.mean()) / (adv_arr.std() + 1e-8)
    logp_arr = np.asarray(logp, dtype=np.float64)
    if np.any(np.isnan(logp_arr)):
        logits, _ = policy.forward(feats)
        logp_arr = log_softmax(logits)[np.arange(len(actions)), actions]
    return Batch(feats, np.asarray(actions, dtype=np.int64), logp_arr, np.concatenate(values), adv_arr, np.concatenate(ret))


def surrogate_loss_and_grad(
    policy: PolicyParams, batch: Batch, cfg: PpoConfig
) -> tuple[float, dict[str, np.ndarray], dict[str, float]]:
    """PPO loss (to minimise) and its exact gradient.

    loss = -mean(min(r A, clip(r) A)) + c_v * mean(value_loss) - c_e * mean(entropy)
    """
    n = len(batch)
    logits, values = policy.forward(batch.features)
    logp_all = log_softmax(logits)
    probs = np.exp(logp_all)
    idx = np.arange(n)
    logp = logp_all[idx, batch.actions]
    ratio = np.exp(logp - batch.old_log_probs)
    adv = batch.advantages
    eps = cfg.clip_range
    unclipped = ratio * adv
    clipped = np.clip(ratio, 1.0 - eps, 1.0 + eps) * adv
    policy_obj = np.minimum(unclipped, clipped)

    # gradient flows through ratio unless the clipped branch is strictly active
    active = ~(((adv > 0) & (ratio > 1.0 + eps)) | ((adv < 0) & (ratio < 1.0 - eps)))
    onehot = np.zeros_like(logits)
    onehot[idx, batch.actions] = 1.0
    dlogp = -(active * ratio * adv) / n
    dlogits = dlogp[:, None] * (onehot - probs)

    entropy = -(probs * logp_all).sum(axis=1)
    if cfg.entropy_coef:
        dent = -probs * (logp_all + entropy[:, None])
        dlogits -= cfg.entropy_coef * dent / n

    err = values - batch.returns
    if cfg.clip_value_loss:
        v_clip = batch.old_values + np.clip(values - batch.old_values, -eps, eps)
        err_clip = v_clip - batch.returns
        vl_unc, vl_clip = err**2, err_clip**2
        value_loss = 0.5 * np.maximum(vl_unc, vl_clip)
        inside = np.abs(values - batch.old_values) < eps
        dvalues = np.where(vl_unc >= vl_clip, err, np.where(inside, err_clip, 0.0))
    else:
        value_loss = 0.5 * err**2
        dvalues = err
    dvalues = cfg.value_loss_coef * dvalues / n

    loss = -policy_obj.mean() + cfg.value_loss_coef * value_loss.mean() - cfg.entropy_coef * entropy.mean()
    grads = policy.backward(batch.features, dlogits, dvalues)
    diag = {
        "loss": float(loss),
        "policy_loss": float(-policy_obj.mean()),
        "value_loss": float(value_loss.mean()),
        "entropy": float(entropy.mean()),
        "clip_fraction": float(np.mean(~active)),
    }
    return float(loss), grads, diag


def clip_grad_norm(grads: dict[str, np.ndarray], max_norm: float) -> float:
    total = float(np.sqrt(sum(float(np.sum(g * g)) for g in grads.values())))
    if max_norm and total > max_norm:
        scale = max_norm / (total + 1e-12)
        for k in grads:
            grads[k] = grads[k] * scale
    return total


def ppo_update(
    policy: PolicyParams,
    batch: Sequence[Trajectory],
    cfg: PpoConfig,
    rng: np.random.Generator,
    optimizer: Adam | Sgd | None = None,
) -> tuple[PolicyParams, dict]:
    """Run ``cfg.epochs`` passes of shuffled minibatch updates on a copy of ``policy``.

    ``optimizer`` carries Adam state between calls and is updated in place.
    Raises :class:`NumericalError` (leaving ``policy`` untouched) if the loss
    or gradients stop being finite.
    """
    new = policy.copy()
    opt = optimizer if optimizer is not None else make_optimizer(cfg)
    data = build_batch(new, batch, cfg)
    n = len(data)
    history = []
    # work on a scratch optimizer so a numerical failure leaves caller state intact
    scratch = copy.deepcopy(opt)
    for _ in range(cfg.epochs):
        order = rng.permutation(n)
        for chunk in np.array_split(order, cfg.minibatches):
            if len(chunk) == 0:
                continue
            loss, grads, diag = surrogate_loss_and_grad(new, data.subset(new, chunk), cfg)
            if not np.isfinite(loss) or not all(np.all(np.isfinite(g)) for g in grads.values()):
                raise NumericalError(f"non-finite PPO loss {loss}")
            diag["grad_norm"] = clip_grad_norm(grads, cfg.max_grad_norm)
            scratch.step(new.weights, grads)
            history.append(diag)
    if not new.all_finite():
        raise NumericalError("non-finite parameters after update")
    opt.__dict__.update(scratch.__dict__)
    summary = {k: float(np.mean([h[k] for h in history])) for k in history[0]} if history else {}
    summary["samples"] = n
    return new, summary
