from .policy import FrozenPolicy, MLPPolicy, PolicyParams, TabularPolicy, act, log_softmax, softmax
from .ppo import Adam, PpoConfig, ppo_update, surrogate_loss_and_grad
from .tabular import (
    BestResponse,
    TabularModel,
    best_response_tabular,
    evaluate_policy,
    evaluate_policy_exact,
    lasertag_model,
)

__all__ = [
    "Adam",
    "BestResponse",
    "FrozenPolicy",
    "MLPPolicy",
    "PolicyParams",
    "PpoConfig",
    "TabularModel",
    "TabularPolicy",
    "act",
    "best_response_tabular",
    "evaluate_policy",
    "evaluate_policy_exact",
    "lasertag_model",
    "log_softmax",
    "ppo_update",
    "softmax",
    "surrogate_loss_and_grad",
]
