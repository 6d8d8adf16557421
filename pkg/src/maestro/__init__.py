"""Joint environment and co-player curricula for two-player zero-sum games."""
from __future__ import annotations

from . import kernels
from .config import ExperimentConfig, load_config, parse_config
from .core import EnvParams, GaeConfig, Trajectory, UposgSpec, gae_advantages, make_rng
from .curriculum import (
    EnvBuffer,
    MaestroConfig,
    Population,
    ReplayDistributionConfig,
    init_state,
    maestro_step,
    run_baseline,
    train_until,
)
from .errors import (
    CapacityError,
    ConfigError,
    ConvergenceError,
    MaestroError,
    NumericalError,
    ParameterError,
    ParseError,
    UsageError,
)
from .evaluation import regret_landscape, run_round_robin, run_specialist_eval
from .experiment import Trainer, load_run
from .matrix_lab import MixedStrategy, RegretMatrix, ZeroSumGame, solve_zero_sum, table1, verify_corollary1
from .regret import score_exact, score_maxmc, score_pvl

__version__ = "0.1.0"
BACKEND = kernels.BACKEND

__all__ = [
    "BACKEND",
    "CapacityError",
    "ConfigError",
    "ConvergenceError",
    "EnvBuffer",
    "EnvParams",
    "ExperimentConfig",
    "GaeConfig",
    "MaestroConfig",
    "MaestroError",
    "MixedStrategy",
    "NumericalError",
    "ParameterError",
    "ParseError",
    "Population",
    "RegretMatrix",
    "ReplayDistributionConfig",
    "Trainer",
    "Trajectory",
    "UposgSpec",
    "UsageError",
    "ZeroSumGame",
    "gae_advantages",
    "init_state",
    "load_config",
    "load_run",
    "maestro_step",
    "make_rng",
    "parse_config",
    "regret_landscape",
    "run_baseline",
    "run_round_robin",
    "run_specialist_eval",
    "score_exact",
    "score_maxmc",
    "score_pvl",
    "solve_zero_sum",
    "table1",
    "train_until",
    "verify_corollary1",
]
