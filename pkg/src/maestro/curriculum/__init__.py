from .buffer import (
    EnvBuffer,
    InsertOutcome,
    Population,
    ReplayDistributionConfig,
    ReplayEntry,
    buffer_insert,
    replay_distribution,
    sample_index,
)
from .domains import Domain, Episode, LaserTagDomain, MatrixDomain, MatrixGameParams
from .loop import (
    BASELINE_METHODS,
    MAESTRO_METHODS,
    METHODS,
    TrainingState,
    init_state,
    maestro_step,
    run_baseline,
    train_until,
    training_step,
)
from .samplers import (
    SELF,
    MaestroConfig,
    PfspConfig,
    coplayer_distribution,
    pfsp_distribution,
    regret_leader,
    select_coplayer,
    select_coplayer_fsp,
    select_coplayer_pfsp,
    select_coplayer_random,
    select_coplayer_sp,
)

__all__ = [
    "BASELINE_METHODS",
    "Domain",
    "EnvBuffer",
    "Episode",
    "InsertOutcome",
    "LaserTagDomain",
    "MAESTRO_METHODS",
    "METHODS",
    "MaestroConfig",
    "MatrixDomain",
    "MatrixGameParams",
    "PfspConfig",
    "Population",
    "ReplayDistributionConfig",
    "ReplayEntry",
    "SELF",
    "TrainingState",
    "buffer_insert",
    "coplayer_distribution",
    "init_state",
    "maestro_step",
    "pfsp_distribution",
    "regret_leader",
    "replay_distribution",
    "run_baseline",
    "sample_index",
    "select_coplayer",
    "select_coplayer_fsp",
    "select_coplayer_pfsp",
    "select_coplayer_random",
    "select_coplayer_sp",
    "train_until",
    "training_step",
]
