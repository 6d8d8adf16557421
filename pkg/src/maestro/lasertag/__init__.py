from .env import (
    ACTIONS,
    NUM_ACTIONS,
    OBS_SHAPE,
    Action,
    Cell,
    Facing,
    LaserTag,
    LaserTagParams,
    LaserTagState,
    generate,
    generate_env,
    initial_state,
    lasertag_spec,
    observe,
    rotate_params,
    sample_shape,
    step,
)
from .levels import HELD_OUT_LEVELS, canonical, held_out_env, held_out_level, held_out_levels, load_level, render_level

__all__ = [
    "ACTIONS",
    "Action",
    "Cell",
    "Facing",
    "HELD_OUT_LEVELS",
    "LaserTag",
    "LaserTagParams",
    "LaserTagState",
    "NUM_ACTIONS",
    "OBS_SHAPE",
    "canonical",
    "generate",
    "generate_env",
    "held_out_env",
    "held_out_level",
    "held_out_levels",
    "initial_state",
    "lasertag_spec",
    "load_level",
    "observe",
    "render_level",
    "rotate_params",
    "sample_shape",
    "step",
]
