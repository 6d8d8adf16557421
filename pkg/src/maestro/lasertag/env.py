"""Two-player zero-sum LaserTag gridworld.

Rules, applied in this fixed order each step:

1. turns update facing;
2. forward moves resolve simultaneously. A move into a wall, off the grid,
   or onto the other agent's current cell does nothing; if both agents end
   up targeting the same cell, both stay put;
3. shots resolve. A beam travels from the shooter along its facing until it
   reaches a wall, the grid edge or the other agent. A tag gives +1 to the
   shooter and -1 to the victim and ends the episode. Mutual tags end the
   episode with (0, 0).

Reaching ``max_episode_steps`` without a tag ends the episode with (0, 0).
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace

import numpy as np

from .. import kernels
from ..core import EnvParams, UposgSpec, make_rng, register_payload
from ..errors import ParameterError, UsageError

MIN_SIDE, MAX_SIDE = 5, 15
DEFAULT_MAX_STEPS = 256
OBS_SHAPE = (5, 5)
NUM_OBS_CODES = 5


class Action(enum.IntEnum):
    LEFT = 0
    RIGHT = 1
    FORWARD = 2
    SHOOT = 3
    NOOP = 4


class Facing(enum.IntEnum):
    N = 0
    E = 1
    S = 2
    W = 3


class Cell(enum.IntEnum):
    EMPTY = 0
    WALL = 1
    SELF = 2
    OPPONENT = 3
    OUT_OF_BOUNDS = 4


ACTIONS = tuple(a.name.lower() for a in Action)
NUM_ACTIONS = len(ACTIONS)


def lasertag_spec(gamma: float = 0.995, max_episode_steps: int = DEFAULT_MAX_STEPS) -> UposgSpec:
    return UposgSpec(ACTIONS, OBS_SHAPE, gamma, max_episode_steps)


Pose = tuple[int, int, int]


@register_payload("lasertag")
@dataclass(frozen=True)
class LaserTagParams:
    """A LaserTag level: square-or-rectangular wall layout and agent starts.

    ``walls`` is a row-major tuple of rows (``walls[y][x]``), True for walls.
    The grid is surrounded by an implicit wall border.
    """

    width: int
    height: int
    walls: tuple[tuple[bool, ...], ...]
    agent_starts: tuple[Pose, Pose]

    def __post_init__(self):
        for side in (self.width, self.height):
            if not (MIN_SIDE <= side <= MAX_SIDE):
                raise ParameterError(f"grid side {side} outside [{MIN_SIDE}, {MAX_SIDE}]")
        if len(self.walls) != self.height or any(len(r) != self.width for r in self.walls):
            raise ParameterError("wall grid does not match width/height")
        if len(self.agent_starts) != 2:
            raise ParameterError("exactly two agent starts required")
        for x, y, f in self.agent_starts:
            if not (0 <= x < self.width and 0 <= y < self.height):
                raise ParameterError(f"start ({x}, {y}) outside the grid")
            if self.walls[y][x]:
                raise ParameterError(f"start ({x}, {y}) is a wall")
            if f not in range(4):
                raise ParameterError(f"invalid facing {f}")
        a, b = self.agent_starts
        if a[:2] == b[:2]:
            raise ParameterError("agents must start on distinct cells")

    @property
    def wall_array(self) -> np.ndarray:
        return np.array(self.walls, dtype=np.uint8).reshape(self.height, self.width)

    @property
    def wall_density(self) -> float:
        return sum(map(sum, self.walls)) / (self.width * self.height)

    @property
    def grid_size(self) -> int:
        return max(self.width, self.height)

    def to_dict(self) -> dict:
        return {
            "width": self.width,
            "height": self.height,
            "walls": ["".join("#" if c else "." for c in row) for row in self.walls],
            "agent_starts": [list(p) for p in self.agent_starts],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "LaserTagParams":
        return cls(
            d["width"],
            d["height"],
            tuple(tuple(ch == "#" for ch in row) for row in d["walls"]),
            tuple(tuple(int(v) for v in p) for p in d["agent_starts"]),
        )


@dataclass(frozen=True, eq=False)
class LaserTagState:
    walls: np.ndarray  # uint8 [h, w], read-only
    poses: tuple[int, int, int, int, int, int]
    step_counter: int = 0
    terminated: bool = False
    winner: int | None = None
    tagged: bool = False

    def __eq__(self, other):
        if not isinstance(other, LaserTagState):
            return NotImplemented
        return (
            self.poses == other.poses
            and self.step_counter == other.step_counter
            and self.terminated == other.terminated
            and self.winner == other.winner
            and self.tagged == other.tagged
            and np.array_equal(self.walls, other.walls)
        )

    __hash__ = None

    def pose(self, agent: int) -> Pose:
        return self.poses[3 * agent : 3 * agent + 3]


def initial_state(params: LaserTagParams) -> LaserTagState:
    walls = params.wall_array
    walls.setflags(write=False)
    a, b = params.agent_starts
    return LaserTagState(walls, (*a, *b))


def step(
    state: LaserTagState, actions: tuple[int, int], max_episode_steps: int = DEFAULT_MAX_STEPS
) -> tuple[LaserTagState, tuple[float, float], bool]:
    if state.terminated:
        raise UsageError("cannot step a terminated LaserTag episode")
    a0, a1 = int(actions[0]), int(actions[1])
    if not (0 <= a0 < NUM_ACTIONS and 0 <= a1 < NUM_ACTIONS):
        raise ParameterError(f"invalid actions {actions}")
    out = kernels.lt_step(state.walls, state.poses, a0, a1)
    hit0, hit1 = out[6], out[7]
    counter = state.step_counter + 1
    rewards = (0.0, 0.0)
    winner = None
    tagged = bool(hit0 or hit1)
    if hit0 and not hit1:
        rewards, winner = (1.0, -1.0), 0
    elif hit1 and not hit0:
        rewards, winner = (-1.0, 1.0), 1
    done = tagged or counter >= max_episode_steps
    nxt = LaserTagState(state.walls, tuple(out[:6]), counter, done, winner, tagged)
    return nxt, rewards, done


def observe(state: LaserTagState, agent: int) -> np.ndarray:
    """Egocentric 5x5 view: the agent sits at row 4, column 2, facing row 0."""
    if agent not in (0, 1):
        raise ParameterError(f"invalid agent index {agent}")
    return kernels.lt_observe(state.walls, state.poses, agent)


class LaserTag:
    """Convenience wrapper bundling a level with an episode step limit."""

    def __init__(self, params: LaserTagParams, max_episode_steps: int = DEFAULT_MAX_STEPS):
        if max_episode_steps < 1:
            raise ParameterError("max_episode_steps must be >= 1")
        self.params = params
        self.max_episode_steps = max_episode_steps

    def reset(self) -> LaserTagState:
        return initial_state(self.params)

    def step(self, state, actions):
        return step(state, actions, self.max_episode_steps)

    observe = staticmethod(observe)


# --------------------------------------------------------------------------
# procedural generation


def sample_shape(rng: np.random.Generator, min_side: int = MIN_SIDE, max_side: int = MAX_SIDE):
    """Grid side and wall fraction, both uniform."""
    side = int(rng.integers(min_side, max_side + 1))
    fraction = float(rng.uniform(0.0, 0.5))
    return side, fraction


def generate(seed: int, min_side: int = MIN_SIDE, max_side: int = MAX_SIDE) -> LaserTagParams:
    """Random level: side, wall fraction, wall cells, then agent poses.

    The wall count is ``floor(fraction * side**2)``. Agents may end up
    unable to reach each other.
    """
    if not (MIN_SIDE <= min_side <= max_side <= MAX_SIDE):
        raise ParameterError(f"side range [{min_side}, {max_side}] not within bounds")
    rng = make_rng(seed)
    side, fraction = sample_shape(rng, min_side, max_side)
    cells = side * side
    n_walls = math.floor(fraction * cells)
    wall_idx = rng.choice(cells, size=n_walls, replace=False)
    flat = np.zeros(cells, dtype=bool)
    flat[wall_idx] = True
    free = np.flatnonzero(~flat)
    starts = rng.choice(free, size=2, replace=False)
    facings = rng.integers(0, 4, size=2)
    walls = tuple(tuple(bool(v) for v in flat[r * side : (r + 1) * side]) for r in range(side))
    poses = tuple((int(s % side), int(s // side), int(f)) for s, f in zip(starts, facings))
    return LaserTagParams(side, side, walls, poses)


def generate_env(seed: int, min_side: int = MIN_SIDE, max_side: int = MAX_SIDE) -> EnvParams:
    return EnvParams(generate(seed, min_side, max_side), seed)


def rotate_params(params: LaserTagParams) -> LaserTagParams:
    """Rotate the level 90 degrees clockwise, including agent facings."""
    w, h = params.width, params.height
    # (x, y) -> (h - 1 - y, x); new grid is h wide and w tall
    walls = tuple(tuple(params.walls[h - 1 - nx][ny] for nx in range(h)) for ny in range(w))
    starts = tuple((h - 1 - y, x, (f + 1) % 4) for x, y, f in params.agent_starts)
    return replace(params, width=h, height=w, walls=walls, agent_starts=starts)
