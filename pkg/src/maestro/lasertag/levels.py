"""ASCII level format and the bundled held-out evaluation levels.

Grammar (one item per line, ``%`` lines are comments and may appear anywhere)::

    level   := size row{H} legend legend
    size    := W "x" H                       e.g. "7x7"
    row     := cell{W}                       cell in  # . A B
    legend  := ("A" | "B") facing            facing in  ^ > v <

``#`` is a wall and ``.`` open floor. ``A`` and ``B`` mark the two agents'
start cells (agent 0 and agent 1) and each appears exactly once in the grid.
Each agent has exactly one legend line giving its initial facing.
Trailing whitespace is ignored; blank lines are not allowed inside the grid.

The canonical rendering drops comments and writes the legend as ``A`` then
``B``, with a trailing newline.
"""
from __future__ import annotations

import re
from functools import lru_cache
from importlib import resources

from ..core import EnvParams
from ..errors import ParameterError, ParseError
from .env import MAX_SIDE, MIN_SIDE, LaserTagParams

FACING_CHARS = "^>v<"
_SIZE_RE = re.compile(r"^(\d+)x(\d+)$")

HELD_OUT_LEVELS = (
    "Cross",
    "FourRooms",
    "SixteenRooms",
    "Ruins",
    "Ruins2",
    "Star",
    "LargeCorridor",
    "Maze1",
    "Maze2",
    "Arena1",
    "Arena2",
    "Corridor1",
    "Corridor2",
)


def load_level(text: str) -> LaserTagParams:
    lines = [
        (i, raw.rstrip())
        for i, raw in enumerate(text.splitlines(), start=1)
        if not raw.lstrip().startswith("%")
    ]
    while lines and not lines[0][1]:
        lines.pop(0)
    while lines and not lines[-1][1]:
        lines.pop()
    if not lines:
        raise ParseError("empty level", 1, 1)

    lineno, head = lines[0]
    m = _SIZE_RE.match(head)
    if not m:
        raise ParseError(f"expected size line 'WxH', got {head!r}", lineno, 1)
    width, height = int(m.group(1)), int(m.group(2))
    for side, name in ((width, "width"), (height, "height")):
        if not (MIN_SIDE <= side <= MAX_SIDE):
            raise ParseError(f"{name} {side} outside [{MIN_SIDE}, {MAX_SIDE}]", lineno, 1)

    body = lines[1:]
    if len(body) < height:
        ln = body[-1][0] + 1 if body else lineno + 1
        raise ParseError(f"expected {height} grid rows, found {len(body)}", ln, 1)

    walls = []
    found: dict[str, tuple[int, int, int, int]] = {}
    for y, (ln, row) in enumerate(body[:height]):
        if len(row) != width:
            raise ParseError(f"row has {len(row)} cells, expected {width}", ln, min(len(row), width) + 1)
        cells = []
        for x, ch in enumerate(row):
            if ch == "#":
                cells.append(True)
            elif ch == ".":
                cells.append(False)
            elif ch in "AB":
                if ch in found:
                    raise ParseError(f"agent {ch} appears more than once", ln, x + 1)
                found[ch] = (x, y, ln, x + 1)
                cells.append(False)
            else:
                raise ParseError(f"unknown cell character {ch!r}", ln, x + 1)
        walls.append(tuple(cells))

    facings: dict[str, int] = {}
    for ln, line in body[height:]:
        if len(line) != 2 or line[0] not in "AB" or line[1] not in FACING_CHARS:
            col = 1 if not line or line[0] not in "AB" else 2
            raise ParseError(f"expected legend like 'A>', got {line!r}", ln, col)
        if line[0] in facings:
            raise ParseError(f"duplicate legend for agent {line[0]}", ln, 1)
        if line[0] not in found:
            raise ParseError(f"legend for agent {line[0]} absent from grid", ln, 1)
        facings[line[0]] = FACING_CHARS.index(line[1])

    if set(found) != {"A", "B"}:
        missing = sorted({"A", "B"} - set(found))
        raise ParseError(f"level needs exactly agents A and B, missing {missing}", lineno, 1)
    for agent in "AB":
        if agent not in facings:
            last = body[-1][0]
            raise ParseError(f"no facing legend for agent {agent}", last + 1, 1)

    starts = tuple((found[a][0], found[a][1], facings[a]) for a in "AB")
    try:
        return LaserTagParams(width, height, tuple(walls), starts)
    except ParameterError as e:
        raise ParseError(str(e), lineno, 1) from None


def render_level(params: LaserTagParams) -> str:
    grid = [["#" if c else "." for c in row] for row in params.walls]
    for label, (x, y, _) in zip("AB", params.agent_starts):
        grid[y][x] = label
    lines = [f"{params.width}x{params.height}"]
    lines += ["".join(row) for row in grid]
    lines += [f"{label}{FACING_CHARS[f]}" for label, (_, _, f) in zip("AB", params.agent_starts)]
    return "\n".join(lines) + "\n"


def canonical(text: str) -> str:
    return render_level(load_level(text))


def level_text(name: str) -> str:
    if name not in HELD_OUT_LEVELS:
        raise ParameterError(f"unknown held-out level {name!r}")
    return resources.files("maestro").joinpath(f"data/levels/{name}.txt").read_text()


@lru_cache(maxsize=None)
def held_out_level(name: str) -> LaserTagParams:
    return load_level(level_text(name))


def held_out_env(name: str) -> EnvParams:
    return EnvParams(held_out_level(name), None)


def held_out_levels() -> dict[str, LaserTagParams]:
    return {name: held_out_level(name) for name in HELD_OUT_LEVELS}
