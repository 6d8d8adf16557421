"""Exact small-game laboratory.

Normal-form zero-sum games, regret matrices over (co-player, environment)
pairs, joint versus independent pair selection, and an equilibrium solver
whose output is always accompanied by an exactly computed exploitability.

Matrix text format: one row per line, whitespace-separated reals. Lines
starting with ``#`` are comments. A comment of the form ``# rows: a b c`` or
``# cols: x y z`` supplies labels.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ConvergenceError, ParameterError, ParseError


@dataclass(frozen=True)
class MixedStrategy:
    probabilities: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.probabilities, dtype=np.float64)
        if p.ndim != 1 or p.size == 0:
            raise ParameterError("a mixed strategy is a non-empty vector")
        if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-9:
            raise ParameterError(f"not a distribution: {p}")
        object.__setattr__(self, "probabilities", p)

    @classmethod
    def pure(cls, n: int, index: int) -> "MixedStrategy":
        p = np.zeros(n)
        p[index] = 1.0
        return cls(p)

    @classmethod
    def uniform(cls, n: int) -> "MixedStrategy":
        return cls(np.full(n, 1.0 / n))

    def __len__(self) -> int:
        return len(self.probabilities)


@dataclass(frozen=True)
class ZeroSumGame:
    """Row player receives ``payoff[i, j]``; the column player its negation."""

    payoff: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.payoff, dtype=np.float64)
        if a.ndim != 2 or 0 in a.shape:
            raise ParameterError("payoff must be a non-empty matrix")
        if not np.all(np.isfinite(a)):
            raise ParameterError("payoff entries must be finite")
        object.__setattr__(self, "payoff", a)

    @property
    def shape(self) -> tuple[int, int]:
        return self.payoff.shape


@dataclass(frozen=True)
class RegretMatrix:
    """Student regret for each (co-player row, environment column) pair."""

    regret: np.ndarray
    co_players: tuple[str, ...] = field(default=())
    environments: tuple[str, ...] = field(default=())

    def __post_init__(self):
        r = np.asarray(self.regret, dtype=np.float64)
        if r.ndim != 2 or 0 in r.shape:
            raise ParameterError("regret matrix must be non-empty and 2-D")
        if not np.all(np.isfinite(r)) or np.any(r < 0):
            raise ParameterError("regret entries must be finite and non-negative")
        rows = tuple(self.co_players) or tuple(f"pi{i}" for i in range(r.shape[0]))
        cols = tuple(self.environments) or tuple(f"theta{j}" for j in range(r.shape[1]))
        if len(rows) != r.shape[0] or len(cols) != r.shape[1]:
            raise ParameterError("label counts do not match matrix dimensions")
        object.__setattr__(self, "regret", r)
        object.__setattr__(self, "co_players", rows)
        object.__setattr__(self, "environments", cols)


def _first_argmax(values: np.ndarray) -> int:
    # np.argmax already returns the first maximal index
    return int(np.argmax(values))


def joint_argmax(m: RegretMatrix) -> tuple[int, int]:
    """Maximal (row, col) entry; ties go to the lexicographically lowest pair."""
    flat = _first_argmax(m.regret.ravel())
    return divmod(flat, m.regret.shape[1])


def independent_argmax(m: RegretMatrix) -> tuple[int, int]:
    """The pair picked by two teachers that each look only at their own margin."""
    return _first_argmax(m.regret.mean(axis=1)), _first_argmax(m.regret.mean(axis=0))


def _check_dims(g: ZeroSumGame, row: MixedStrategy, col: MixedStrategy) -> None:
    if (len(row), len(col)) != g.shape:
        raise ParameterError(f"strategy sizes {(len(row), len(col))} do not match game {g.shape}")


def expected_payoff(g: ZeroSumGame, row: MixedStrategy, col: MixedStrategy) -> float:
    _check_dims(g, row, col)
    return float(row.probabilities @ g.payoff @ col.probabilities)


def exploitability(g: ZeroSumGame, row: MixedStrategy, col: MixedStrategy) -> float:
    """Sum over both players of the gain from a unilateral best response.

    Computed by enumerating pure deviations, which is exact for matrix games.
    """
    _check_dims(g, row, col)
    a = g.payoff
    return float((a @ col.probabilities).max() - (row.probabilities @ a).min())


def row_exploitability(g: ZeroSumGame, row: MixedStrategy, value: float) -> float:
    """How far a best-responding column player can push the row player below ``value``."""
    return float(value - (row.probabilities @ g.payoff).min())


def true_regret(g: ZeroSumGame, student: MixedStrategy, opponent: MixedStrategy) -> float:
    """Best pure-response payoff against ``opponent`` minus the student's payoff."""
    _check_dims(g, student, opponent)
    u = g.payoff @ opponent.probabilities
    return max(float(u.max() - student.probabilities @ u), 0.0)


def _normalize(x: np.ndarray) -> np.ndarray:
    s = x.sum()
    return x / s if s > 0 else np.full(len(x), 1.0 / len(x))


def _equalizer(a: np.ndarray, rows: np.ndarray, cols: np.ndarray) -> np.ndarray | None:
    """Column mix on ``cols`` making every row in ``rows`` indifferent."""
    k, n = len(rows), len(cols)
    m = np.zeros((k + 1, n + 1))
    m[:k, :n] = a[np.ix_(rows, cols)]
    m[:k, n] = -1.0
    m[k, :n] = 1.0
    b = np.zeros(k + 1)
    b[k] = 1.0
    sol = np.linalg.lstsq(m, b, rcond=None)[0][:n]
    if np.any(sol < -1e-12):
        return None
    out = np.zeros(a.shape[1])
    out[cols] = np.clip(sol, 0.0, None)
    return out / out.sum() if out.sum() > 0 else None


def _polish(g: ZeroSumGame, p: np.ndarray, q: np.ndarray, tolerance: float):
    """Solve the indifference equations on the supports of an approximate equilibrium."""
    a = g.payoff
    for thr in (1e-2, 1e-3, 1e-4):
        rows = np.flatnonzero(p > thr)
        cols = np.flatnonzero(q > thr)
        q2 = _equalizer(a, rows, cols)
        p2 = _equalizer(-a.T, cols, rows)
        if p2 is None or q2 is None:
            continue
        row, col = MixedStrategy(_normalize(p2)), MixedStrategy(_normalize(q2))
        if exploitability(g, row, col) <= tolerance:
            return row, col
    return None


def solve_zero_sum(
    g: ZeroSumGame, tolerance: float = 1e-6, max_iters: int = 200_000, check_every: int = 100
) -> tuple[MixedStrategy, MixedStrategy, float]:
    """Approximate a minimax equilibrium with certified exploitability.

    Runs regret matching+ with alternating updates and linearly weighted
    averaging. Every ``check_every`` iterations the averaged strategies are
    certified by exact best-response enumeration; the supports of the average
    are also used to solve the indifference equations directly, which usually
    lands on the exact equilibrium. Either route only returns once the
    certificate is at most ``tolerance``.
    """
    if tolerance <= 0:
        raise ParameterError("tolerance must be positive")
    a = g.payoff
    m, n = a.shape
    reg_p, reg_q = np.zeros(m), np.zeros(n)
    avg_p, avg_q = np.zeros(m), np.zeros(n)
    p, q = np.full(m, 1.0 / m), np.full(n, 1.0 / n)
    expl = np.inf
    for t in range(1, max_iters + 1):
        u = a @ q
        reg_p = np.maximum(reg_p + u - p @ u, 0.0)
        p = _normalize(reg_p)
        avg_p += t * p
        u = -(p @ a)
        reg_q = np.maximum(reg_q + u - q @ u, 0.0)
        q = _normalize(reg_q)
        avg_q += t * q
        if t % check_every == 0 or t == max_iters:
            row, col = MixedStrategy(_normalize(avg_p)), MixedStrategy(_normalize(avg_q))
            expl = exploitability(g, row, col)
            if expl > tolerance:
                polished = _polish(g, row.probabilities, col.probabilities, tolerance)
                if polished is not None:
                    row, col = polished
                    expl = exploitability(g, row, col)
            if expl <= tolerance:
                return row, col, expected_payoff(g, row, col)
    raise ConvergenceError(f"no {tolerance:g}-equilibrium within {max_iters} iterations", expl)


def game_value(g: ZeroSumGame, tolerance: float = 1e-9) -> float:
    return solve_zero_sum(g, tolerance)[2]


@dataclass
class CorollaryReport:
    per_game_exploitability: dict[int, float]
    game_values: dict[int, float]
    tolerance: float

    @property
    def passed(self) -> bool:
        return all(e <= self.tolerance for e in self.per_game_exploitability.values())

    @property
    def worst(self) -> float:
        return max(self.per_game_exploitability.values(), default=0.0)


def verify_corollary1(
    games: Sequence[ZeroSumGame],
    env_distribution: MixedStrategy,
    students: Sequence[MixedStrategy | None],
    tolerance: float,
) -> CorollaryReport:
    """Check the student is a Nash strategy in every game with positive mass.

    The student's exploitability in game ``k`` is the game value minus the
    payoff a best-responding opponent holds it to.
    """
    if len(games) != len(env_distribution) or len(students) != len(games):
        raise ParameterError("games, distribution and students must align")
    expl, values = {}, {}
    for k, g in enumerate(games):
        if env_distribution.probabilities[k] <= 0:
            continue
        if students[k] is None:
            raise ParameterError(f"no student strategy for supported game {k}")
        # the value certificate is much tighter than any tolerance we check
        v = game_value(g, tolerance=min(1e-9, tolerance * 1e-3))
        values[k] = v
        expl[k] = max(row_exploitability(g, students[k], v), 0.0)
    return CorollaryReport(expl, values, tolerance)


# --------------------------------------------------------------------------
# plain-text matrix format


def parse_matrix(text: str) -> tuple[np.ndarray, list[str] | None, list[str] | None]:
    rows: list[list[float]] = []
    row_labels = col_labels = None
    width = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            body = line[1:].strip()
            if body.startswith("rows:"):
                row_labels = body[5:].split()
            elif body.startswith("cols:"):
                col_labels = body[5:].split()
            continue
        values = []
        col = raw.index(line[0]) + 1
        for tok in line.split():
            try:
                values.append(float(tok))
            except ValueError:
                raise ParseError(f"not a number: {tok!r}", lineno, raw.index(tok) + 1) from None
        if width is None:
            width = len(values)
        elif len(values) != width:
            raise ParseError(f"expected {width} entries, found {len(values)}", lineno, col)
        rows.append(values)
    if not rows:
        raise ParseError("no matrix rows", 1, 1)
    return np.array(rows, dtype=np.float64), row_labels, col_labels


def format_matrix(matrix: np.ndarray, rows: Sequence[str] = (), cols: Sequence[str] = ()) -> str:
    out = []
    if rows:
        out.append("# rows: " + " ".join(rows))
    if cols:
        out.append("# cols: " + " ".join(cols))
    for r in np.asarray(matrix):
        out.append(" ".join(repr(float(x)) for x in r))
    return "\n".join(out) + "\n"


def load_regret_matrix(source: str | Path) -> RegretMatrix:
    text = Path(source).read_text()
    m, rows, cols = parse_matrix(text)
    return RegretMatrix(m, tuple(rows or ()), tuple(cols or ()))


def load_game(source: str | Path) -> ZeroSumGame:
    return ZeroSumGame(parse_matrix(Path(source).read_text())[0])


def table1_text() -> str:
    return resources.files("maestro").joinpath("data/table1.txt").read_text()


def table1() -> RegretMatrix:
    m, rows, cols = parse_matrix(table1_text())
    return RegretMatrix(m, tuple(rows or ()), tuple(cols or ()))


def random_game(rng: np.random.Generator, rows: int = 3, cols: int = 3) -> ZeroSumGame:
    return ZeroSumGame(rng.uniform(-1.0, 1.0, size=(rows, cols)))
