"""Cross-play tournaments, specialist comparisons and curriculum statistics."""
from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Mapping, Sequence

import numpy as np

from .core import EnvParams, make_rng
from .errors import ConfigError, ParameterError, UsageError
from .lasertag.env import DEFAULT_MAX_STEPS, LaserTagParams, initial_state, observe, step
from .lasertag.levels import held_out_level
from .learner.policy import FrozenPolicy, PolicyParams, act
from .matrix_lab import RegretMatrix
from .regret import score_maxmc, score_pvl

CSV_HEADER = (
    "index",
    "level",
    "method_a",
    "seed_a",
    "method_b",
    "seed_b",
    "role",
    "episode",
    "return_a",
    "return_b",
    "winner",
    "length",
)


def _params(p) -> PolicyParams:
    return p.params if isinstance(p, FrozenPolicy) else p


@dataclass(frozen=True)
class MatchResult:
    level: str
    policy_a: tuple[str, int]  # (method, seed index)
    policy_b: tuple[str, int]
    returns: tuple[float, float]
    winner: str  # "a" | "b" | "draw"
    length: int
    role: int = 0  # 0: a plays agent 0, 1: a plays agent 1
    episode: int = 0
    index: int = 0

    def __post_init__(self):
        ra, rb = self.returns
        if ra + rb != 0:
            raise ParameterError("LaserTag returns must sum to zero")
        expected = "a" if ra > 0 else "b" if rb > 0 else "draw"
        if self.winner != expected:
            raise ParameterError(f"winner {self.winner!r} inconsistent with returns {self.returns}")

    def csv_row(self) -> list:
        return [
            self.index,
            self.level,
            self.policy_a[0],
            self.policy_a[1],
            self.policy_b[0],
            self.policy_b[1],
            self.role,
            self.episode,
            repr(float(self.returns[0])),
            repr(float(self.returns[1])),
            self.winner,
            self.length,
        ]


@dataclass(frozen=True)
class ScheduledMatch:
    index: int
    level: str
    method_a: str
    seed_a: int
    method_b: str
    seed_b: int
    role: int
    episode: int
    episode_seed: int


@dataclass
class TournamentTable:
    methods: list[str]
    returns: np.ndarray  # [a, b] mean return of a against b; NaN if never played
    per_level: dict[str, np.ndarray]
    seed_pairing: str
    normalized: bool = False
    results: list[MatchResult] = field(default_factory=list)

    def mean_return(self, method: str) -> float:
        """Average over the opponents this method actually met."""
        i = self.methods.index(method)
        row = self.returns[i]
        vals = [row[j] for j in range(len(self.methods)) if j != i and not math.isnan(row[j])]
        if not vals:
            vals = [v for v in row if not math.isnan(v)]
        return float(np.mean(vals)) if vals else math.nan

    def summary(self) -> dict:
        return {
            "methods": self.methods,
            "returns": [[None if math.isnan(x) else float(x) for x in r] for r in self.returns],
            "per_level": {
                k: [[None if math.isnan(x) else float(x) for x in r] for r in v] for k, v in self.per_level.items()
            },
            "mean_return": {m: self.mean_return(m) for m in self.methods},
            "seed_pairing": self.seed_pairing,
            "normalized": self.normalized,
            "normalization": "(r + 1) / 2" if self.normalized else None,
            "episodes": len(self.results),
        }

    def to_json(self) -> str:
        return json.dumps(self.summary(), indent=2, sort_keys=True) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for r in self.results:
            w.writerow(r.csv_row())
        return buf.getvalue()


def _episode_seed(seed: int, index: int) -> int:
    return int(np.random.SeedSequence([seed, index]).generate_state(1, dtype=np.uint64)[0])


def tournament_schedule(
    policies: Mapping[str, Sequence],
    levels: Sequence[str],
    episodes_per_pair: int = 5,
    seed: int = 0,
    include_self: bool = False,
) -> list[ScheduledMatch]:
    """Every cross-method seed pair, on every level, in both role orders."""
    methods = list(policies)
    pairs = [(a, b) for i, a in enumerate(methods) for b in methods[i + (0 if include_self else 1) :]]
    out = []
    for a, b in pairs:
        for sa in range(len(policies[a])):
            for sb in range(len(policies[b])):
                for level in levels:
                    for role in (0, 1):
                        for ep in range(episodes_per_pair):
                            i = len(out)
                            out.append(ScheduledMatch(i, level, a, sa, b, sb, role, ep, _episode_seed(seed, i)))
    return out


def play_episode(
    level: LaserTagParams,
    p0,
    p1,
    rng: np.random.Generator,
    greedy: bool = False,
    max_episode_steps: int = DEFAULT_MAX_STEPS,
) -> tuple[tuple[float, float], int]:
    """One LaserTag episode; returns undiscounted rewards of (agent 0, agent 1) and the length."""
    a_params, b_params = _params(p0), _params(p1)
    state = initial_state(level)
    total = [0.0, 0.0]
    done = False
    while not done:
        a0, _, _ = act(a_params, observe(state, 0), rng, greedy)
        a1, _, _ = act(b_params, observe(state, 1), rng, greedy)
        state, (r0, r1), done = step(state, (a0, a1), max_episode_steps)
        total[0] += r0
        total[1] += r1
    return (total[0], total[1]), state.step_counter


def _play(args) -> MatchResult:
    m, pa, pb, level, greedy, max_steps = args
    rng = make_rng(m.episode_seed)
    first, second = (pa, pb) if m.role == 0 else (pb, pa)
    (r0, r1), length = play_episode(level, first, second, rng, greedy, max_steps)
    ra, rb = (r0, r1) if m.role == 0 else (r1, r0)
    winner = "a" if ra > 0 else "b" if rb > 0 else "draw"
    return MatchResult(m.level, (m.method_a, m.seed_a), (m.method_b, m.seed_b), (ra, rb), winner, length, m.role, m.episode, m.index)


def _resolve_levels(levels) -> dict[str, LaserTagParams]:
    if isinstance(levels, Mapping):
        return dict(levels)
    return {name: held_out_level(name) for name in levels}


def run_round_robin(
    policies: Mapping[str, Sequence],
    levels,
    episodes_per_pair: int = 5,
    seed: int = 0,
    greedy: bool = False,
    include_self: bool = False,
    max_episode_steps: int = DEFAULT_MAX_STEPS,
    workers: int = 1,
) -> TournamentTable:
    """Cross-play every method pair; deterministic given ``seed`` whatever ``workers`` is."""
    if len(policies) < 2 and not include_self:
        raise ParameterError("a round robin needs at least two methods")
    level_map = _resolve_levels(levels)
    if not level_map:
        raise ParameterError("a round robin needs at least one level")
    shapes = {(_params(p).obs_shape, _params(p).num_actions) for ps in policies.values() for p in ps}
    if len(shapes) != 1:
        raise ConfigError(f"policies disagree on observation/action spaces: {sorted(shapes)}")
    if any(len(ps) == 0 for ps in policies.values()):
        raise ParameterError("every method needs at least one policy")
    schedule = tournament_schedule(policies, list(level_map), episodes_per_pair, seed, include_self)
    jobs = [
        (m, policies[m.method_a][m.seed_a], policies[m.method_b][m.seed_b], level_map[m.level], greedy, max_episode_steps)
        for m in schedule
    ]
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            results = list(pool.map(_play, jobs, chunksize=max(1, len(jobs) // (4 * workers))))
    else:
        results = [_play(j) for j in jobs]
    return aggregate(list(policies), list(level_map), results, episodes_per_pair)


def aggregate(methods: list[str], levels: list[str], results: list[MatchResult], episodes: int = 0) -> TournamentTable:
    n = len(methods)
    idx = {m: i for i, m in enumerate(methods)}

    def table(rows):
        tot = np.zeros((n, n))
        cnt = np.zeros((n, n))
        for r in rows:
            a, b = idx[r.policy_a[0]], idx[r.policy_b[0]]
            tot[a, b] += r.returns[0]
            cnt[a, b] += 1
            tot[b, a] += r.returns[1]
            cnt[b, a] += 1
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(cnt > 0, tot / np.maximum(cnt, 1), np.nan)

    per_level = {lv: table([r for r in results if r.level == lv]) for lv in levels}
    pairing = f"all seed pairs x {len(levels)} levels x {episodes} episodes x 2 roles"
    return TournamentTable(methods, table(results), per_level, pairing, False, results)


def normalize_returns(table: TournamentTable) -> TournamentTable:
    """Map mean returns from [-1, 1] to [0, 1] with ``(r + 1) / 2``."""
    if table.normalized:
        raise UsageError("table is already normalized")
    return replace(
        table,
        returns=(table.returns + 1.0) / 2.0,
        per_level={k: (v + 1.0) / 2.0 for k, v in table.per_level.items()},
        normalized=True,
    )


# --------------------------------------------------------------------------
# specialists


@dataclass
class SpecialistReport:
    levels: list[str]
    mean_return: dict[str, float]  # generalist's mean return against the specialist
    win_rate: dict[str, float]  # generalist's win rate, draws count 0.5
    training_runs: int
    specialists: dict[str, PolicyParams] = field(default_factory=dict)


def run_specialist_eval(
    generalist: Sequence,
    target_levels: Sequence[str],
    training_budget: int,
    cfg=None,
    episodes_per_pair: int = 5,
    seed: int = 0,
    specialist_method: str = "dr-sp",
) -> SpecialistReport:
    """Train one specialist per level on that level alone, then cross-play it."""
    from .config import ExperimentConfig
    from .curriculum.loop import init_state, train_until
    from .experiment import build_domain

    if training_budget < 1:
        raise ParameterError("training_budget must be >= 1")
    if not generalist:
        raise ParameterError("no generalist policies given")
    cfg = cfg or ExperimentConfig()
    means, wins, specialists = {}, {}, {}
    for k, name in enumerate(target_levels):
        lcfg = cfg.replace(method=specialist_method, lasertag=replace(cfg.lasertag, level=name))
        domain = build_domain(lcfg)
        rng = make_rng(_episode_seed(seed, 1_000_000 + k))
        state = init_state(specialist_method, domain, rng, lcfg.replay, lcfg.maestro, lcfg.pfsp)
        train_until(state, rng, training_budget)
        specialists[name] = state.student
        table = run_round_robin(
            {"generalist": list(generalist), "specialist": [state.student]},
            [name],
            episodes_per_pair,
            seed + k,
            max_episode_steps=lcfg.lasertag.max_episode_steps,
        )
        rs = table.results
        means[name] = float(np.mean([r.returns[0] for r in rs]))
        wins[name] = float(np.mean([1.0 if r.winner == "a" else 0.5 if r.winner == "draw" else 0.0 for r in rs]))
    return SpecialistReport(list(target_levels), means, wins, len(target_levels), specialists)


# --------------------------------------------------------------------------
# curriculum statistics


@dataclass
class CurriculumStats:
    updates: list[int]  # student update count at the end of each window
    wall_density: list[float]
    grid_size: list[float]
    score_quantiles: list[tuple[float, float, float]]  # 25th, 50th, 75th of window scores


def curriculum_stats(events: Sequence[dict], window: int = 100) -> CurriculumStats:
    """Per-window means of wall density and grid size over *trained-on* environments.

    A window spans ``window`` consecutive trained-on episodes; a trailing
    partial window is included.
    """
    if not events:
        raise ParameterError("empty event log")
    if window < 1:
        raise ParameterError("window must be >= 1")
    trained = [e for e in events if e["trained"] and e.get("wall_density") is not None]
    out = CurriculumStats([], [], [], [])
    for i in range(0, len(trained), window):
        chunk = trained[i : i + window]
        out.updates.append(int(chunk[-1]["updates"]))
        out.wall_density.append(float(np.mean([e["wall_density"] for e in chunk])))
        out.grid_size.append(float(np.mean([e["grid_size"] for e in chunk])))
        q = np.quantile([e["score"] for e in chunk], [0.25, 0.5, 0.75])
        out.score_quantiles.append(tuple(float(x) for x in q))
    return out


def read_events(path) -> list[dict]:
    with open(path) as f:
        return [json.loads(line) for line in f if line.strip()]


# --------------------------------------------------------------------------
# regret landscape


def regret_landscape(
    student,
    population: Sequence,
    sample_envs: int,
    domain,
    rng: np.random.Generator,
    estimator: str = "maxmc",
    envs: Sequence[EnvParams] | None = None,
    registry=None,
) -> RegretMatrix:
    """Score the student against every member on ``sample_envs`` fresh environments.

    Rows are population members, columns environments. MaxMC uses the best
    return in ``registry`` for the (env, member) pair when one is known, which
    for fresh levels leaves a score of 0. Negative estimates are clamped to 0
    so the result is a valid regret matrix.
    """
    if envs is None:
        envs = [domain.generate(int(rng.integers(2**63 - 1))) for _ in range(sample_envs)]
    envs = list(envs)
    out = np.zeros((len(population), len(envs)))
    for i, member in enumerate(population):
        for j, env in enumerate(envs):
            if estimator == "exact":
                val = domain.exact_regret(env, student, member).value
            else:
                ep = domain.rollout(env, student, member, rng)
                tr = ep.trajectory
                if estimator == "maxmc":
                    known = None if registry is None else registry.get((env.env_hash, getattr(member, "checkpoint_id", i)))
                    best = tr.episode_return if known is None else max(known, tr.episode_return)
                    val = score_maxmc(tr, best).value
                else:
                    val = score_pvl(tr, domain.ppo.gae).value
            out[i, j] = max(val, 0.0)
    rows = tuple(f"pi{getattr(m, 'checkpoint_id', i)}" for i, m in enumerate(population))
    cols = tuple(env.env_hash for env in envs)
    return RegretMatrix(out, rows, cols)
