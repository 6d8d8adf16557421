"""Tournaments, normalization, specialists, curriculum statistics and regret landscapes."""
import numpy as np
import pytest

from maestro.config import parse_config
from maestro.core import make_rng
from maestro.curriculum import LaserTagDomain, MaestroConfig, init_state, train_until
from maestro.errors import ConfigError, ParameterError, UsageError
from maestro.evaluation import (
    MatchResult,
    curriculum_stats,
    normalize_returns,
    regret_landscape,
    run_round_robin,
    run_specialist_eval,
    tournament_schedule,
)
from maestro.lasertag import load_level
from maestro.learner.policy import MLPPolicy, builtin_policy
from maestro.learner.ppo import PpoConfig
from maestro.matrix_lab import independent_argmax, joint_argmax

FACING_RANGE = """
5x5
.....
.....
.A.B.
.....
.....
A>
B<
"""


@pytest.fixture(scope="module")
def open_level():
    return {"open": load_level(FACING_RANGE)}


def test_schedule_counts_every_pairing():
    pols = {"x": [0, 1], "y": [0, 1]}
    sched = tournament_schedule(pols, ["Arena1"], episodes_per_pair=5)
    assert len(sched) == 2 * 2 * 5 * 2
    assert [m.index for m in sched] == list(range(40))
    keys = {(m.seed_a, m.seed_b, m.level, m.episode) for m in sched}
    for k in keys:
        assert sorted(m.role for m in sched if (m.seed_a, m.seed_b, m.level, m.episode) == k) == [0, 1]


def test_schedule_with_three_methods_has_three_pairs():
    sched = tournament_schedule({"a": [0], "b": [0], "c": [0]}, ["L1", "L2"], 1)
    assert {(m.method_a, m.method_b) for m in sched} == {("a", "b"), ("a", "c"), ("b", "c")}
    assert len(sched) == 3 * 2 * 2


def test_shooter_beats_noop(open_level):
    table = run_round_robin({"shoot": [builtin_policy("shoot")], "noop": [builtin_policy("noop")]}, open_level, 3)
    assert table.returns[0, 1] == 1.0 and table.returns[1, 0] == -1.0
    assert all(r.winner == "a" and r.length == 1 for r in table.results)
    assert len(table.results) == 6


def test_zero_sum_bookkeeping_and_antisymmetry(open_level):
    pols = {"u": [builtin_policy("uniform")] * 2, "f": [builtin_policy("forward"), builtin_policy("shoot")]}
    table = run_round_robin(pols, open_level, 4, seed=3)
    for r in table.results:
        assert r.returns[0] + r.returns[1] == 0
        assert r.winner == ("a" if r.returns[0] > 0 else "b" if r.returns[1] > 0 else "draw")
    np.testing.assert_array_equal(table.returns, -table.returns.T)


def test_self_play_cross_play_is_balanced(open_level):
    pol = builtin_policy("uniform")
    table = run_round_robin({"m": [pol, pol]}, open_level, 50, include_self=True)
    assert table.returns[0, 0] == 0.0
    a_returns = [r.returns[0] for r in table.results]
    assert abs(np.mean(a_returns)) <= 4 * np.std(a_returns) / np.sqrt(len(a_returns))


def test_tournament_is_deterministic_and_worker_independent(open_level):
    pols = {"u": [builtin_policy("uniform")], "f": [builtin_policy("forward")]}
    a = run_round_robin(pols, open_level, 6, seed=11)
    b = run_round_robin(pols, open_level, 6, seed=11)
    c = run_round_robin(pols, open_level, 6, seed=11, workers=2)
    assert a.to_csv() == b.to_csv() == c.to_csv()
    assert a.to_json() == c.to_json()
    assert run_round_robin(pols, open_level, 6, seed=12).to_csv() != a.to_csv()


def test_round_robin_preconditions(open_level):
    p = builtin_policy("noop")
    with pytest.raises(ParameterError):
        run_round_robin({"only": [p]}, open_level)
    with pytest.raises(ParameterError):
        run_round_robin({"a": [p], "b": [p]}, [])
    other = MLPPolicy.init(5, (3, 3), np.random.default_rng(0), hidden=4)
    with pytest.raises(ConfigError):
        run_round_robin({"a": [p], "b": [other]}, open_level)


def test_match_result_invariants():
    with pytest.raises(ParameterError):
        MatchResult("L", ("a", 0), ("b", 0), (1.0, 0.0), "a", 3)
    with pytest.raises(ParameterError):
        MatchResult("L", ("a", 0), ("b", 0), (1.0, -1.0), "b", 3)
    assert MatchResult("L", ("a", 0), ("b", 0), (0.0, 0.0), "draw", 3).winner == "draw"


def test_normalization(open_level):
    pols = {"s": [builtin_policy("shoot")], "n": [builtin_policy("noop")], "u": [builtin_policy("uniform")]}
    table = run_round_robin(pols, open_level, 3, include_self=True)
    n = normalize_returns(table)
    assert n.normalized and n.summary()["normalization"] == "(r + 1) / 2"
    assert n.returns[0, 1] == 1.0 and n.returns[1, 0] == 0.0
    np.testing.assert_allclose(n.returns + n.returns.T, 1.0)
    assert np.all(np.diag(n.returns) == 0.5)
    with pytest.raises(UsageError):
        normalize_returns(n)


def test_csv_has_one_row_per_episode(open_level):
    table = run_round_robin({"a": [builtin_policy("uniform")], "b": [builtin_policy("noop")]}, open_level, 2)
    lines = table.to_csv().splitlines()
    assert lines[0].startswith("index,level,method_a")
    assert len(lines) == 1 + 4


# ---------------------------------------------------------------- curriculum statistics


def event(density, size, trained=True, score=0.0, updates=0):
    return {"trained": trained, "wall_density": density, "grid_size": size, "score": score, "updates": updates}


def test_identical_levels_give_constant_series():
    stats = curriculum_stats([event(0.2, 7, updates=i) for i in range(10)], window=3)
    assert stats.wall_density == pytest.approx([0.2] * 4, rel=1e-15) and stats.grid_size == [7.0] * 4
    assert stats.updates == [2, 5, 8, 9]


def test_alternating_density_window_mean():
    evs = [event(0.1 if i % 2 == 0 else 0.5, 5) for i in range(8)]
    assert curriculum_stats(evs, window=2).wall_density == pytest.approx([0.3] * 4)


def test_untrained_episodes_are_ignored():
    evs = [event(0.4, 9, trained=False), event(0.1, 5), event(0.4, 9, trained=False), event(0.1, 5)]
    assert curriculum_stats(evs, window=10).wall_density == [0.1]


def test_empty_log_is_an_error():
    with pytest.raises(ParameterError):
        curriculum_stats([])


def test_stats_match_regenerated_levels():
    ppo = PpoConfig(learning_rate=0.05, epochs=1, minibatches=1)
    dom = LaserTagDomain(ppo, policy="tabular", min_side=5, max_side=9, max_episode_steps=16)
    rng = np.random.default_rng(1)
    state = init_state("maestro", dom, rng, maestro=MaestroConfig(checkpoint_interval=10))
    train_until(state, rng, 40)
    from_log = curriculum_stats(state.events, window=7)
    rebuilt = []
    for ev in state.events:
        env = dom.generate(ev["env_seed"])
        assert env.env_hash == ev["env_hash"]
        density, size = dom.env_stats(env)
        rebuilt.append({**ev, "wall_density": density, "grid_size": size})
    assert curriculum_stats(rebuilt, window=7) == from_log


# ---------------------------------------------------------------- specialists


SPECIALIST_CFG = """
ppo: {learning_rate: 0.05, epochs: 1, minibatches: 1}
lasertag: {policy: tabular, max_episode_steps: 16}
"""


def test_specialist_schedule_and_report():
    cfg = parse_config(SPECIALIST_CFG)
    gen = [builtin_policy("uniform")]
    with pytest.raises(ParameterError):
        run_specialist_eval(gen, ["Arena1"], 0, cfg)
    levels = ["Arena1", "Corridor1"]
    rep = run_specialist_eval(gen, levels, 3, cfg, episodes_per_pair=2)
    assert rep.training_runs == 2 and set(rep.specialists) == set(levels)
    for lv in levels:
        assert -1.0 <= rep.mean_return[lv] <= 1.0 and 0.0 <= rep.win_rate[lv] <= 1.0
    spec = rep.specialists["Arena1"]
    own = run_round_robin({"s": [spec, spec]}, ["Arena1"], 3, include_self=True, max_episode_steps=16)
    assert own.returns[0, 0] == 0.0


# ---------------------------------------------------------------- regret landscape


def test_landscape_shapes_and_selection_order():
    from maestro.curriculum import MatrixDomain
    from maestro.matrix_lab import random_game

    games = [random_game(make_rng(s)) for s in range(4)]
    dom = MatrixDomain(PpoConfig(learning_rate=0.1, epochs=1, minibatches=1), games)
    rng = np.random.default_rng(0)
    state = init_state("maestro", dom, rng, maestro=MaestroConfig(checkpoint_interval=5, estimator="exact"))
    train_until(state, rng, 20)
    pop = state.population.members
    one = regret_landscape(state.student, pop[:1], 1, dom, rng, "exact")
    assert one.regret.shape == (1, 1)
    m = regret_landscape(state.student, pop, 6, dom, rng, "exact")
    assert m.regret.shape == (len(pop), 6)
    (i, j), (k, l) = joint_argmax(m), independent_argmax(m)
    assert m.regret[i, j] >= m.regret[k, l]
    for est in ("maxmc", "pvl"):
        mm = regret_landscape(state.student, pop, 3, dom, rng, est, registry=state.registry)
        assert mm.regret.shape == (len(pop), 3) and np.all(mm.regret >= 0)
