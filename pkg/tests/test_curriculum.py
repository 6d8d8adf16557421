"""Environment buffers, the replay distribution and the co-player samplers."""
import copy

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from maestro.core import EnvParams
from maestro.curriculum import (
    SELF,
    EnvBuffer,
    MaestroConfig,
    MatrixGameParams,
    Population,
    ReplayDistributionConfig,
    ReplayEntry,
    buffer_insert,
    coplayer_distribution,
    pfsp_distribution,
    regret_leader,
    replay_distribution,
    select_coplayer,
    select_coplayer_fsp,
    select_coplayer_pfsp,
    select_coplayer_random,
    select_coplayer_sp,
)
from maestro.errors import ParameterError
from maestro.learner.policy import FrozenPolicy, TabularPolicy

POOL = [EnvParams(MatrixGameParams(i, ((float(i),),)), i) for i in range(64)]


def entry(i, score, t=0, last=None):
    return ReplayEntry(POOL[i], float(score), t if last is None else last, t)


def population(scores_per_member, capacity=16):
    pop = Population(member_capacity=capacity)
    for k, scores in enumerate(scores_per_member):
        pop.add(FrozenPolicy.freeze(TabularPolicy(3, (1,)), k, k))
        for j, s in enumerate(scores):
            pop.buffers[k].insert(entry(j, s, j))
    return pop


def scores_of(buf):
    return sorted(e.score for e in buf)


# ---------------------------------------------------------------- buffer


def test_topk_retention_example():
    buf = EnvBuffer(2)
    for t, s in enumerate([0.1, 0.5, 0.3]):
        buffer_insert(buf, entry(t, s, t))
    assert scores_of(buf) == [0.3, 0.5]
    assert POOL[0] not in buf


def test_reinsert_overwrites_score_in_place():
    buf = EnvBuffer(3)
    buf.insert(entry(0, 0.2, 0))
    buf.insert(entry(1, 0.4, 1))
    out = buf.insert(entry(0, 0.9, 5))
    assert out.action == "updated"
    assert len(buf) == 2
    assert buf.get(POOL[0]).score == 0.9
    assert buf.get(POOL[0]).insert_at == 5


def test_below_minimum_into_full_buffer_is_rejected():
    buf = EnvBuffer(2)
    buf.insert(entry(0, 0.4, 0))
    buf.insert(entry(1, 0.6, 1))
    before = copy.deepcopy(buf.entries)
    assert buf.insert(entry(2, 0.1, 2)).action == "rejected"
    assert buf.insert(entry(3, 0.4, 3)).action == "rejected"  # equal is not enough
    assert buf.entries == before


def test_eviction_tie_goes_to_older_entry():
    buf = EnvBuffer(2)
    buf.insert(entry(0, 0.5, 0))
    buf.insert(entry(1, 0.5, 1))
    out = buf.insert(entry(2, 0.7, 2))
    assert out.action == "replaced" and out.evicted.params == POOL[0]


def test_non_finite_score_rejected():
    with pytest.raises(ParameterError):
        ReplayEntry(POOL[0], float("nan"))
    with pytest.raises(ParameterError):
        EnvBuffer(0)


def test_buffer_round_trip():
    buf = EnvBuffer(4, owner=7)
    for i in range(6):
        buf.insert(entry(i, i * 0.1, i))
    again = EnvBuffer.from_dict(buf.to_dict())
    assert again.entries == buf.entries and again.owner == 7
    assert all(e.params in again for e in buf)


class SortedListOracle:
    """Top-K by score with a plain list; eviction picks the minimum (score, insert_at)."""

    def __init__(self, k):
        self.k = k
        self.items = []  # [score, insert_at, key]

    def insert(self, key, score, t):
        for it in self.items:
            if it[2] == key:
                it[0], it[1] = score, t
                return
        if len(self.items) < self.k:
            self.items.append([score, t, key])
            return
        self.items.sort()
        if score > self.items[0][0]:
            self.items[0] = [score, t, key]

    def state(self):
        return sorted((key, score) for score, _, key in self.items)


def test_buffer_fuzz_against_sorted_list_oracle():
    rng = np.random.default_rng(7)
    n_ops = 1_000_000
    k = 8
    keys = rng.integers(24, size=n_ops)
    # coarse scores force plenty of ties
    scores = rng.integers(0, 20, size=n_ops) / 10.0
    buf, oracle = EnvBuffer(k), SortedListOracle(k)
    for t in range(n_ops):
        key, s = int(keys[t]), float(scores[t])
        was_full = len(buf) == k
        fresh = POOL[key] not in buf
        lo = buf.min_score
        buf.insert(ReplayEntry(POOL[key], s, t, t))
        oracle.insert(key, s, t)
        assert len(buf) <= k
        if was_full and fresh:
            assert buf.min_score >= lo
        if t % 997 == 0 or t == n_ops - 1:
            got = sorted((e.params.payload.index, e.score) for e in buf)
            assert got == oracle.state()
    assert sorted((e.params.payload.index, e.score) for e in buf) == oracle.state()


def test_buffers_are_isolated_per_member():
    rng = np.random.default_rng(3)
    pop = population([[], [], []], capacity=5)
    for t in range(5000):
        a = int(rng.integers(3))
        snaps = {b: copy.deepcopy(pop.buffers[b].entries) for b in range(3) if b != a}
        pop.buffers[a].insert(ReplayEntry(POOL[int(rng.integers(12))], float(rng.random()), t, t))
        for b, snap in snaps.items():
            assert pop.buffers[b].entries == snap


def test_same_level_may_live_in_two_buffers():
    pop = population([[0.3], [0.8]])
    assert POOL[0] in pop.buffers[0] and POOL[0] in pop.buffers[1]
    assert pop.buffers[0].get(POOL[0]).score == 0.3


# ---------------------------------------------------------------- replay distribution


def rd(beta=1.0, rho=0.0):
    return ReplayDistributionConfig(temperature=beta, staleness_coef=rho)


def test_rank_weights_example():
    buf = EnvBuffer(3)
    for i, s in enumerate([0.9, 0.5, 0.1]):
        buf.insert(entry(i, s, i))
    p = replay_distribution(buf, rd(), now=3).probabilities
    np.testing.assert_allclose(p, [6 / 11, 3 / 11, 2 / 11], atol=1e-12)


def test_rank_follows_score_not_buffer_order():
    buf = EnvBuffer(3)
    for i, s in enumerate([0.1, 0.9, 0.5]):
        buf.insert(entry(i, s, i))
    p = replay_distribution(buf, rd(), now=3).probabilities
    np.testing.assert_allclose(p, [2 / 11, 6 / 11, 3 / 11], atol=1e-12)


def test_rank_ties_favor_older_insert():
    buf = EnvBuffer(2)
    buf.insert(entry(0, 0.5, t=4))
    buf.insert(entry(1, 0.5, t=2))
    p = replay_distribution(buf, rd(), now=5).probabilities
    np.testing.assert_allclose(p, [1 / 3, 2 / 3])


def test_single_entry_has_probability_one():
    buf = EnvBuffer(3)
    buf.insert(entry(0, -4.0))
    assert replay_distribution(buf, ReplayDistributionConfig(), now=0).probabilities.tolist() == [1.0]


def test_pure_staleness_example():
    buf = EnvBuffer(2)
    buf.insert(entry(0, 0.1, t=0, last=0))
    buf.insert(entry(1, 0.9, t=0, last=10))
    p = replay_distribution(buf, rd(rho=1.0), now=10).probabilities
    np.testing.assert_allclose(p, [1.0, 0.0])


def test_zero_staleness_is_uniform():
    buf = EnvBuffer(3)
    for i in range(3):
        buf.insert(entry(i, i, t=5))
    p = replay_distribution(buf, rd(rho=1.0), now=5).probabilities
    np.testing.assert_allclose(p, [1 / 3] * 3)


def test_empty_buffer_cannot_be_replayed():
    with pytest.raises(ParameterError):
        replay_distribution(EnvBuffer(2), ReplayDistributionConfig(), now=0)


@pytest.mark.parametrize("kw", [dict(replay_probability=1.5), dict(staleness_coef=-0.1), dict(temperature=0.0),
                                dict(prioritization="value")])
def test_replay_config_ranges(kw):
    with pytest.raises(ParameterError):
        ReplayDistributionConfig(**kw)


@settings(max_examples=200, deadline=None)
@given(
    st.lists(st.floats(-5, 5, allow_nan=False), min_size=1, max_size=20),
    st.floats(0.05, 3.0),
    st.floats(0.0, 1.0),
)
def test_replay_distribution_is_valid_and_score_monotone(scores, beta, rho):
    buf = EnvBuffer(32)
    for i, s in enumerate(scores):
        buf.insert(entry(i, s, t=i, last=0))
    p = replay_distribution(buf, rd(beta, 0.0), now=len(scores)).probabilities
    assert abs(p.sum() - 1) < 1e-12 and np.all(p > 0)
    order = np.lexsort((np.arange(len(scores)), -np.asarray(scores)))
    assert np.all(np.diff(p[order]) <= 1e-15)
    mixed = replay_distribution(buf, rd(beta, rho), now=len(scores)).probabilities
    assert abs(mixed.sum() - 1) < 1e-12


# ---------------------------------------------------------------- co-player samplers


def test_maestro_selection_example():
    pop = population([[0.1], [0.2], [0.9], [0.3]])
    p = coplayer_distribution(pop, 0.1)
    np.testing.assert_allclose(p, [0.025, 0.025, 0.925, 0.025])


def test_single_member_always_selected():
    pop = population([[0.4]])
    rng = np.random.default_rng(0)
    assert coplayer_distribution(pop, 0.1).tolist() == [1.0]
    assert {select_coplayer(pop, MaestroConfig(), rng) for _ in range(50)} == {0}


def test_full_floor_is_uniform():
    pop = population([[0.1], [5.0], [], [0.2]])
    np.testing.assert_allclose(coplayer_distribution(pop, 1.0), [0.25] * 4)


def test_empty_buffers_lose_and_ties_go_to_lowest_checkpoint():
    assert regret_leader(population([[], [0.0], [-1.0]])) == 1
    assert regret_leader(population([[], [], []])) == 0
    assert regret_leader(population([[0.2], [0.7], [0.7]])) == 1


def test_leader_uses_the_buffer_maximum():
    assert regret_leader(population([[0.1, 0.9], [0.5, 0.6]])) == 0


def test_empty_population_is_an_error():
    pop = Population()
    with pytest.raises(ParameterError):
        coplayer_distribution(pop, 0.1)
    with pytest.raises(ParameterError):
        select_coplayer_fsp(pop, np.random.default_rng(0))
    with pytest.raises(ParameterError):
        select_coplayer_random(pop, np.random.default_rng(0))
    with pytest.raises(ParameterError):
        select_coplayer_pfsp(pop, rng=np.random.default_rng(0))


@settings(max_examples=200, deadline=None)
@given(
    st.lists(st.lists(st.floats(-10, 10, allow_nan=False), max_size=4), min_size=1, max_size=32),
    st.floats(0.0, 1.0),
    st.floats(0.01, 100.0),
)
def test_selection_floor_and_scale_covariance(scores, lam, scale):
    pop = population(scores)
    p = coplayer_distribution(pop, lam)
    n = len(scores)
    assert abs(p.sum() - 1) < 1e-12
    assert np.all(p >= lam / n - 1e-15)
    scaled = population([[s * scale for s in row] for row in scores])
    # scaling can merge float ties only when products round together; require exact preservation otherwise
    if len({max(r, default=-np.inf) for r in scores}) == len({max(r, default=-np.inf) * scale for r in scores}):
        assert regret_leader(scaled) == regret_leader(pop)
        np.testing.assert_array_equal(coplayer_distribution(scaled, lam), p)


def test_pfsp_examples():
    np.testing.assert_allclose(pfsp_distribution([0.0, 1.0], 2, 0.0), [1.0, 0.0])
    np.testing.assert_allclose(pfsp_distribution([0.2, 0.8], 2, 0.1), [0.74 / 0.88, 0.14 / 0.88])
    np.testing.assert_allclose(pfsp_distribution([0.2, 0.8], 2, 0.1), [0.841, 0.159], atol=5e-4)
    # a lone member at win rate 0.5 has raw weight 0.25; relative to one at 0 that is 0.25 : 1
    np.testing.assert_allclose(pfsp_distribution([0.5, 0.0], 2, 0.0), [0.2, 0.8])


def test_pfsp_unplayed_and_draws_count_half():
    pop = population([[], [], []])
    pop.record(1, 0.5)
    pop.record(1, 0.5)
    pop.record(2, 1.0)
    pop.record(2, 0.0)
    assert pop.win_rates().tolist() == [0.5, 0.5, 0.5]


def test_win_history_is_bounded():
    pop = population([[]])
    for t in range(500):
        pop.record(0, float(t % 2))
    assert len(pop.win_history[0]) == 128


def test_sp_returns_the_live_student():
    assert select_coplayer_sp() == SELF
    assert select_coplayer_sp(42) == 42


def test_maestro_config_ranges():
    with pytest.raises(ParameterError):
        MaestroConfig(lambda_floor=1.1)
    with pytest.raises(ParameterError):
        MaestroConfig(estimator="oracle")
    with pytest.raises(ParameterError):
        MaestroConfig(checkpoint_interval=0)


def empirical(draw, n, draws):
    counts = np.bincount([draw() for _ in range(draws)], minlength=n)
    return counts / draws


def test_random_sampler_frequencies():
    pop = population([[], [], []])
    rng = np.random.default_rng(11)
    f = empirical(lambda: select_coplayer_random(pop, rng), 3, 30_000)
    assert np.max(np.abs(f - 1 / 3)) <= 0.01


def test_fsp_frequencies():
    pop = population([[], []])
    rng = np.random.default_rng(12)
    f = empirical(lambda: select_coplayer_fsp(pop, rng), 2, 10_000)
    assert np.max(np.abs(f - 0.5)) <= 0.02


def test_samplers_match_their_distributions_in_total_variation():
    rng = np.random.default_rng(13)
    pop = population([[0.1], [0.9], [0.4], []])
    for t, o in enumerate([1, 1, 0, 0.5, 0, 1]):
        pop.record(t % 4, o)
    draws = 100_000
    cfg = MaestroConfig(lambda_floor=0.3)
    f = empirical(lambda: select_coplayer(pop, cfg, rng), 4, draws)
    assert 0.5 * np.abs(f - coplayer_distribution(pop, 0.3)).sum() <= 0.01
    f = empirical(lambda: select_coplayer_pfsp(pop, SELF, 2.0, 0.1, rng), 4, draws)
    assert 0.5 * np.abs(f - pfsp_distribution(pop.win_rates(), 2.0, 0.1)).sum() <= 0.01
