"""The curriculum loop, audited through its event stream."""
import numpy as np
import pytest

from maestro.core import make_rng
from maestro.curriculum import (
    SELF,
    LaserTagDomain,
    MaestroConfig,
    MatrixDomain,
    ReplayDistributionConfig,
    ReplayEntry,
    init_state,
    maestro_step,
    run_baseline,
    train_until,
    training_step,
)
from maestro.errors import ParameterError
from maestro.learner.ppo import PpoConfig
from maestro.matrix_lab import random_game

PPO = PpoConfig(learning_rate=0.1, epochs=1, minibatches=1, normalize_advantages=False)


def lasertag(max_steps=24):
    return LaserTagDomain(PPO, policy="tabular", min_side=5, max_side=5, max_episode_steps=max_steps)


def matrix(n=5, seed=0):
    rng = make_rng(seed)
    return MatrixDomain(PPO, [random_game(rng) for _ in range(n)])


def weights_of(policy):
    return {k: np.array(v, copy=True) for k, v in policy.weights.items()}


def same_weights(a, b):
    return a.keys() == b.keys() and all(np.array_equal(a[k], b[k]) for k in a)


def audit(events, seeded=None):
    """Replay the event stream against a set-per-owner model of the buffers.

    Returns the number of trained events. Fails if any trained level was
    absent from the selected co-player's buffer at training time, or if the
    stream's own bookkeeping disagrees with the reconstruction.
    """
    contents = {owner: set(hashes) for owner, hashes in (seeded or {}).items()}
    trained = 0
    for ev in events:
        owner = ev["buffer"]
        held = contents.setdefault(owner, set())
        assert ev["trained"] == (ev["branch"] == "replay")
        if ev["trained"]:
            trained += 1
            assert owner == ev["coplayer_id"]
            assert ev["env_hash"] in held
        if ev["branch"] == "replay":
            assert ev["insert"] == "updated"
        if ev["insert"] in ("appended", "replaced"):
            assert ev["env_hash"] not in held
            held.add(ev["env_hash"])
        if ev["evicted"] is not None:
            held.remove(ev["evicted"])
        if ev["checkpoint_added"] is not None:
            contents[ev["checkpoint_added"]] = set()
        assert [len(contents.get(k, ())) for k in range(ev["population_size"])] == ev["buffer_sizes"]
    return trained


def test_audit_log_lasertag_tabular():
    rng = np.random.default_rng(0)
    maestro = MaestroConfig(checkpoint_interval=10, member_capacity=6)
    state = init_state("maestro", lasertag(), rng, maestro=maestro)
    for _ in range(200):
        maestro_step(state, rng)
    assert len(state.events) == 200
    trained = audit(state.events)
    assert trained == state.updates > 0
    assert len(state.population) == 1 + state.updates // 10
    # evictions happened, so the capacity path was exercised too
    assert any(ev["evicted"] for ev in state.events)


@pytest.mark.parametrize("method", ["maestro-r", "maestro-p"])
def test_audit_log_ablations(method):
    rng = np.random.default_rng(1)
    state = init_state(method, matrix(), rng, maestro=MaestroConfig(checkpoint_interval=7, member_capacity=3))
    train_until(state, rng, 60)
    assert audit(state.events) == 60
    assert len(state.population) == 1 + 60 // 7


def test_no_replay_never_changes_the_student():
    rng = np.random.default_rng(2)
    state = init_state("maestro", lasertag(), rng, ReplayDistributionConfig(replay_probability=0.0),
                       MaestroConfig(member_capacity=50))
    before = weights_of(state.student)
    sizes = []
    for _ in range(60):
        maestro_step(state, rng)
        sizes.append(len(state.population.buffers[0]))
    assert same_weights(weights_of(state.student), before)
    assert state.updates == 0
    assert all(not ev["trained"] and ev["branch"] == "generate" for ev in state.events)
    assert sizes == sorted(sizes) and sizes[-1] > 0


def test_always_replay_trains_only_on_buffered_levels():
    rng = np.random.default_rng(3)
    dom = matrix()
    state = init_state("maestro", dom, rng, ReplayDistributionConfig(replay_probability=1.0),
                       MaestroConfig(checkpoint_interval=1000))
    seeded = set()
    for seed in range(4):
        env = dom.generate(seed)
        state.population.buffers[0].insert(ReplayEntry(env, 1.0))
        seeded.add(env.env_hash)
    for _ in range(100):
        maestro_step(state, rng)
    assert all(ev["branch"] == "replay" and ev["trained"] for ev in state.events)
    assert {ev["env_hash"] for ev in state.events} <= seeded
    assert audit(state.events, {0: seeded}) == 100


def test_replay_on_empty_buffer_falls_back_without_training():
    rng = np.random.default_rng(4)
    state = init_state("maestro", matrix(), rng, ReplayDistributionConfig(replay_probability=1.0))
    maestro_step(state, rng)
    ev = state.events[0]
    assert ev["branch"] == "fallback" and not ev["trained"] and ev["insert"] == "appended"
    maestro_step(state, rng)
    assert state.events[1]["branch"] == "replay" and state.events[1]["trained"]


@pytest.mark.parametrize("u, total", [(1, 5), (4, 17), (5, 40), (50, 49)])
def test_population_grows_with_update_count(u, total):
    rng = np.random.default_rng(5)
    state = init_state("maestro", matrix(), rng, maestro=MaestroConfig(checkpoint_interval=u))
    train_until(state, rng, total)
    assert state.updates == total
    assert len(state.population) == 1 + total // u
    assert len(state.population.buffers) == len(state.population)
    assert [m.checkpoint_id for m in state.population.members] == list(range(len(state.population)))
    assert [m.creation_update for m in state.population.members] == [k * u for k in range(len(state.population))]


def test_frozen_members_do_not_track_the_student():
    rng = np.random.default_rng(6)
    state = init_state("maestro", matrix(), rng, maestro=MaestroConfig(checkpoint_interval=1000))
    first = weights_of(state.population.members[0].params)
    train_until(state, rng, 30)
    assert same_weights(weights_of(state.population.members[0].params), first)
    assert not same_weights(weights_of(state.student), first)


def test_dr_sp_allocates_no_buffers_and_trains_every_episode():
    rng = np.random.default_rng(7)
    state = init_state("dr-sp", matrix(), rng, maestro=MaestroConfig(checkpoint_interval=5))
    for _ in range(30):
        run_baseline("dr-sp", state, rng)
    assert state.shared_buffer is None and state.population.buffers == []
    assert all(ev["trained"] and ev["branch"] == "dr" and ev["coplayer_id"] == SELF for ev in state.events)
    assert state.updates == 30 and len(state.population) == 7


def test_plr_fsp_has_exactly_one_buffer():
    rng = np.random.default_rng(8)
    state = init_state("plr-fsp", matrix(), rng, maestro=MaestroConfig(checkpoint_interval=3))
    train_until(state, rng, 30)
    assert len(state.population) == 11
    assert state.population.buffers == []
    assert state.shared_buffer is not None
    assert {ev["buffer"] for ev in state.events} == {"shared"}
    assert all(ev["coplayer_id"] != SELF for ev in state.events)
    assert all(len(ev["buffer_sizes"]) == 1 for ev in state.events)


def test_plr_sp_replay_gate_frequency():
    rng = np.random.default_rng(9)
    state = init_state("plr-sp", matrix(), rng, ReplayDistributionConfig(replay_probability=0.5, capacity=64))
    for _ in range(10_000):
        run_baseline("plr-sp", state, rng)
    trained = np.mean([ev["trained"] for ev in state.events])
    assert abs(trained - 0.5) <= 0.02
    assert all(ev["coplayer_id"] == SELF for ev in state.events)


def test_pfsp_baseline_records_outcomes():
    rng = np.random.default_rng(10)
    state = init_state("dr-pfsp", matrix(), rng, maestro=MaestroConfig(checkpoint_interval=4))
    train_until(state, rng, 20)
    played = sum(len(h) for h in state.population.win_history)
    assert played == len(state.events)


def test_method_mismatch_is_rejected():
    rng = np.random.default_rng(11)
    state = init_state("dr-fsp", matrix(), rng)
    with pytest.raises(ParameterError):
        run_baseline("plr-fsp", state, rng)
    with pytest.raises(ParameterError):
        maestro_step(state, rng)
    with pytest.raises(ParameterError):
        init_state("paired", matrix(), rng)


def test_score_is_taken_before_the_update():
    rng = np.random.default_rng(12)
    dom = matrix()
    state = init_state("dr-sp", dom, rng, maestro=MaestroConfig(estimator="exact"))
    for _ in range(10):
        pre = state.student.copy()
        training_step(state, rng)
        ev = state.events[-1]
        env = dom.generate(ev["env_seed"])
        assert ev["score"] == pytest.approx(dom.exact_regret(env, pre, None).value, abs=1e-12)


def test_state_round_trip_continues_identically():
    dom = matrix()
    a_rng = np.random.default_rng(13)
    a = init_state("maestro", dom, a_rng, maestro=MaestroConfig(checkpoint_interval=4, member_capacity=4))
    train_until(a, a_rng, 10)
    snap, rng_state = a.to_dict(), a_rng.bit_generator.state
    b_rng = np.random.default_rng()
    b_rng.bit_generator.state = rng_state
    b = init_state("maestro", dom, np.random.default_rng(0), maestro=a.maestro)
    b.load_dict(snap)
    train_until(a, a_rng, 25)
    train_until(b, b_rng, 25)
    assert a.events[-len(b.events):] == b.events
    assert same_weights(weights_of(a.student), weights_of(b.student))
