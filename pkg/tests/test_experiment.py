"""Run directories: artifacts, resume and byte-level determinism."""
import json

import pytest

from maestro.config import parse_config
from maestro.errors import UsageError
from maestro.experiment import METRICS_HEADER, Trainer, file_sha256, load_run, run_directory

MATRIX = """
method: maestro
environment: matrix:random
budget: 50
ppo: {learning_rate: 0.1, epochs: 1, minibatches: 1}
maestro: {checkpoint_interval: 10, member_capacity: 8}
replay: {capacity: 16}
logging: {metrics_interval: 5, snapshot_interval: 10}
"""

LASERTAG = """
method: maestro
budget: 15
ppo: {learning_rate: 0.05, epochs: 1, minibatches: 1}
lasertag: {policy: tabular, min_side: 5, max_side: 6, max_episode_steps: 24}
maestro: {checkpoint_interval: 5, member_capacity: 8}
logging: {metrics_interval: 5, snapshot_interval: 5}
"""


def tree(d):
    return {p.relative_to(d).as_posix(): p.read_bytes() for p in sorted(d.rglob("*")) if p.is_file()}


def train(text, out, seed=0, **kw):
    cfg = parse_config(text)
    tr = Trainer(cfg, seed, run_directory(cfg, seed, out))
    tr.run(**kw)
    return tr


def test_artifacts_present(tmp_path):
    tr = train(MATRIX, tmp_path)
    d = tr.run_dir
    for name in ("config.yaml", "events.jsonl", "metrics.csv", "state.json", "manifest.json",
                 "checkpoints/student_final.json", "checkpoints/member_0000.json", "checkpoints/member_0005.json"):
        assert (d / name).exists(), name
    lines = (d / "metrics.csv").read_text().splitlines()
    assert lines[0].split(",") == list(METRICS_HEADER)
    assert len(lines) == 1 + 50 // 5
    events = [json.loads(x) for x in (d / "events.jsonl").read_text().splitlines()]
    assert [e["iteration"] for e in events] == list(range(len(events)))
    assert sum(e["trained"] for e in events) == 50


def test_manifest_hashes_every_file(tmp_path):
    d = train(MATRIX, tmp_path).run_dir
    manifest = json.loads((d / "manifest.json").read_text())
    listed = manifest["files"]
    on_disk = {k for k in tree(d) if k != "manifest.json"}
    assert set(listed) == on_disk
    assert all(listed[k] == file_sha256(d / k) for k in listed)
    assert manifest["method"] == "maestro"


@pytest.mark.parametrize("text", [MATRIX, LASERTAG], ids=["matrix", "lasertag"])
def test_two_runs_are_byte_identical(tmp_path, text):
    a = train(text, tmp_path / "a").run_dir
    b = train(text, tmp_path / "b").run_dir
    assert tree(a) == tree(b)


def test_different_seeds_differ(tmp_path):
    a = train(MATRIX, tmp_path, seed=0).run_dir
    b = train(MATRIX, tmp_path, seed=1).run_dir
    assert (a / "events.jsonl").read_bytes() != (b / "events.jsonl").read_bytes()


@pytest.mark.parametrize("text", [MATRIX, LASERTAG], ids=["matrix", "lasertag"])
def test_resume_after_interruption_matches_uninterrupted_run(tmp_path, text):
    full = train(text, tmp_path / "full").run_dir
    cfg = parse_config(text)
    stop = 10 if cfg.budget == 15 else 30
    d = run_directory(cfg, 0, tmp_path / "crash")
    Trainer(cfg, 0, d).run(stop_after=stop)
    # simulate work lost after the last snapshot
    with open(d / "events.jsonl", "a") as f:
        f.write('{"partial": true}\n')
    Trainer(cfg, 0, d).run(resume=True)
    assert tree(d) == tree(full)


def test_resume_without_snapshot_is_a_usage_error(tmp_path):
    cfg = parse_config(MATRIX)
    with pytest.raises(UsageError):
        Trainer(cfg, 0, tmp_path / "empty").run(resume=True)


def test_load_run_restores_final_state(tmp_path):
    tr = train(MATRIX, tmp_path)
    again = load_run(tr.run_dir)
    assert again.state.updates == 50
    assert len(again.state.population) == len(tr.state.population)
    assert again.state.student.to_dict() == tr.state.student.to_dict()
    with pytest.raises(FileNotFoundError):
        load_run(tmp_path / "missing")
