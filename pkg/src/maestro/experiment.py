"""Run directories: training with event logs, metrics, checkpoints and resume.

Layout of one run directory::

    config.yaml          resolved configuration
    events.jsonl         one JSON record per curriculum iteration
    metrics.csv          one row every ``logging.metrics_interval`` updates
    state.json           latest resumable snapshot (includes the RNG state)
    checkpoints/         student_final.json and one file per population member
    manifest.json        sha256 of every other file

Files are written so that two runs of the same config are byte-identical.
"""
from __future__ import annotations

import csv
import hashlib
import io
import json
import os
from importlib import resources
from pathlib import Path

import numpy as np

from .config import ExperimentConfig
from .core import make_rng
from .curriculum.domains import Domain, LaserTagDomain, MatrixDomain
from .curriculum.loop import TrainingState, init_state, training_step
from .errors import UsageError
from .lasertag.levels import held_out_level
from .matrix_lab import ZeroSumGame, parse_matrix, random_game

METRICS_HEADER = (
    "update",
    "episodes",
    "branch_fraction",
    "mean_score",
    "buffer_size_total",
    "population_size",
    "wall_density_window",
    "grid_size_window",
)
MANIFEST = "manifest.json"


def dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def atomic_write(path: Path, text: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


def matrix_suite(cfg: ExperimentConfig) -> list[ZeroSumGame]:
    fixture = cfg.matrix_fixture
    if fixture == "random":
        rng = make_rng(cfg.matrix.suite_seed)
        return [random_game(rng, cfg.matrix.rows, cfg.matrix.cols) for _ in range(cfg.matrix.num_games)]
    text = resources.files("maestro").joinpath(f"data/games/{fixture}.txt").read_text()
    return [ZeroSumGame(parse_matrix(text)[0])]


def build_domain(cfg: ExperimentConfig) -> Domain:
    ppo = cfg.ppo_full
    if cfg.matrix_fixture is not None:
        return MatrixDomain(ppo, matrix_suite(cfg))
    lt = cfg.lasertag
    return LaserTagDomain(
        ppo,
        policy=lt.policy,
        hidden=lt.hidden,
        min_side=lt.min_side,
        max_side=lt.max_side,
        max_episode_steps=lt.max_episode_steps,
        fixed_level=held_out_level(lt.level) if lt.level else None,
    )


def file_sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def write_manifest(directory: Path, extra: dict | None = None) -> dict:
    """Hash every file under ``directory`` (except the manifest) into manifest.json."""
    directory = Path(directory)
    files = {}
    for p in sorted(directory.rglob("*")):
        if p.is_file() and p.name != MANIFEST and not p.name.endswith(".tmp"):
            files[p.relative_to(directory).as_posix()] = file_sha256(p)
    manifest = {"files": files, **(extra or {})}
    atomic_write(directory / MANIFEST, json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return manifest


def metrics_row(events: list[dict], state: TrainingState) -> list:
    trained = [e for e in events if e["trained"]]
    dens = [e["wall_density"] for e in trained if e["wall_density"] is not None]
    size = [e["grid_size"] for e in trained if e["grid_size"] is not None]
    return [
        state.updates,
        state.episodes,
        len(trained) / len(events) if events else 0.0,
        float(np.mean([e["score"] for e in events])) if events else 0.0,
        sum(state.buffer_sizes()),
        len(state.population),
        float(np.mean(dens)) if dens else "",
        float(np.mean(size)) if size else "",
    ]


def _csv_line(row) -> str:
    buf = io.StringIO()
    csv.writer(buf, lineterminator="\n").writerow([repr(x) if isinstance(x, float) else x for x in row])
    return buf.getvalue()


class Trainer:
    """Drives one (config, seed) training run inside ``run_dir``."""

    def __init__(self, cfg: ExperimentConfig, seed: int, run_dir: str | Path):
        self.cfg = cfg
        self.seed = int(seed)
        self.run_dir = Path(run_dir)
        self.domain = build_domain(cfg)
        self.rng = make_rng(self.seed)
        self.state = init_state(cfg.method, self.domain, self.rng, cfg.replay, cfg.maestro, cfg.pfsp)
        self.state.budget = cfg.budget
        self.events: list[dict] = []
        self.metrics_rows = 0
        self._window_start = 0

    @property
    def ckpt_dir(self) -> Path:
        return self.run_dir / "checkpoints"

    # ----------------------------------------------------------------- files

    def _prepare(self) -> None:
        self.ckpt_dir.mkdir(parents=True, exist_ok=True)
        atomic_write(self.run_dir / "config.yaml", self.cfg.to_yaml())
        (self.run_dir / "events.jsonl").write_text("")
        (self.run_dir / "metrics.csv").write_text(_csv_line(METRICS_HEADER))
        self._write_member(0)

    def _write_member(self, index: int) -> None:
        m = self.state.population.members[index]
        atomic_write(self.ckpt_dir / f"member_{m.checkpoint_id:04d}.json", dumps(m.to_dict()) + "\n")

    def _snapshot(self) -> None:
        snap = {
            "version": 1,
            "seed": self.seed,
            "state": self.state.to_dict(),
            "rng": self.rng.bit_generator.state,
            "events_written": len(self.events),
            "metrics_rows": self.metrics_rows,
            "window_start": self._window_start,
        }
        atomic_write(self.run_dir / "state.json", dumps(snap) + "\n")

    def _resume(self) -> None:
        path = self.run_dir / "state.json"
        if not path.exists():
            raise UsageError(f"no snapshot to resume from in {self.run_dir}")
        snap = json.loads(path.read_text())
        self.state.load_dict(snap["state"])
        self.rng.bit_generator.state = snap["rng"]
        n, rows = snap["events_written"], snap["metrics_rows"]
        lines = (self.run_dir / "events.jsonl").read_text().splitlines(keepends=True)[:n]
        (self.run_dir / "events.jsonl").write_text("".join(lines))
        self.events = [json.loads(line) for line in lines]
        mlines = (self.run_dir / "metrics.csv").read_text().splitlines(keepends=True)[: rows + 1]
        (self.run_dir / "metrics.csv").write_text("".join(mlines))
        self.metrics_rows = rows
        self._window_start = snap["window_start"]

    # ------------------------------------------------------------------ loop

    def run(self, resume: bool = False, stop_after: int | None = None) -> TrainingState:
        """Train to the configured budget; ``stop_after`` halts early (used to simulate a crash)."""
        if resume:
            self._resume()
        else:
            self._prepare()
        st, log = self.state, self.cfg.logging
        with open(self.run_dir / "events.jsonl", "a") as ev, open(self.run_dir / "metrics.csv", "a") as mf:
            while st.updates < self.cfg.budget:
                if stop_after is not None and st.updates >= stop_after:
                    return st
                before = st.updates
                training_step(st, self.rng)
                event = st.events.pop()
                self.events.append(event)
                ev.write(dumps(event) + "\n")
                if event["checkpoint_added"] is not None:
                    self._write_member(event["checkpoint_added"])
                if st.updates != before:
                    if st.updates % log.metrics_interval == 0:
                        mf.write(_csv_line(metrics_row(self.events[self._window_start :], st)))
                        self.metrics_rows += 1
                        self._window_start = len(self.events)
                    if st.updates % log.snapshot_interval == 0:
                        ev.flush()
                        mf.flush()
                        self._snapshot()
        self._snapshot()
        atomic_write(self.ckpt_dir / "student_final.json", dumps(st.student.to_dict()) + "\n")
        write_manifest(self.run_dir, {"method": self.cfg.method, "seed": self.seed})
        return st


def run_directory(cfg: ExperimentConfig, seed: int, out: str | Path | None = None) -> Path:
    return Path(out or cfg.output_dir) / cfg.method / f"seed_{seed}"


def load_run(run_dir: str | Path, cfg: ExperimentConfig | None = None) -> Trainer:
    """Rebuild a finished (or interrupted) run from its directory."""
    from .config import load_config

    run_dir = Path(run_dir)
    if not (run_dir / "state.json").exists():
        raise FileNotFoundError(f"no state.json in {run_dir}")
    cfg = cfg or load_config(run_dir / "config.yaml")
    snap = json.loads((run_dir / "state.json").read_text())
    tr = Trainer(cfg, snap["seed"], run_dir)
    tr.state.load_dict(snap["state"])
    tr.rng.bit_generator.state = snap["rng"]
    return tr
