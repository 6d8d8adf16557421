"""Command-line entry point: ``maestro {train,eval,plot,table1,landscape}``.

Exit codes: 0 ok, 1 failed check, 2 configuration error, 3 missing artifact,
4 data error.
"""
from __future__ import annotations

import argparse
import dataclasses
import csv
import json
import logging
import sys
from collections import defaultdict
from pathlib import Path

import numpy as np

from .config import ExperimentConfig, load_config
from .errors import ConfigError, ParameterError, ParseError, UsageError
from .evaluation import normalize_returns, regret_landscape, run_round_robin, run_specialist_eval, tournament_schedule
from .experiment import METRICS_HEADER, Trainer, atomic_write, file_sha256, load_run, run_directory, write_manifest
from .learner.policy import BUILTIN_POLICIES, PolicyParams, builtin_policy
from .matrix_lab import format_matrix, independent_argmax, joint_argmax, load_regret_matrix, table1
from .plotting import bar_chart, line_chart

EXIT_OK, EXIT_FAILED, EXIT_CONFIG, EXIT_MISSING, EXIT_DATA = 0, 1, 2, 3, 4

log = logging.getLogger("maestro")


class MissingArtifact(Exception):
    pass


class DataError(Exception):
    pass


def _config(args) -> ExperimentConfig:
    if not args.config:
        raise ConfigError("--config is required")
    cfg = load_config(args.config)
    changes = {}
    if args.seed is not None:
        changes["seeds"] = (args.seed,)
    if args.out:
        changes["output_dir"] = args.out
    if args.deterministic:
        changes["num_workers"] = 1
    return cfg.replace(**changes) if changes else cfg


# ------------------------------------------------------------------ train


def cmd_train(args) -> int:
    cfg = _config(args)
    for seed in cfg.seeds:
        run_dir = run_directory(cfg, seed)
        if args.resume and not (run_dir / "state.json").exists():
            raise MissingArtifact(f"nothing to resume in {run_dir}")
        run_dir.mkdir(parents=True, exist_ok=True)
        state = Trainer(cfg, seed, run_dir).run(resume=args.resume)
        print(f"{cfg.method} seed {seed}: {state.updates} updates, {state.episodes} episodes, "
              f"population {len(state.population)} -> {run_dir}")
    return EXIT_OK


# ------------------------------------------------------------------- eval


def _load_policy(ref: str) -> PolicyParams:
    if ref.startswith("builtin:"):
        name = ref.split(":", 1)[1]
        if name not in BUILTIN_POLICIES:
            raise ConfigError(f"evaluation.runs: unknown builtin policy {name!r}")
        return builtin_policy(name)
    path = Path(ref)
    if path.is_dir():
        path = path / "checkpoints" / "student_final.json"
    if not path.exists():
        raise MissingArtifact(f"missing checkpoint {path}")
    return PolicyParams.from_dict(json.loads(path.read_text()))


def cmd_eval(args) -> int:
    cfg = _config(args)
    ev = cfg.evaluation
    if not ev.levels:
        raise ConfigError("evaluation.levels: at least one level is required")
    if not ev.runs:
        raise ConfigError("evaluation.runs: no policies to evaluate")
    policies = {m: [_load_policy(r) for r in refs] for m, refs in ev.runs.items()}
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    schedule = tournament_schedule(policies, ev.levels, ev.episodes_per_pair, ev.seed, ev.include_self)
    atomic_write(out / "schedule.json", json.dumps([dataclasses.asdict(s) for s in schedule], indent=1, sort_keys=True) + "\n")
    workers = 1 if args.deterministic else cfg.num_workers
    try:
        table = run_round_robin(
            policies,
            list(ev.levels),
            ev.episodes_per_pair,
            ev.seed,
            ev.greedy,
            ev.include_self,
            cfg.lasertag.max_episode_steps,
            workers,
        )
    except ParameterError as e:
        raise ConfigError(f"evaluation: {e}") from None
    atomic_write(out / "tournament.csv", table.to_csv())
    atomic_write(out / "tournament.json", table.to_json())
    atomic_write(out / "tournament_normalized.json", normalize_returns(table).to_json())
    for m in table.methods:
        print(f"{m}: mean return {table.mean_return(m):+.4f}")
    if ev.specialist_budget > 0:
        first = next(iter(policies))
        rep = run_specialist_eval(policies[first], list(ev.levels), ev.specialist_budget, cfg, ev.episodes_per_pair, ev.seed)
        atomic_write(
            out / "specialists.json",
            json.dumps(
                {"generalist": first, "levels": rep.levels, "mean_return": rep.mean_return, "win_rate": rep.win_rate,
                 "training_runs": rep.training_runs},
                indent=2,
                sort_keys=True,
            )
            + "\n",
        )
    write_manifest(out, {"command": "eval"})
    return EXIT_OK


# ------------------------------------------------------------------- plot


def _read_csv(path: Path, required: tuple[str, ...]) -> list[dict]:
    try:
        with open(path, newline="") as f:
            reader = csv.DictReader(f)
            if reader.fieldnames is None:
                raise DataError(f"{path}: empty CSV")
            missing = [c for c in required if c not in reader.fieldnames]
            if missing:
                raise DataError(f"{path}: missing columns {missing}")
            rows = list(reader)
    except (OSError, csv.Error, UnicodeDecodeError) as e:
        raise DataError(f"{path}: {e}") from None
    if not rows:
        raise DataError(f"{path}: no data rows")
    return rows


def _num(v: str, path: Path) -> float | None:
    if v == "":
        return None
    try:
        return float(v)
    except (TypeError, ValueError):
        raise DataError(f"{path}: not a number: {v!r}") from None


def _method_of(metrics_path: Path) -> str:
    manifest = metrics_path.parent / "manifest.json"
    if manifest.exists():
        try:
            return json.loads(manifest.read_text()).get("method") or metrics_path.parent.name
        except json.JSONDecodeError:
            pass
    return metrics_path.parent.parent.name or metrics_path.parent.name


def cmd_plot(args) -> int:
    root = Path(args.results)
    if not root.is_dir():
        raise MissingArtifact(f"no results directory {root}")
    out = Path(args.out) if args.out else root
    out.mkdir(parents=True, exist_ok=True)
    written = []
    metrics = sorted(root.rglob("metrics.csv"))
    if metrics:
        by_method: dict[str, dict[str, dict[float, list[float]]]] = defaultdict(lambda: defaultdict(lambda: defaultdict(list)))
        for path in metrics:
            rows = _read_csv(path, METRICS_HEADER)
            method = _method_of(path)
            for r in rows:
                vals = {c: _num(r[c], path) for c in METRICS_HEADER}
                if vals["update"] is None:
                    raise DataError(f"{path}: row without an update count")
                for col in ("wall_density_window", "grid_size_window", "mean_score"):
                    if vals[col] is not None:
                        by_method[col][method][vals["update"]].append(vals[col])
        for col, title in (
            ("wall_density_window", "Wall density of trained-on levels"),
            ("grid_size_window", "Grid size of trained-on levels"),
            ("mean_score", "Mean regret score"),
        ):
            series = {
                m: (sorted(d), [float(np.mean(d[u])) for u in sorted(d)]) for m, d in sorted(by_method[col].items())
            }
            if series:
                atomic_write(out / f"{col}.svg", line_chart(series, title, "student updates", col))
                written.append(f"{col}.svg")
    for tcsv in sorted(root.rglob("tournament.csv")):
        rows = _read_csv(tcsv, ("method_a", "method_b", "return_a", "return_b"))
        totals: dict[str, list[float]] = defaultdict(list)
        for r in rows:
            totals[r["method_a"]].append(_num(r["return_a"], tcsv))
            totals[r["method_b"]].append(_num(r["return_b"], tcsv))
        means = {m: (float(np.mean(v)) + 1.0) / 2.0 for m, v in totals.items()}
        rel = tcsv.parent.relative_to(root).parts
        name = "tournament.svg" if not rel else f"tournament_{'_'.join(rel)}.svg"
        atomic_write(out / name, bar_chart(means, "Round-robin normalized return", "(r + 1) / 2"))
        written.append(name)
    if not written:
        raise DataError(f"{root}: no metrics.csv or tournament.csv found")
    hashes = {name: file_sha256(out / name) for name in written}
    atomic_write(out / "plots_manifest.json", json.dumps({"files": hashes}, indent=2, sort_keys=True) + "\n")
    for name in written:
        print(out / name)
    return EXIT_OK


# ----------------------------------------------------------------- table1


def cmd_table1(args) -> int:
    try:
        m = load_regret_matrix(args.matrix) if args.matrix else table1()
    except FileNotFoundError as e:
        raise MissingArtifact(str(e)) from None
    except ParseError as e:
        raise DataError(str(e)) from None
    rows = m.co_players
    cols = m.environments
    jr, jc = joint_argmax(m)
    ir, ic = independent_argmax(m)
    jv, iv = float(m.regret[jr, jc]), float(m.regret[ir, ic])
    print("regret matrix (rows co-players, columns environments):")
    print("        " + " ".join(f"{c:>7}" for c in cols))
    for r, row in zip(rows, m.regret):
        print(f"{r:>7} " + " ".join(f"{x:7.3f}" for x in row))
    print(f"row means:    {' '.join(f'{x:.4f}' for x in m.regret.mean(axis=1))}")
    print(f"column means: {' '.join(f'{x:.4f}' for x in m.regret.mean(axis=0))}")
    print(f"joint selection:       ({rows[jr]}, {cols[jc]}) regret {jv:g}")
    print(f"independent selection: ({rows[ir]}, {cols[ic]}) regret {iv:g}")
    ok = (rows[jr], cols[jc], jv) == ("piA", "theta1", 0.6) and (rows[ir], cols[ic], iv) == ("piC", "theta3", 0.4)
    print("matches the published selections" if ok else "DOES NOT match the published selections")
    return EXIT_OK if ok else EXIT_FAILED


# -------------------------------------------------------------- landscape


def cmd_landscape(args) -> int:
    cfg = _config(args)
    # --out redirects the landscape output, not where the run is looked up
    base = load_config(args.config).output_dir if args.config else cfg.output_dir
    run = Path(args.run) if args.run else run_directory(cfg, cfg.seeds[0], base)
    try:
        trainer = load_run(run, cfg if args.config else None)
    except FileNotFoundError as e:
        raise MissingArtifact(str(e)) from None
    st = trainer.state
    rng = np.random.default_rng(cfg.evaluation.seed)
    m = regret_landscape(
        st.student,
        st.population.members,
        cfg.evaluation.sample_envs,
        trainer.domain,
        rng,
        cfg.maestro.estimator,
        registry=st.registry,
    )
    jr, jc = joint_argmax(m)
    ir, ic = independent_argmax(m)
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    atomic_write(out / "landscape.txt", format_matrix(m.regret, m.co_players, m.environments))
    print(f"regret landscape {m.regret.shape[0]} co-players x {m.regret.shape[1]} environments")
    print(f"joint selection:       ({m.co_players[jr]}, {m.environments[jc]}) regret {m.regret[jr, jc]:.4f}")
    print(f"independent selection: ({m.co_players[ir]}, {m.environments[ic]}) regret {m.regret[ir, ic]:.4f}")
    return EXIT_OK


# ------------------------------------------------------------------- main


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="maestro", description="Joint environment and co-player curricula.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, config=True):
        if config:
            sp.add_argument("--config", help="experiment YAML file")
        sp.add_argument("--seed", type=int, help="override the config's seed list with one seed")
        sp.add_argument("--deterministic", action="store_true", help="force serial, bit-reproducible execution")
        sp.add_argument("--resume", action="store_true", help="continue from the latest snapshot")
        sp.add_argument("--out", help="output directory")

    common(sub.add_parser("train", help="run the configured curriculum"))
    common(sub.add_parser("eval", help="round-robin cross-play of trained policies"))
    sp = sub.add_parser("plot", help="render SVG charts from a results directory")
    sp.add_argument("results")
    sp.add_argument("--out")
    sp = sub.add_parser("table1", help="joint vs independent selection on the bundled regret matrix")
    sp.add_argument("--matrix", help="alternative matrix file")
    sp = sub.add_parser("landscape", help="regret of the student against each co-player on sampled levels")
    common(sp)
    sp.add_argument("--run", help="run directory (defaults to the config's first seed)")
    return p


COMMANDS = {
    "train": cmd_train,
    "eval": cmd_eval,
    "plot": cmd_plot,
    "table1": cmd_table1,
    "landscape": cmd_landscape,
}


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (MissingArtifact, UsageError) as e:
        print(f"missing artifact: {e}", file=sys.stderr)
        return EXIT_MISSING
    except DataError as e:
        print(f"data error: {e}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
