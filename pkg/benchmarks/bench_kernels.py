"""Compare the compiled and pure-Python kernel backends.

    python benchmarks/bench_kernels.py [--repeat 5]

Each kernel is timed on identical inputs under both backends; outputs are
checked for equality before timing so a speedup never hides a divergence.
"""
from __future__ import annotations

import argparse
import timeit

import numpy as np

from maestro.kernels import available_backends
from maestro.lasertag import held_out_level, initial_state
from maestro.learner.tabular import lasertag_model


def _workloads(rng: np.random.Generator):
    level = held_out_level("Arena1")
    walls = np.ascontiguousarray(initial_state(level).walls, dtype=np.uint8)
    h, w = walls.shape
    free = np.argwhere(walls == 0)
    n = 4096
    a = free[rng.integers(len(free), size=n)]
    b = free[rng.integers(len(free), size=n)]
    poses = np.column_stack([a[:, 1], a[:, 0], rng.integers(4, size=n), b[:, 1], b[:, 0], rng.integers(4, size=n)])
    poses = np.ascontiguousarray(poses, dtype=np.int64)
    a0 = rng.integers(5, size=n).astype(np.int64)
    a1 = rng.integers(5, size=n).astype(np.int64)
    T = 4096
    rewards = rng.normal(size=T)
    values = rng.normal(size=T)
    dones = (rng.random(T) < 0.02).astype(np.uint8)
    model = lasertag_model(held_out_level("Arena1"))
    opp = np.full((model.num_states, model.num_actions), 1.0 / model.num_actions)

    def vi(k):
        v = np.zeros(model.num_states)
        return np.asarray(k.vi_solve(model.next_state, model.reward, model.done, opp, 0.99, 1e-6, 10000, v)[0])

    return {
        "lt_step x4096": lambda k: np.array([k.lt_step(walls, tuple(int(x) for x in p), int(u), int(v))
                                            for p, u, v in zip(poses, a0, a1)]),
        "lt_step_batch 4096": lambda k: k.lt_step_batch(walls, poses, a0, a1)[0],
        "lt_observe_batch 4096": lambda k: k.lt_observe_batch(walls, poses, 0),
        "gae_backward T=4096": lambda k: k.gae_backward(rewards, values, dones, 0.0, 0.99, 0.95),
        f"vi_solve S={model.num_states}": vi,
    }


# Gauss-Seidel (compiled) and Jacobi (python) sweeps both stop at a Bellman
# residual <= tol, so values agree only to within 2 * tol / (1 - gamma).
TOLERANCE = {"vi_solve": 2 * 1e-6 / (1 - 0.99)}


def main(argv=None) -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    backends = available_backends()
    work = _workloads(np.random.default_rng(0))
    names = list(backends)
    print(f"{'kernel':28s}" + "".join(f"{n:>12s}" for n in names) + ("     speedup" if len(names) > 1 else ""))
    for label, fn in work.items():
        outs = [np.asarray(fn(backends[n])) for n in names]
        atol = TOLERANCE.get(label.split()[0], 1e-9)
        for o in outs[1:]:
            np.testing.assert_allclose(o, outs[0], rtol=0, atol=atol)
        times = []
        for n in names:
            times.append(min(timeit.repeat(lambda: fn(backends[n]), number=1, repeat=args.repeat)))
        row = f"{label:28s}" + "".join(f"{t * 1e3:10.3f}ms" for t in times)
        if len(times) > 1:
            row += f"{times[0] / times[1]:11.1f}x"
        print(row)
    if "cython" not in backends:
        print("compiled extension not built; only the python backend was timed")


if __name__ == "__main__":
    main()
