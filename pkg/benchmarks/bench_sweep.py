"""Compare the compiled and pure-Python sweep kernels.

The sweep (one Bellman backup: q = P @ g per state-action row, then a
per-state max or min reduction) is the hot loop of every value-iteration
variant in the package.  This script times both backends on synthetic
CSR models of growing size and prints a table.

Usage: python benchmarks/bench_sweep.py [--repeats N]
"""

import argparse
import statistics
import time

import numpy as np

from mapsynth._kernels import BACKEND, available_backends


def synthetic_csr(n_states: int, actions_per_state: int, branching: int, seed: int):
    rng = np.random.default_rng(seed)
    n_rows = n_states * actions_per_state
    indptr = np.arange(0, branching * (n_rows + 1), branching, dtype=np.int64)
    indices = rng.integers(0, n_states, size=branching * n_rows, dtype=np.int64)
    data = rng.random(branching * n_rows)
    for r in range(n_rows):
        row = data[indptr[r] : indptr[r + 1]]
        row /= row.sum()
    state_indptr = np.arange(
        0, actions_per_state * (n_states + 1), actions_per_state, dtype=np.int64
    )
    g = rng.random(n_states)
    return data, indices, indptr, state_indptr, g


def time_backend(fn, args, repeats: int) -> float:
    times = []
    for _ in range(repeats):
        start = time.perf_counter()
        fn(*args, True)
        times.append(time.perf_counter() - start)
    return statistics.median(times)


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=7)
    opts = parser.parse_args()

    backends = available_backends()
    print(f"selected backend: {BACKEND}")
    print(f"available: {', '.join(sorted(backends))}")
    sizes = [(100, 3, 4), (1_000, 4, 8), (10_000, 4, 8), (100_000, 4, 8)]
    header = f"{'states':>8} {'rows':>8} {'nnz':>9}" + "".join(
        f" {name + ' (ms)':>14}" for name in sorted(backends)
    )
    if len(backends) == 2:
        header += f" {'speedup':>9}"
    print(header)
    for n_states, actions, branching in sizes:
        args = synthetic_csr(n_states, actions, branching, seed=n_states)
        n_rows = n_states * actions
        timings = {
            name: time_backend(fn, args, opts.repeats)
            for name, fn in backends.items()
        }
        line = f"{n_states:>8} {n_rows:>8} {n_rows * branching:>9}"
        for name in sorted(backends):
            line += f" {timings[name] * 1e3:>14.3f}"
        if len(timings) == 2:
            line += f" {timings['python'] / timings['cython']:>8.2f}x"
        print(line)

    # agreement spot check on the largest instance
    results = [
        np.asarray(fn(*args, True)[1]) for fn in backends.values()
    ]
    if len(results) == 2:
        print(f"max |v_python - v_cython| = {np.max(np.abs(results[0] - results[1])):.3e}")


if __name__ == "__main__":
    main()
