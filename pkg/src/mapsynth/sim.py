"""Monte-Carlo execution of policy-induced chains.

Randomness comes from numpy's Philox counter-based generator keyed by the
user seed; trial ``t`` consumes row ``t`` of a pre-laid-out uniform matrix,
so trials are independent streams and results are reproducible bit-for-bit
on one platform for a fixed seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from mapsynth import pctl
from mapsynth.mdp import Dtmc, FinitePath


@dataclass(frozen=True)
class SimConfig:
    trials: int
    max_steps: int
    seed: int = 0

    def __post_init__(self):
        if self.trials < 1 or self.max_steps < 1:
            raise ValueError("trials and max_steps must be positive")
        if self.seed < 0:
            raise ValueError("seed must be a nonnegative 64-bit integer")


@dataclass
class SimReport:
    estimate: float
    stderr: float
    trials: int
    truncated: bool = False
    sample_traces: list = field(default_factory=list)  # first few FinitePaths


def _rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=np.uint64(seed)))


def _chain_arrays(d: Dtmc):
    index = {s: i for i, s in enumerate(d.states)}
    succs, cums = [], []
    for s in d.states:
        items = sorted(d.row(s).items())
        succs.append(np.array([index[t] for t, _ in items], dtype=np.int64))
        cums.append(np.cumsum([p for _, p in items]))
    return index, succs, cums


def simulate_path(d: Dtmc, start: str, max_steps: int, rng: np.random.Generator) -> FinitePath:
    """Sample one path of exactly ``max_steps`` steps."""
    index, succs, cums = _chain_arrays(d)
    states = [start]
    cur = index[start]
    for _ in range(max_steps):
        u = rng.random()
        cur = int(succs[cur][np.searchsorted(cums[cur], u)])
        states.append(d.states[cur])
    return FinitePath(tuple(states))


def _sample_matrix(d: Dtmc, start: str, cfg: SimConfig) -> np.ndarray:
    """All trials at once: (trials, max_steps + 1) state-index matrix."""
    index, succs, cums = _chain_arrays(d)
    uniforms = _rng(cfg.seed).random((cfg.trials, cfg.max_steps))
    cur = np.full(cfg.trials, index[start], dtype=np.int64)
    out = np.empty((cfg.trials, cfg.max_steps + 1), dtype=np.int64)
    out[:, 0] = cur
    for step in range(cfg.max_steps):
        nxt = np.empty_like(cur)
        for si in set(cur.tolist()):
            mask = cur == si
            picks = np.searchsorted(cums[si], uniforms[mask, step])
            nxt[mask] = succs[si][picks]
        cur = nxt
        out[:, step + 1] = cur
    return out


def path_satisfies(states, kind: str, sets) -> bool:
    """Evaluate a resolved path formula on a concrete state sequence."""
    if kind == "next":
        (target,) = sets
        return len(states) > 1 and states[1] in target
    sat1, sat2, bound = sets
    limit = len(states) - 1 if bound == pctl.INF else min(int(bound), len(states) - 1)
    for i in range(limit + 1):
        if states[i] in sat2:
            return True
        if states[i] not in sat1:
            return False
    return False


def estimate_path_prob(d: Dtmc, kind: str, sets, cfg: SimConfig) -> SimReport:
    """Fraction of sampled paths satisfying the resolved path formula.

    ``kind`` is "next" or "until"; ``sets`` carries the pre-resolved Sat
    sets, plus the bound for until.  An unbounded until is truncated at
    ``max_steps`` and flagged: the estimate is then a lower bound on the
    reachability probability.
    """
    index = {s: i for i, s in enumerate(d.states)}
    truncated = False
    if kind == "next":
        (target,) = sets
        steps = 1
        target_idx = {index[s] for s in target if s in index}
    else:
        sat1, sat2, bound = sets
        truncated = bound == pctl.INF or bound > cfg.max_steps
        steps = cfg.max_steps if bound == pctl.INF else min(int(bound), cfg.max_steps)
        steps = max(steps, 1)
        sat1_idx = {index[s] for s in sat1 if s in index}
        sat2_idx = {index[s] for s in sat2 if s in index}
    run_cfg = SimConfig(cfg.trials, steps, cfg.seed)
    mat = _sample_matrix(d, d.initial, run_cfg)
    n = len(d.states)
    if kind == "next":
        in_target = np.zeros(n, dtype=bool)
        for si in target_idx:
            in_target[si] = True
        hits = in_target[mat[:, 1]]
    else:
        in2 = np.zeros(n, dtype=bool)
        in1 = np.zeros(n, dtype=bool)
        for si in sat2_idx:
            in2[si] = True
        for si in sat1_idx:
            in1[si] = True
        check_limit = steps if bound == pctl.INF else min(int(bound), steps)
        hits = np.zeros(cfg.trials, dtype=bool)
        alive = np.ones(cfg.trials, dtype=bool)
        for i in range(check_limit + 1):
            col = mat[:, i]
            hit_now = alive & in2[col]
            hits |= hit_now
            alive &= ~hit_now & in1[col]
            if not alive.any():
                break
    p_hat = float(np.mean(hits))
    stderr = math.sqrt(p_hat * (1.0 - p_hat) / cfg.trials)
    traces = [
        FinitePath(tuple(d.states[si] for si in mat[t]))
        for t in range(min(3, cfg.trials))
    ]
    return SimReport(
        estimate=p_hat,
        stderr=stderr,
        trials=cfg.trials,
        truncated=truncated,
        sample_traces=traces,
    )


def format_trace(path: FinitePath) -> str:
    """One line per step: step, state, action (empty for chain traces)."""
    lines = []
    for i, s in enumerate(path.states):
        action = path.actions[i] if i < len(path.actions) else ""
        lines.append(f"{i}\t{s}\t{action}")
    return "\n".join(lines)
