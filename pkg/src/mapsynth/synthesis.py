"""Model checking and controller synthesis on a (product) MDP.

Implements the recursive Sat-set rules over action atoms, extremal
probabilities for next / bounded until / unbounded until via value
iteration, graph-based probability-0/1 precomputation, threshold
reduction in both universal and existential modes, and state-action
elimination.  Brute-force oracles used by the test suite live here too.

The hot per-iteration sweep is delegated to :mod:`mapsynth._kernels`.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from mapsynth import pctl
from mapsynth._kernels import sweep
from mapsynth.pctl import And, Atom, Next, Not, ProbOp, TrueFormula, Until

TIE_TOL = 1e-9

UNIVERSAL = "universal"
EXISTENTIAL = "existential"


@dataclass(frozen=True)
class SynthConfig:
    mode: str = EXISTENTIAL
    epsilon: float = 1e-8
    max_iters: int = 10**6


@dataclass
class SatSet:
    formula: object
    states: set


@dataclass
class ExtremalResult:
    mode: str  # "max" or "min"
    values: dict
    witness_actions: dict
    converged: bool = True
    residual: float = 0.0
    iterations: int = 0
    row_values: dict = field(default_factory=dict)  # (state, action) -> final q
    fixed_states: set = field(default_factory=set)  # value pinned by the partition


@dataclass
class AllowedActions:
    per_state: dict  # state -> set of action labels


@dataclass
class UntilPartition:
    s_yes: set
    s_no: set
    s_rem: set


def round9(x: float) -> float:
    """Tolerance-rounding applied before threshold comparison."""
    return round(x, 9)


def threshold_holds(value: float, comparator: str, p: float) -> bool:
    v = round9(value)
    if comparator == ">=":
        return v >= p
    if comparator == ">":
        return v > p
    if comparator == "<=":
        return v <= p
    if comparator == "<":
        return v < p
    raise ValueError(f"bad comparator {comparator!r}")


def extremal_mode(comparator: str, mode: str) -> str:
    """Which extremum decides a threshold under the given quantifier mode.

    Universal: lower thresholds are checked against the worst policy
    (Prob_min for >=/>).  Existential: against the best one (Prob_max).
    """
    lower = comparator in (">=", ">")
    if mode == UNIVERSAL:
        return "min" if lower else "max"
    if mode == EXISTENTIAL:
        return "max" if lower else "min"
    raise ValueError(f"bad mode {mode!r}")


# ---------------------------------------------------------------------------
# Compiled array form


class CompiledModel:
    """CSR layout of a model: rows are (state, action) pairs by state."""

    def __init__(self, model):
        self.model = model
        self.states = list(model.states)
        self.initial = model.initial
        self.index = {s: i for i, s in enumerate(self.states)}
        row_state, row_action = [], []
        indptr, indices, data = [0], [], []
        state_indptr = [0]
        for s in self.states:
            for a in model.actions_at(s):
                row_state.append(self.index[s])
                row_action.append(a)
                for succ, p in model.row(s, a).items():
                    indices.append(self.index[succ])
                    data.append(p)
                indptr.append(len(indices))
            state_indptr.append(len(row_action))
        self.row_state = np.asarray(row_state, dtype=np.int64)
        self.row_action = row_action
        self.indptr = np.asarray(indptr, dtype=np.int64)
        self.indices = np.asarray(indices, dtype=np.int64)
        self.data = np.asarray(data, dtype=np.float64)
        self.state_indptr = np.asarray(state_indptr, dtype=np.int64)
        self.n_states = len(self.states)
        self.n_rows = len(row_action)

    def state_rows(self, s_idx: int) -> range:
        return range(self.state_indptr[s_idx], self.state_indptr[s_idx + 1])

    def row_support(self, r: int) -> np.ndarray:
        return self.indices[self.indptr[r] : self.indptr[r + 1]]

    def actions_at_idx(self, s_idx: int) -> list:
        return [self.row_action[r] for r in self.state_rows(s_idx)]

    def mask(self, states: set) -> np.ndarray:
        m = np.zeros(self.n_states, dtype=bool)
        for s in states:
            m[self.index[s]] = True
        return m


def _compiled(model) -> CompiledModel:
    return model if isinstance(model, CompiledModel) else CompiledModel(model)


def _result_from_arrays(cm, mode, values, q, yes_idx=None, no_idx=None,
                        converged=True, residual=0.0, iterations=0):
    fixed = np.zeros(cm.n_states, dtype=bool)
    if yes_idx is not None:
        fixed[yes_idx] = True
    if no_idx is not None:
        fixed[no_idx] = True
    witnesses, row_values = {}, {}
    for si, s in enumerate(cm.states):
        rows = cm.state_rows(si)
        if q is None or fixed[si]:
            # value fixed independently of the choice: every action attains it
            witnesses[s] = set(cm.actions_at_idx(si))
        else:
            witnesses[s] = {
                cm.row_action[r] for r in rows if abs(q[r] - values[si]) <= TIE_TOL
            }
        if q is not None:
            for r in rows:
                row_values[(s, cm.row_action[r])] = float(q[r])
    return ExtremalResult(
        mode=mode,
        values={s: float(values[si]) for si, s in enumerate(cm.states)},
        witness_actions=witnesses,
        converged=converged,
        residual=residual,
        iterations=iterations,
        row_values=row_values,
        fixed_states={cm.states[si] for si in np.flatnonzero(fixed)},
    )


# ---------------------------------------------------------------------------
# Next


def prob_next_extremal(model, target: set, mode: str) -> ExtremalResult:
    """Extremal one-step probability of landing in ``target``."""
    cm = _compiled(model)
    g = cm.mask(target).astype(np.float64)
    q, v = sweep(cm.data, cm.indices, cm.indptr, cm.state_indptr, g, mode == "max")
    return _result_from_arrays(cm, mode, v, q, iterations=1)


# ---------------------------------------------------------------------------
# Until


def until_partition(model, sat_left: set, sat_right: set) -> UntilPartition:
    states = set(_compiled(model).states)
    s_yes = set(sat_right)
    s_no = states - (set(sat_left) | s_yes)
    return UntilPartition(s_yes, s_no, states - s_yes - s_no)


def _vi(cm, part: UntilPartition, mode: str, *, k=None, epsilon=1e-8, max_iters=10**6):
    """Bounded (k sweeps) or unbounded (to tolerance) value iteration."""
    yes = cm.mask(part.s_yes)
    no = cm.mask(part.s_no)
    yes_idx = np.flatnonzero(yes)
    no_idx = np.flatnonzero(no)
    v = yes.astype(np.float64)
    q = None
    maximize = mode == "max"
    converged, residual, iters = True, 0.0, 0
    limit = k if k is not None else max_iters
    for it in range(limit):
        q, v_new = sweep(cm.data, cm.indices, cm.indptr, cm.state_indptr, v, maximize)
        v_new[yes_idx] = 1.0
        v_new[no_idx] = 0.0
        residual = float(np.max(np.abs(v_new - v))) if len(v_new) else 0.0
        v = v_new
        iters = it + 1
        if k is None and residual < epsilon:
            break
    else:
        if k is None:
            converged = False
    return v, q, yes_idx, no_idx, converged, residual, iters


def prob_bounded_until_extremal(model, part: UntilPartition, k: int, mode: str) -> ExtremalResult:
    """k-step until recursion; value 1 on S_yes, 0 on S_no at every step."""
    if k < 0:
        raise ValueError("bound must be nonnegative")
    cm = _compiled(model)
    v, q, yes_idx, no_idx, _, _, iters = _vi(cm, part, mode, k=k)
    return _result_from_arrays(cm, mode, v, q, yes_idx, no_idx, iterations=iters)


def prob_unbounded_until_extremal(
    model, part: UntilPartition, mode: str, epsilon: float = 1e-8, max_iters: int = 10**6
) -> ExtremalResult:
    """Value iteration to a fixpoint, after qualitative 0/1 precomputation.

    States classified probability-0/1 by graph analysis are pinned to
    exactly 0/1, so the returned values are exact there; elsewhere the
    iteration stops when the sup-norm change drops below ``epsilon``.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    cm = _compiled(model)
    ones, zeros = qualitative_sets(cm, part, mode)
    extended = UntilPartition(
        part.s_yes | ones, part.s_no | zeros, part.s_rem - ones - zeros
    )
    v, q, yes_idx, no_idx, converged, residual, iters = _vi(
        cm, extended, mode, epsilon=epsilon, max_iters=max_iters
    )
    return _result_from_arrays(
        cm, mode, v, q, yes_idx, no_idx, converged=converged, residual=residual, iterations=iters
    )


# ---------------------------------------------------------------------------
# Qualitative precomputation


def qualitative_sets(model, part: UntilPartition, mode: str) -> tuple[set, set]:
    """(probability-1 states, probability-0 states) among S_rem."""
    cm = _compiled(model)
    if mode == "max":
        return _prob1_max(cm, part), _prob0_max(cm, part)
    return _prob1_min(cm, part), _prob0_min(cm, part)


def _succ_sets(cm, rem_idx):
    """Per remaining state: list of frozensets of successor indices, one per action."""
    table = {}
    for si in rem_idx:
        table[si] = [frozenset(cm.row_support(r).tolist()) for r in cm.state_rows(si)]
    return table


def _prob0_max(cm, part) -> set:
    """States in S_rem from which S_yes is unreachable under every policy."""
    rem = {cm.index[s] for s in part.s_rem}
    succ = _succ_sets(cm, rem)
    reachable = {cm.index[s] for s in part.s_yes}
    changed = True
    while changed:
        changed = False
        for si in rem - reachable:
            if any(post & reachable for post in succ[si]):
                reachable.add(si)
                changed = True
    return {cm.states[si] for si in rem - reachable}


def _prob1_max(cm, part) -> set:
    """Greatest set where some policy reaches S_yes with probability one."""
    rem = {cm.index[s] for s in part.s_rem}
    yes = {cm.index[s] for s in part.s_yes}
    succ = _succ_sets(cm, rem)
    candidate = rem | yes
    while True:
        u = set(yes)
        changed = True
        while changed:
            changed = False
            for si in rem - u:
                ok = any(
                    post <= (candidate | yes) and post & u for post in succ[si]
                )
                if ok:
                    u.add(si)
                    changed = True
        if u == candidate:
            return {cm.states[si] for si in u & rem}
        candidate = u


def _prob0_min(cm, part) -> set:
    """States where some policy avoids S_yes forever (min probability 0)."""
    rem = {cm.index[s] for s in part.s_rem}
    no = {cm.index[s] for s in part.s_no}
    succ = _succ_sets(cm, rem)
    r = set(rem)
    changed = True
    while changed:
        changed = False
        for si in list(r):
            if not any(post <= (r | no) for post in succ[si]):
                r.discard(si)
                changed = True
    return {cm.states[si] for si in r}


def _prob1_min(cm, part) -> set:
    """States where every policy reaches S_yes with probability one.

    These are the S_rem states that cannot reach, under any action choice,
    a state from which S_yes is avoidable (S_no or the min-probability-0
    core).
    """
    rem = {cm.index[s] for s in part.s_rem}
    succ = _succ_sets(cm, rem)
    bad = {cm.index[s] for s in part.s_no}
    bad |= {cm.index[s] for s in _prob0_min(cm, part)}
    can_reach_bad = set(bad)
    changed = True
    while changed:
        changed = False
        for si in rem - can_reach_bad:
            if any(post & can_reach_bad for post in succ[si]):
                can_reach_bad.add(si)
                changed = True
    return {cm.states[si] for si in rem - can_reach_bad}


# ---------------------------------------------------------------------------
# Sat sets and threshold reduction


def sat_states(model, phi, config: SynthConfig = SynthConfig()) -> SatSet:
    """Recursive Sat evaluation of a core state formula."""
    cm = _compiled(model)
    if isinstance(phi, TrueFormula):
        states = set(cm.states)
    elif isinstance(phi, Atom):
        states = {
            s for si, s in enumerate(cm.states) if phi.label in cm.actions_at_idx(si)
        }
    elif isinstance(phi, Not):
        states = set(cm.states) - sat_states(cm, phi.sub, config).states
    elif isinstance(phi, And):
        states = (
            sat_states(cm, phi.left, config).states
            & sat_states(cm, phi.right, config).states
        )
    elif isinstance(phi, ProbOp):
        states = check_prob_operator(
            cm, phi.comparator, phi.threshold, phi.path, config
        ).states
    else:
        raise TypeError(f"not a core state formula: {phi!r}")
    return SatSet(phi, states)


def _path_extremal(cm, psi, config: SynthConfig, mode: str) -> ExtremalResult:
    if isinstance(psi, Next):
        target = sat_states(cm, psi.sub, config).states
        return prob_next_extremal(cm, target, mode)
    if isinstance(psi, Until):
        part = until_partition(
            cm,
            sat_states(cm, psi.left, config).states,
            sat_states(cm, psi.right, config).states,
        )
        if psi.bound == pctl.INF:
            return prob_unbounded_until_extremal(
                cm, part, mode, config.epsilon, config.max_iters
            )
        return prob_bounded_until_extremal(cm, part, int(psi.bound), mode)
    raise TypeError(f"not a core path formula: {psi!r}")


def check_prob_operator(
    model, comparator: str, p: float, psi, config: SynthConfig = SynthConfig()
) -> SatSet:
    """Threshold reduction of a probability operator to extremal values."""
    cm = _compiled(model)
    result = _path_extremal(cm, psi, config, extremal_mode(comparator, config.mode))
    states = {s for s, v in result.values.items() if threshold_holds(v, comparator, p)}
    return SatSet(ProbOp(comparator, p, psi), states)


def synthesize_allowed_actions(
    model, comparator: str, p: float, psi, config: SynthConfig = SynthConfig()
) -> AllowedActions:
    """Per-state actions whose final state-action value meets the threshold.

    At states whose value is fixed independently of the choice (the yes/no
    partition and qualitatively classified states, or any state when the
    path formula needs no step), the whole action set survives iff the
    fixed value meets the threshold.
    """
    cm = _compiled(model)
    result = _path_extremal(cm, psi, config, extremal_mode(comparator, config.mode))
    per_state = {}
    for si, s in enumerate(cm.states):
        actions = cm.actions_at_idx(si)
        if not result.row_values or s in result.fixed_states:
            # the value at s does not depend on the choice (yes/no partition,
            # qualitative 0/1 states, or a zero-step path formula)
            keep = set(actions) if threshold_holds(result.values[s], comparator, p) else set()
        else:
            keep = {
                a
                for a in actions
                if threshold_holds(result.row_values[(s, a)], comparator, p)
            }
        per_state[s] = keep
    return AllowedActions(per_state)


# ---------------------------------------------------------------------------
# Brute-force oracles (test-only, deliberately independent of the kernels)


class OracleTooLarge(ValueError):
    pass


def _check_oracle_size(model, max_states=8, max_actions=3):
    states = list(model.states)
    if len(states) > max_states:
        raise OracleTooLarge(f"{len(states)} states exceed oracle bound {max_states}")
    for s in states:
        if len(model.actions_at(s)) > max_actions:
            raise OracleTooLarge(f"state {s!r} has too many actions for the oracle")


def brute_force_next(model, target: set, mode: str) -> ExtremalResult:
    """Oracle for one-step extremal probabilities: direct per-action sums."""
    _check_oracle_size(model)
    values, witnesses = {}, {}
    for s in model.states:
        per_action = {
            a: sum(p for succ, p in model.row(s, a).items() if succ in target)
            for a in model.actions_at(s)
        }
        ext = max(per_action.values()) if mode == "max" else min(per_action.values())
        values[s] = ext
        witnesses[s] = {a for a, v in per_action.items() if abs(v - ext) <= TIE_TOL}
    return ExtremalResult(mode, values, witnesses)


def brute_force_bounded_until(model, part: UntilPartition, k: int, mode: str) -> ExtremalResult:
    """Oracle by memoized recursion over (state, steps left), plain dicts."""
    _check_oracle_size(model)
    if k > 6:
        raise OracleTooLarge("oracle bound is k <= 6")
    memo = {}

    def value(s, j):
        if s in part.s_yes:
            return 1.0
        if s in part.s_no or j == 0:
            return 0.0
        key = (s, j)
        if key not in memo:
            per_action = [
                sum(p * value(succ, j - 1) for succ, p in model.row(s, a).items())
                for a in model.actions_at(s)
            ]
            memo[key] = max(per_action) if mode == "max" else min(per_action)
        return memo[key]

    values = {s: value(s, k) for s in model.states}
    witnesses = {}
    for s in model.states:
        if s in part.s_yes or s in part.s_no or k == 0:
            witnesses[s] = set(model.actions_at(s))
            continue
        per_action = {
            a: sum(p * value(succ, k - 1) for succ, p in model.row(s, a).items())
            for a in model.actions_at(s)
        }
        witnesses[s] = {a for a, v in per_action.items() if abs(v - values[s]) <= TIE_TOL}
    return ExtremalResult(mode, values, witnesses)


def brute_force_unbounded_until(model, part: UntilPartition, mode: str) -> ExtremalResult:
    """Oracle by stationary-policy enumeration plus absorbing-chain solves.

    Stationary policies suffice for unbounded until, so the extremum over
    the enumeration is the true extremal probability.
    """
    _check_oracle_size(model)
    states = list(model.states)
    rem = [s for s in states if s in part.s_rem]
    idx = {s: i for i, s in enumerate(rem)}
    best = {s: (-1.0 if mode == "max" else 2.0) for s in states}
    choices = [model.actions_at(s) for s in rem]
    for assignment in itertools.product(*choices) if rem else [()]:
        # under a fixed policy, states that cannot reach S_yes through rem
        # states have probability exactly 0; dropping them first keeps the
        # linear system nonsingular and the solution minimal nonnegative
        rows = {s: dict(model.row(s, assignment[i]).items()) for i, s in enumerate(rem)}
        reaching = set()
        frontier = [s for s in rem if any(succ in part.s_yes for succ in rows[s])]
        while frontier:
            cur = frontier.pop()
            if cur in reaching:
                continue
            reaching.add(cur)
            frontier.extend(
                s for s in rem if s not in reaching and cur in rows[s]
            )
        live = [s for s in rem if s in reaching]
        live_idx = {s: i for i, s in enumerate(live)}
        n = len(live)
        mat = np.zeros((n, n))
        vec = np.zeros(n)
        for i, s in enumerate(live):
            for succ, p in rows[s].items():
                if succ in part.s_yes:
                    vec[i] += p
                elif succ in live_idx:
                    mat[i, live_idx[succ]] += p
        sol = np.linalg.solve(np.eye(n) - mat, vec) if n else np.zeros(0)
        for s in rem:
            value = sol[live_idx[s]] if s in live_idx else 0.0
            if mode == "max":
                best[s] = max(best[s], value)
            else:
                best[s] = min(best[s], value)
    values = {}
    for s in states:
        if s in part.s_yes:
            values[s] = 1.0
        elif s in part.s_no:
            values[s] = 0.0
        else:
            values[s] = float(best[s])
    return ExtremalResult(mode, values, {s: set() for s in states})


def brute_force_extremal(model, psi, mode: str, sat_resolver=None) -> ExtremalResult:
    """Oracle facade over a core path formula.

    ``sat_resolver`` maps state subformulas to Sat sets; by default the
    regular (non-oracle) Sat evaluation is used, which is fine because the
    oracle targets path-probability computation, not subformula logic.
    """
    resolve = sat_resolver or (lambda phi: sat_states(model, phi).states)
    if isinstance(psi, Next):
        return brute_force_next(model, resolve(psi.sub), mode)
    if isinstance(psi, Until):
        part = until_partition(model, resolve(psi.left), resolve(psi.right))
        if psi.bound == pctl.INF:
            return brute_force_unbounded_until(model, part, mode)
        return brute_force_bounded_until(model, part, int(psi.bound), mode)
    raise TypeError(f"not a core path formula: {psi!r}")
