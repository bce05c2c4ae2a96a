"""Core MDP/DTMC data model, path probabilities and policy-induced chains.

States are region labels (strings) shared by all agents of a team; actions
are labelled and partitioned into handshake and independent actions.  All
objects are immutable after construction and can be shared freely between
threads.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

ROW_SUM_TOL = 1e-9

HANDSHAKE = "handshake"
INDEPENDENT = "independent"


class ModelError(ValueError):
    """Raised when a model description violates a structural invariant."""


@dataclass(frozen=True)
class Distribution:
    """A probability distribution over states, stored as its support.

    Zero-probability entries are dropped so the stored support is exactly
    the Post set.  The probabilities must sum to 1 within ROW_SUM_TOL.
    """

    probs: Mapping[str, float]

    def __post_init__(self):
        total = 0.0
        cleaned = {}
        for state, p in self.probs.items():
            if p < 0.0 or p > 1.0:
                raise ModelError(f"probability {p} for state {state!r} outside [0, 1]")
            if state in cleaned:
                raise ModelError(f"duplicate successor {state!r} in distribution")
            if p > 0.0:
                cleaned[state] = float(p)
            total += p
        if abs(total - 1.0) > ROW_SUM_TOL:
            raise ModelError(f"distribution sums to {total!r}, expected 1")
        if not cleaned:
            raise ModelError("distribution has empty support")
        object.__setattr__(self, "probs", cleaned)

    @property
    def support(self) -> set[str]:
        return set(self.probs)

    def __getitem__(self, state: str) -> float:
        return self.probs.get(state, 0.0)

    def items(self):
        return self.probs.items()


@dataclass(frozen=True)
class FinitePath:
    """A finite path: n+1 states and the n actions taken between them."""

    states: tuple
    actions: tuple = ()

    def __post_init__(self):
        if not self.states:
            raise ModelError("a path needs at least one state")
        if self.actions and len(self.actions) != len(self.states) - 1:
            raise ModelError("action count must be one less than state count")
        object.__setattr__(self, "states", tuple(self.states))
        object.__setattr__(self, "actions", tuple(self.actions))

    def __len__(self) -> int:
        return len(self.states) - 1


@dataclass(frozen=True)
class StationaryPolicy:
    """A state-to-action map resolving all choice in an MDP."""

    choice: Mapping[str, str]


class Mdp:
    """A finite MDP with labelled states and a partitioned action set.

    ``actions`` maps each action label to its kind (``handshake`` or
    ``independent``).  ``transitions`` maps (state, action) pairs to
    distributions; the actions available at a state are exactly the ones
    with a stored row there.
    """

    def __init__(
        self,
        states: Sequence[str],
        initial: str,
        actions: Mapping[str, str],
        transitions: Mapping[tuple, Distribution],
    ):
        states = list(states)
        if len(set(states)) != len(states):
            raise ModelError("state labels must be unique")
        if initial not in states:
            raise ModelError(f"initial state {initial!r} not among states")
        for label, kind in actions.items():
            if kind not in (HANDSHAKE, INDEPENDENT):
                raise ModelError(f"unknown action kind {kind!r} for {label!r}")
        avail: dict[str, list[str]] = {s: [] for s in states}
        for (s, a), dist in transitions.items():
            if s not in avail:
                raise ModelError(f"transition from unknown state {s!r}")
            if a not in actions:
                raise ModelError(f"transition under unknown action {a!r}")
            for succ in dist.support:
                if succ not in avail:
                    raise ModelError(f"transition to unknown state {succ!r}")
            avail[s].append(a)
        for s, acts in avail.items():
            if not acts:
                raise ModelError(f"deadlock state {s!r}: no available action")
        self.states = states
        self.initial = initial
        self.actions = dict(actions)
        self.transitions = dict(transitions)
        self._available = {s: sorted(acts) for s, acts in avail.items()}

    # Uniform model protocol shared with ProductMdp, used by synthesis.
    def actions_at(self, s: str) -> list[str]:
        if s not in self._available:
            raise ModelError(f"unknown state {s!r}")
        return self._available[s]

    def row(self, s: str, a: str) -> Distribution:
        if (s, a) not in self.transitions:
            raise ModelError(f"action {a!r} not available at state {s!r}")
        return self.transitions[(s, a)]

    @property
    def handshake_actions(self) -> set[str]:
        return {a for a, k in self.actions.items() if k == HANDSHAKE}

    @property
    def independent_actions(self) -> set[str]:
        return {a for a, k in self.actions.items() if k == INDEPENDENT}


def build_mdp(spec: Mapping) -> Mdp:
    """Build a validated Mdp from a raw description.

    ``spec`` lists ``states``, ``initial``, ``handshake_actions``,
    ``independent_actions`` and ``transitions`` as (from, action, to, prob)
    quadruples.  Rows are checked against the sum-to-one invariant, never
    renormalized.
    """
    actions: dict[str, str] = {}
    for a in spec.get("handshake_actions", []):
        actions[a] = HANDSHAKE
    for a in spec.get("independent_actions", []):
        if a in actions:
            raise ModelError(f"action {a!r} listed as both handshake and independent")
        actions[a] = INDEPENDENT
    rows: dict[tuple, dict[str, float]] = {}
    for entry in spec.get("transitions", []):
        src, act, dst, prob = entry
        row = rows.setdefault((src, act), {})
        if dst in row:
            raise ModelError(f"duplicate transition ({src!r}, {act!r}, {dst!r})")
        row[dst] = float(prob)
    transitions = {}
    for (src, act), row in rows.items():
        try:
            transitions[(src, act)] = Distribution(row)
        except ModelError as exc:
            raise ModelError(f"row ({src!r}, {act!r}): {exc}") from None
    return Mdp(spec["states"], spec["initial"], actions, transitions)


def available_actions(m: Mdp, s: str) -> set[str]:
    """Actions with a stored transition row at ``s``."""
    return set(m.actions_at(s))


def post_states(m: Mdp, s: str, a: str) -> set[str]:
    """Support of the transition distribution at (s, a)."""
    return m.row(s, a).support


def transition_matrix(m) -> np.ndarray:
    """Dense state-action transition matrix.

    One row per (state, action) pair ordered by state then action label,
    one column per state in model order.
    """
    index = {s: i for i, s in enumerate(m.states)}
    rows = []
    for s in m.states:
        for a in m.actions_at(s):
            row = np.zeros(len(m.states))
            for succ, p in m.row(s, a).items():
                row[index[succ]] = p
            rows.append(row)
    return np.array(rows)


@dataclass(frozen=True)
class Dtmc:
    """A DTMC: one distribution per state."""

    states: tuple
    initial: str
    matrix: Mapping[str, Distribution] = field(hash=False)

    def __post_init__(self):
        object.__setattr__(self, "states", tuple(self.states))
        for s in self.states:
            if s not in self.matrix:
                raise ModelError(f"missing row for state {s!r}")

    def row(self, s: str) -> Distribution:
        if s not in self.matrix:
            raise ModelError(f"unknown state {s!r}")
        return self.matrix[s]


def induce_dtmc(m: Mdp, mu: StationaryPolicy) -> Dtmc:
    """Resolve all choice in ``m`` with the stationary policy ``mu``."""
    matrix = {}
    for s in m.states:
        a = mu.choice.get(s)
        if a is None:
            raise ModelError(f"policy undefined at state {s!r}")
        matrix[s] = m.row(s, a)
    return Dtmc(tuple(m.states), m.initial, matrix)


def finite_path_probability(d: Dtmc, states: Sequence[str]) -> float:
    """Probability of a concrete finite path: the product of its steps."""
    if not states:
        raise ModelError("path must be nonempty")
    for s in states:
        if s not in d.matrix:
            raise ModelError(f"unknown state {s!r}")
    prob = 1.0
    for cur, nxt in zip(states, states[1:]):
        prob *= d.row(cur)[nxt]
    return prob
