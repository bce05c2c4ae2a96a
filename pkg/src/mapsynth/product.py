"""Per-cluster product MDP construction and the mutual specification.

A product state is a tuple of component region labels, one per cluster
agent in ascending agent order.  For each product state and action, the
agents with the action currently enabled are the movers: if every cluster
member is a mover the row is a full joint step (rule 1), otherwise only
the movers advance and the rest keep their component (rule 2).  Row
probabilities are products of the movers' single-agent rows.

Co-location of handshake sharers is deliberately not enforced here; it is
checked against candidate policies (see :mod:`mapsynth.policy`).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Mapping

from mapsynth import pctl
from mapsynth.mdp import Distribution, Mdp, ModelError


class ProductConstructionError(ModelError):
    pass


def state_label(state: tuple) -> str:
    return "(" + "|".join(state) + ")"


@dataclass
class ProductMdp:
    agents: tuple  # ascending agent ids
    states: list  # tuples of component labels, lexicographic component order
    initial: tuple
    actions: dict  # label -> kind
    transitions: dict  # (state, action) -> Distribution over state tuples
    movers: dict  # (state, action) -> frozenset of agent ids
    rule: dict  # (state, action) -> 1 | 2
    total_states: int = 0  # before reachability pruning
    pruned: bool = True
    _avail: dict = field(default_factory=dict, repr=False)
    _declared: dict = field(default_factory=dict, repr=False)  # agent -> declared actions

    def actions_at(self, s: tuple) -> list:
        if s not in self._avail:
            raise ModelError(f"unknown product state {s!r}")
        return self._avail[s]

    def row(self, s: tuple, a: str) -> Distribution:
        if (s, a) not in self.transitions:
            raise ModelError(f"action {a!r} not available at product state {s!r}")
        return self.transitions[(s, a)]

    def handshake_sharers(self, action: str) -> tuple:
        return tuple(i for i in self.agents if action in self._declared[i])

    def to_model_dict(self) -> dict:
        """Serialize in the single-agent model block format."""
        handshake = sorted(a for a, k in self.actions.items() if k == "handshake")
        independent = sorted(a for a, k in self.actions.items() if k == "independent")
        transitions = [
            [state_label(s), a, state_label(succ), p]
            for (s, a), dist in sorted(
                self.transitions.items(), key=lambda kv: (kv[0][0], kv[0][1])
            )
            for succ, p in sorted(dist.items())
        ]
        return {
            "states": [state_label(s) for s in self.states],
            "initial": state_label(self.initial),
            "handshake_actions": handshake,
            "independent_actions": independent,
            "transitions": transitions,
        }


def build_product(
    cluster, mdps: Mapping[int, Mdp], prune: bool = True
) -> ProductMdp:
    """Construct the joint MDP of a cluster of agent MDPs."""
    agents = tuple(sorted(cluster))
    if not agents:
        raise ProductConstructionError("cluster must be nonempty")
    models = {i: mdps[i] for i in agents}
    actions: dict[str, str] = {}
    declared: dict[int, set] = {}
    for i in agents:
        declared[i] = set(models[i].actions)
        for a, kind in models[i].actions.items():
            if actions.setdefault(a, kind) != kind:
                raise ProductConstructionError(
                    f"action {a!r} has inconsistent kinds across the cluster"
                )

    all_states = [
        tuple(combo)
        for combo in itertools.product(*(models[i].states for i in agents))
    ]
    initial = tuple(models[i].initial for i in agents)

    transitions, movers, rule = {}, {}, {}
    avail: dict[tuple, list] = {}
    for s in all_states:
        comp = dict(zip(agents, s))
        enabled_for: dict[str, list] = {}
        for i in agents:
            for a in models[i].actions_at(comp[i]):
                enabled_for.setdefault(a, []).append(i)
        rows_here = []
        for a in sorted(enabled_for):
            mover_set = enabled_for[a]
            joint: dict[tuple, float] = {}
            mover_rows = [models[i].row(comp[i], a).items() for i in mover_set]
            for picks in itertools.product(*mover_rows):
                succ = list(s)
                prob = 1.0
                for i, (succ_state, p) in zip(mover_set, picks):
                    succ[agents.index(i)] = succ_state
                    prob *= p
                key = tuple(succ)
                joint[key] = joint.get(key, 0.0) + prob
            transitions[(s, a)] = Distribution(joint)
            movers[(s, a)] = frozenset(mover_set)
            rule[(s, a)] = 1 if len(mover_set) == len(agents) else 2
            rows_here.append(a)
        if not rows_here:
            raise ProductConstructionError(
                f"deadlocked product state {state_label(s)}"
            )
        avail[s] = rows_here

    total = len(all_states)
    if prune:
        reachable = {initial}
        frontier = [initial]
        while frontier:
            cur = frontier.pop()
            for a in avail[cur]:
                for succ in transitions[(cur, a)].support:
                    if succ not in reachable:
                        reachable.add(succ)
                        frontier.append(succ)
        all_states = [s for s in all_states if s in reachable]
        transitions = {k: v for k, v in transitions.items() if k[0] in reachable}
        movers = {k: v for k, v in movers.items() if k[0] in reachable}
        rule = {k: v for k, v in rule.items() if k[0] in reachable}
        avail = {s: a for s, a in avail.items() if s in reachable}

    return ProductMdp(
        agents=agents,
        states=all_states,
        initial=initial,
        actions=actions,
        transitions=transitions,
        movers=movers,
        rule=rule,
        total_states=total,
        pruned=prune,
        _avail=avail,
        _declared=declared,
    )


def mutual_formula(formulas: Mapping[int, object], cluster, mdps: Mapping[int, Mdp]):
    """Conjunction of the cluster agents' formulas in agent order.

    Every atom must name an action of some cluster agent.
    """
    agents = sorted(cluster)
    cluster_actions = set()
    for i in agents:
        cluster_actions |= set(mdps[i].actions)
    combined = None
    for i in agents:
        phi = formulas[i]
        unknown = pctl.atoms_of(phi) - cluster_actions
        if unknown:
            raise ModelError(
                f"formula of agent {i} uses actions {sorted(unknown)} "
                f"unknown to cluster {agents}"
            )
        combined = phi if combined is None else pctl.And(combined, phi)
    return combined


def handshake_enabled_states(p: ProductMdp, action: str) -> set:
    """Product states where the handshake can legitimately fire: a row for
    the action exists and all its sharers occupy the same region."""
    if p.actions.get(action) != "handshake":
        raise ModelError(f"{action!r} is not a handshake action of this cluster")
    sharers = p.handshake_sharers(action)
    positions = [p.agents.index(i) for i in sharers]
    out = set()
    for s in p.states:
        if (s, action) not in p.transitions:
            continue
        labels = {s[pos] for pos in positions}
        if len(labels) == 1 and p.movers[(s, action)] >= frozenset(sharers):
            out.add(s)
    return out
