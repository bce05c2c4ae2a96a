"""Agent coupling: handshake well-posedness, dependencies and clusters.

Two agents are dependent when their handshake action sets intersect; a
shared label alone creates the dependency, while the ability to actually
meet and execute the action (well-posedness) is validated separately and
surfaced as a model warning.  Clusters are the connected components of
the resulting undirected dependency graph.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping

from mapsynth.mdp import FinitePath, Mdp


@dataclass(frozen=True)
class DependencyGraph:
    vertices: frozenset
    edges: frozenset  # of frozensets {i, j}

    def __post_init__(self):
        for e in self.edges:
            if len(e) != 2 or not e <= self.vertices:
                raise ValueError(f"bad edge {set(e)}")


@dataclass(frozen=True)
class Clustering:
    clusters: tuple  # of frozensets of agent ids, ordered by smallest member
    f: Mapping[int, int]  # agent -> 1-based cluster index

    def cluster_of(self, agent: int) -> frozenset:
        return self.clusters[self.f[agent] - 1]


@dataclass(frozen=True)
class MeetEvidence:
    action: str
    step: int
    meet_state: str
    paths: Mapping[int, FinitePath]


@dataclass(frozen=True)
class StateCountReport:
    cluster_sizes: tuple  # product state count per cluster (exact ints)
    centralized: int
    cluster_log10: tuple
    centralized_log10: float
    ordering_holds: bool  # max cluster size <= centralized size


def default_horizon(mdps: Mapping[int, Mdp], agents) -> int:
    """Search depth bound: joint state count of the involved agents."""
    agents = list(agents)
    return max(len(mdps[i].states) for i in agents) * len(agents)


def _layers(m: Mdp, horizon: int):
    """Exact-step reachability layers with back-pointers for path recovery.

    layers[k] maps each state reachable in exactly k steps to the
    (predecessor, action) used to get there (None at k = 0).
    """
    layers = [{m.initial: None}]
    for k in range(horizon):
        nxt = {}
        for s in layers[k]:
            for a in m.actions_at(s):
                for succ in m.row(s, a).support:
                    nxt.setdefault(succ, (s, a))
        layers.append(nxt)
    return layers


def _path_to(layers, k: int, state: str) -> FinitePath:
    states, actions = [state], []
    for j in range(k, 0, -1):
        prev, act = layers[j][states[0]]
        states.insert(0, prev)
        actions.insert(0, act)
    return FinitePath(tuple(states), tuple(actions))


def check_handshake_wellposed(
    agents, action: str, mdps: Mapping[int, Mdp], horizon: int | None = None
) -> MeetEvidence | None:
    """Search for a step at which all sharers can co-occupy a region with
    the action enabled; None when no such meeting exists within the horizon."""
    agents = sorted(agents)
    if len(agents) < 2:
        raise ValueError("a handshake involves at least two agents")
    for i in agents:
        if action not in mdps[i].handshake_actions:
            raise ValueError(f"action {action!r} is not a handshake action of agent {i}")
    if horizon is None:
        horizon = default_horizon(mdps, agents)
    layers = {i: _layers(mdps[i], horizon) for i in agents}
    for k in range(horizon + 1):
        common = set(layers[agents[0]][k])
        for i in agents[1:]:
            common &= set(layers[i][k])
        candidates = sorted(
            s
            for s in common
            if all(action in mdps[i].actions_at(s) for i in agents)
        )
        if candidates:
            meet = candidates[0]
            return MeetEvidence(
                action=action,
                step=k,
                meet_state=meet,
                paths={i: _path_to(layers[i], k, meet) for i in agents},
            )
    return None


def check_dependent(i: int, j: int, mdps: Mapping[int, Mdp], horizon: int | None = None) -> bool:
    """Agents are dependent iff they share a handshake action label."""
    if i == j:
        raise ValueError("dependency is defined between distinct agents")
    return bool(mdps[i].handshake_actions & mdps[j].handshake_actions)


def build_dependency_graph(mdps: Mapping[int, Mdp], horizon: int | None = None) -> DependencyGraph:
    agents = sorted(mdps)
    if len(agents) < 2:
        raise ValueError("a team needs at least two agents")
    edges = set()
    for a in range(len(agents)):
        for b in range(a + 1, len(agents)):
            if check_dependent(agents[a], agents[b], mdps, horizon):
                edges.add(frozenset((agents[a], agents[b])))
    return DependencyGraph(frozenset(agents), frozenset(edges))


def compute_clusters(g: DependencyGraph) -> Clustering:
    """Connected components, ordered by their smallest member."""
    neighbours = {v: set() for v in g.vertices}
    for e in g.edges:
        a, b = sorted(e)
        neighbours[a].add(b)
        neighbours[b].add(a)
    seen = set()
    components = []
    for v in sorted(g.vertices):
        if v in seen:
            continue
        stack, comp = [v], set()
        while stack:
            u = stack.pop()
            if u in comp:
                continue
            comp.add(u)
            stack.extend(neighbours[u] - comp)
        seen |= comp
        components.append(frozenset(comp))
    components.sort(key=min)
    f = {agent: idx + 1 for idx, comp in enumerate(components) for agent in comp}
    return Clustering(tuple(components), f)


def wellposedness_warnings(mdps: Mapping[int, Mdp], horizon: int | None = None) -> list[str]:
    """One warning per handshake action whose sharers can never meet."""
    sharers: dict[str, list[int]] = {}
    for i, m in sorted(mdps.items()):
        for a in m.handshake_actions:
            sharers.setdefault(a, []).append(i)
    warnings = []
    for action, agents in sorted(sharers.items()):
        if len(agents) < 2:
            warnings.append(
                f"handshake action {action!r} is declared by agent {agents[0]} only"
            )
            continue
        if check_handshake_wellposed(agents, action, mdps, horizon) is None:
            warnings.append(
                f"handshake action {action!r} has no reachable meeting region "
                f"for agents {agents} within the search horizon"
            )
    return warnings


def estimate_state_counts(clustering: Clustering, regions_per_agent: int) -> StateCountReport:
    """Per-cluster product sizes W^|C| vs the centralized size W^N."""
    w = regions_per_agent
    n = sum(len(c) for c in clustering.clusters)
    sizes = tuple(w ** len(c) for c in clustering.clusters)
    centralized = w**n
    log10 = lambda v: math.log10(v) if v > 0 else 0.0
    return StateCountReport(
        cluster_sizes=sizes,
        centralized=centralized,
        cluster_log10=tuple(len(c) * log10(w) for c in clustering.clusters),
        centralized_log10=n * log10(w),
        ordering_holds=(max(sizes) <= centralized),
    )
