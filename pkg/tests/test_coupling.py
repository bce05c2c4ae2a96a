import itertools
import math

import pytest

from mapsynth import coupling
from mapsynth.coupling import (
    Clustering,
    DependencyGraph,
    build_dependency_graph,
    check_dependent,
    check_handshake_wellposed,
    compute_clusters,
    estimate_state_counts,
    wellposedness_warnings,
)
from mapsynth.mdp import build_mdp

from conftest import example1_mdps


def agent_with(states, initial, handshakes, moves, tag):
    """Line-style agent: `moves` are (src, dst) deterministic steps, every
    state without an outgoing move gets a wait self-loop."""
    transitions = [[src, f"step_{tag}_{src}", dst, 1.0] for src, dst in moves]
    sources = {src for src, _ in moves}
    independent = [f"step_{tag}_{src}" for src, _ in moves]
    for s in states:
        if s not in sources:
            transitions.append([s, f"wait_{tag}", s, 1.0])
            if f"wait_{tag}" not in independent:
                independent.append(f"wait_{tag}")
    for h, where in handshakes:
        transitions.append([where, h, where, 1.0])
    return build_mdp(
        {
            "states": states,
            "initial": initial,
            "handshake_actions": sorted({h for h, _ in handshakes}),
            "independent_actions": independent,
            "transitions": transitions,
        }
    )


class TestWellposed:
    def test_meet_at_step_zero(self):
        mdps = {
            1: agent_with(["r0"], "r0", [("h", "r0")], [], "1"),
            2: agent_with(["r0"], "r0", [("h", "r0")], [], "2"),
        }
        ev = check_handshake_wellposed({1, 2}, "h", mdps)
        assert ev is not None and ev.step == 0 and ev.meet_state == "r0"

    def test_disjoint_regions_absent(self):
        mdps = {
            1: agent_with(["r0"], "r0", [("h", "r0")], [], "1"),
            2: agent_with(["q0"], "q0", [("h", "q0")], [], "2"),
        }
        assert check_handshake_wellposed({1, 2}, "h", mdps) is None

    def test_line_graph_meet_in_the_middle(self):
        # opposite ends of r0 - r1 - r2; both reach r1 in one step
        states = ["r0", "r1", "r2"]
        mdps = {
            1: agent_with(states, "r0", [("h", "r1")], [("r0", "r1")], "1"),
            2: agent_with(states, "r2", [("h", "r1")], [("r2", "r1")], "2"),
        }
        assert check_handshake_wellposed({1, 2}, "h", mdps, horizon=0) is None
        ev = check_handshake_wellposed({1, 2}, "h", mdps, horizon=1)
        assert ev is not None and ev.step == 1 and ev.meet_state == "r1"
        assert [p.states for p in ev.paths.values()] == [("r0", "r1"), ("r2", "r1")]

    def test_horizon_cutoff_at_three_steps(self):
        states = ["x0", "x1", "x2", "m"]
        mdps = {
            1: agent_with(
                states, "x0", [("h", "m")],
                [("x0", "x1"), ("x1", "x2"), ("x2", "m")], "1",
            ),
            2: agent_with(states, "m", [("h", "m")], [], "2"),
        }
        assert check_handshake_wellposed({1, 2}, "h", mdps, horizon=2) is None
        ev = check_handshake_wellposed({1, 2}, "h", mdps, horizon=3)
        assert ev is not None and ev.step == 3 and ev.meet_state == "m"
        # the shared label alone already makes the pair dependent
        assert check_dependent(1, 2, mdps, horizon=2)
        assert check_dependent(1, 2, mdps, horizon=3)

    def test_requires_handshake_membership(self):
        mdps = {
            1: agent_with(["r0"], "r0", [("h", "r0")], [], "1"),
            2: agent_with(["r0"], "r0", [], [], "2"),
        }
        with pytest.raises(ValueError):
            check_handshake_wellposed({1, 2}, "h", mdps)

    def test_warnings_flag_unmeetable_handshake(self):
        mdps = {
            1: agent_with(["r0"], "r0", [("h", "r0")], [], "1"),
            2: agent_with(["q0"], "q0", [("h", "q0")], [], "2"),
        }
        warns = wellposedness_warnings(mdps)
        assert any("h" in w for w in warns)
        good = {
            1: agent_with(["r0"], "r0", [("h", "r0")], [], "1"),
            2: agent_with(["r0"], "r0", [("h", "r0")], [], "2"),
        }
        assert wellposedness_warnings(good) == []


class TestDependency:
    def test_shared_label_is_dependency(self):
        mdps = {
            1: agent_with(["r0"], "r0", [("grasp", "r0")], [], "1"),
            2: agent_with(["r0"], "r0", [("grasp", "r0")], [], "2"),
        }
        assert check_dependent(1, 2, mdps)
        assert check_dependent(2, 1, mdps)

    def test_disjoint_labels_independent(self):
        mdps = {
            1: agent_with(["r0"], "r0", [("h1", "r0")], [], "1"),
            2: agent_with(["r0"], "r0", [("h2", "r0")], [], "2"),
        }
        assert not check_dependent(1, 2, mdps)

    def test_example_wiring_edges(self):
        g = build_dependency_graph(example1_mdps())
        assert g.edges == frozenset(
            {frozenset({1, 2}), frozenset({3, 4}), frozenset({4, 5})}
        )

    def test_all_sharing_one_action_is_complete(self):
        mdps = {
            i: agent_with(["r0"], "r0", [("h", "r0")], [], str(i)) for i in (1, 2, 3)
        }
        g = build_dependency_graph(mdps)
        assert len(g.edges) == 3

    def test_no_shared_actions_empty_edges(self):
        mdps = {
            i: agent_with(["r0"], "r0", [], [], str(i)) for i in (1, 2, 3)
        }
        assert build_dependency_graph(mdps).edges == frozenset()


class TestClusters:
    def test_example_wiring_clusters(self):
        g = build_dependency_graph(example1_mdps())
        c = compute_clusters(g)
        assert c.clusters == (
            frozenset({1, 2}),
            frozenset({3, 4, 5}),
            frozenset({6}),
        )
        assert c.f == {1: 1, 2: 1, 3: 2, 4: 2, 5: 2, 6: 3}
        assert c.cluster_of(4) == frozenset({3, 4, 5})

    def test_empty_edges_gives_singletons(self):
        g = DependencyGraph(frozenset(range(1, 5)), frozenset())
        c = compute_clusters(g)
        assert all(len(cl) == 1 for cl in c.clusters)
        assert len(c.clusters) == 4

    def test_partition_property(self, rng):
        for _ in range(30):
            n = rng.randint(2, 8)
            vertices = frozenset(range(1, n + 1))
            pairs = list(itertools.combinations(vertices, 2))
            edges = frozenset(
                frozenset(p) for p in rng.sample(pairs, rng.randint(0, len(pairs)))
            )
            c = compute_clusters(DependencyGraph(vertices, edges))
            assert sum(len(cl) for cl in c.clusters) == n
            assert frozenset().union(*c.clusters) == vertices

    def test_components_match_transitive_closure(self, rng):
        for _ in range(30):
            n = rng.randint(2, 8)
            vertices = list(range(1, n + 1))
            pairs = list(itertools.combinations(vertices, 2))
            edges = frozenset(
                frozenset(p) for p in rng.sample(pairs, rng.randint(0, len(pairs)))
            )
            # all-pairs reachability oracle
            reach = {(v, v): True for v in vertices}
            for e in edges:
                a, b = sorted(e)
                reach[(a, b)] = reach[(b, a)] = True
            for k in vertices:
                for i in vertices:
                    for j in vertices:
                        if reach.get((i, k)) and reach.get((k, j)):
                            reach[(i, j)] = True
            c = compute_clusters(DependencyGraph(frozenset(vertices), edges))
            for i in vertices:
                for j in vertices:
                    same = c.f[i] == c.f[j]
                    assert same == bool(reach.get((i, j)))


class TestStateCounts:
    def example_clustering(self):
        return compute_clusters(build_dependency_graph(example1_mdps()))

    def test_example_sizes(self):
        report = estimate_state_counts(self.example_clustering(), 4)
        assert sorted(report.cluster_sizes) == [4, 16, 64]
        assert report.centralized == 4096
        assert report.ordering_holds
        assert report.centralized_log10 == pytest.approx(math.log10(4096))

    def test_singleton_cluster_is_workspace_size(self):
        c = Clustering((frozenset({1}),), {1: 1})
        report = estimate_state_counts(c, 7)
        assert report.cluster_sizes == (7,)
        assert report.centralized == 7

    def test_one_cluster_equals_centralized(self):
        c = Clustering((frozenset({1, 2, 3}),), {1: 1, 2: 1, 3: 1})
        report = estimate_state_counts(c, 5)
        assert report.cluster_sizes == (125,)
        assert report.centralized == 125
        assert report.ordering_holds
