"""Shared builders for test models and gadgets."""

from __future__ import annotations

import random

import pytest

from mapsynth.mdp import Mdp, build_mdp


def random_mdp(rng: random.Random, n_states: int, max_actions: int = 3) -> Mdp:
    """A seeded random deadlock-free MDP with integer-weight rows."""
    states = [f"s{i}" for i in range(n_states)]
    action_pool = [f"a{j}" for j in range(max_actions)]
    transitions = []
    for s in states:
        n_actions = rng.randint(1, max_actions)
        for a in rng.sample(action_pool, n_actions):
            support = rng.sample(states, rng.randint(1, n_states))
            weights = [rng.randint(1, 9) for _ in support]
            total = sum(weights)
            for succ, w in zip(support, weights):
                transitions.append([s, a, succ, w / total])
    return build_mdp(
        {
            "states": states,
            "initial": states[0],
            "independent_actions": action_pool,
            "transitions": transitions,
        }
    )


def coin_gadget() -> Mdp:
    """Fair-coin self-loop: from s0 action a reaches goal w.p. 0.5."""
    return build_mdp(
        {
            "states": ["s0", "goal"],
            "initial": "s0",
            "independent_actions": ["a", "win"],
            "transitions": [
                ["s0", "a", "s0", 0.5],
                ["s0", "a", "goal", 0.5],
                ["goal", "win", "goal", 1.0],
            ],
        }
    )


def two_action_gadget() -> Mdp:
    """One decision state: action a reaches goal w.p. 0.8, action b w.p. 0.5."""
    return build_mdp(
        {
            "states": ["s0", "goal", "dead"],
            "initial": "s0",
            "independent_actions": ["a", "b", "win", "stay"],
            "transitions": [
                ["s0", "a", "goal", 0.8],
                ["s0", "a", "dead", 0.2],
                ["s0", "b", "goal", 0.5],
                ["s0", "b", "dead", 0.5],
                ["goal", "win", "goal", 1.0],
                ["dead", "stay", "dead", 1.0],
            ],
        }
    )


def rendezvous_team() -> tuple[dict, dict]:
    """Two agents that can both walk to region m and shake hands there."""
    from mapsynth import pctl

    def agent(start: str, other: str, tag: str) -> Mdp:
        return build_mdp(
            {
                "states": [start, "m", other],
                "initial": start,
                "handshake_actions": ["grasp"],
                "independent_actions": [f"go_{tag}", f"wait_{tag}"],
                "transitions": [
                    [start, f"go_{tag}", "m", 1.0],
                    ["m", f"wait_{tag}", "m", 1.0],
                    ["m", "grasp", "m", 1.0],
                    [other, f"wait_{tag}", other, 1.0],
                ],
            }
        )

    mdps = {1: agent("a", "b", "1"), 2: agent("b", "a", "2")}
    formulas = {
        1: pctl.parse_formula("P>=0.9 [ F grasp ]"),
        2: pctl.parse_formula("P>=0.9 [ F grasp ]"),
    }
    return mdps, formulas


def example1_mdps(regions: int = 4) -> dict:
    """Six agents wired so the dependency edges are {1,2}, {3,4}, {4,5}.

    All agents share the region labels r0..r{W-1}; each handshake pair can
    meet at r1.
    """
    handshakes = {1: ["h12"], 2: ["h12"], 3: ["h34"], 4: ["h34", "h45"], 5: ["h45"], 6: []}
    mdps = {}
    states = [f"r{i}" for i in range(regions)]
    for i in range(1, 7):
        transitions = [["r0", f"mv{i}", "r1", 1.0]]
        for s in states:
            transitions.append([s, f"wait{i}", s, 1.0])
        for h in handshakes[i]:
            transitions.append(["r1", h, "r1", 1.0])
        mdps[i] = build_mdp(
            {
                "states": states,
                "initial": "r0",
                "handshake_actions": handshakes[i],
                "independent_actions": [f"mv{i}", f"wait{i}"],
                "transitions": transitions,
            }
        )
    return mdps


def example1_formulas() -> dict:
    from mapsynth import pctl

    texts = {
        1: "P>=0.9 [ F h12 ]",
        2: "P>=0.9 [ F h12 ]",
        3: "P>=0.9 [ F h34 ]",
        4: "P>=0.9 [ F h34 ]",
        5: "P>=0.9 [ F h45 ]",
        6: "P>=0.9 [ F mv6 ]",
    }
    return {i: pctl.parse_formula(t) for i, t in texts.items()}


@pytest.fixture
def rng() -> random.Random:
    return random.Random(20260826)
