import math

import numpy as np
import pytest

from mapsynth.mdp import (
    Distribution,
    Dtmc,
    FinitePath,
    Mdp,
    ModelError,
    StationaryPolicy,
    available_actions,
    build_mdp,
    finite_path_probability,
    induce_dtmc,
    post_states,
    transition_matrix,
)

from conftest import random_mdp, two_action_gadget


def simple_mdp() -> Mdp:
    return build_mdp(
        {
            "states": ["s0", "s1"],
            "initial": "s0",
            "handshake_actions": ["h"],
            "independent_actions": ["a"],
            "transitions": [
                ["s0", "a", "s0", 0.25],
                ["s0", "a", "s1", 0.75],
                ["s1", "h", "s1", 1.0],
            ],
        }
    )


class TestDistribution:
    def test_rejects_bad_row_sum(self):
        with pytest.raises(ModelError):
            Distribution({"s0": 0.5, "s1": 0.4})

    def test_accepts_within_tolerance(self):
        d = Distribution({"s0": 0.5, "s1": 0.5 + 1e-12})
        assert math.isclose(sum(p for _, p in d.items()), 1.0)

    def test_never_renormalizes(self):
        with pytest.raises(ModelError):
            Distribution({"s0": 2.0})

    def test_drops_zero_entries(self):
        d = Distribution({"s0": 1.0, "s1": 0.0})
        assert d.support == {"s0"}

    def test_rejects_negative(self):
        with pytest.raises(ModelError):
            Distribution({"s0": 1.5, "s1": -0.5})


class TestMdp:
    def test_accessors(self):
        m = simple_mdp()
        assert m.actions_at("s0") == ["a"]
        assert available_actions(m, "s1") == {"h"}
        assert post_states(m, "s0", "a") == {"s0", "s1"}
        assert m.handshake_actions == {"h"}
        assert m.independent_actions == {"a"}

    def test_deadlock_rejected(self):
        with pytest.raises(ModelError):
            build_mdp(
                {
                    "states": ["s0", "s1"],
                    "initial": "s0",
                    "independent_actions": ["a"],
                    "transitions": [["s0", "a", "s1", 1.0]],
                }
            )

    def test_unknown_initial_rejected(self):
        with pytest.raises(ModelError):
            build_mdp(
                {
                    "states": ["s0"],
                    "initial": "nowhere",
                    "independent_actions": ["a"],
                    "transitions": [["s0", "a", "s0", 1.0]],
                }
            )

    def test_undeclared_action_rejected(self):
        with pytest.raises(ModelError):
            build_mdp(
                {
                    "states": ["s0"],
                    "initial": "s0",
                    "independent_actions": [],
                    "transitions": [["s0", "mystery", "s0", 1.0]],
                }
            )

    def test_row_for_missing_action_errors(self):
        m = simple_mdp()
        with pytest.raises(ModelError):
            m.row("s0", "h")

    def test_transition_matrix_shape_and_stochasticity(self):
        m = simple_mdp()
        mat = transition_matrix(m)
        # one row per state-action pair, one column per state
        assert mat.shape == (2, 2)
        assert np.allclose(mat.sum(axis=1), 1.0)

    def test_transition_matrix_single_row(self):
        m = build_mdp(
            {
                "states": ["s0"],
                "initial": "s0",
                "independent_actions": ["a"],
                "transitions": [["s0", "a", "s0", 1.0]],
            }
        )
        assert transition_matrix(m).tolist() == [[1.0]]


class TestInducedChain:
    def test_policy_action_must_be_available(self):
        m = simple_mdp()
        with pytest.raises(ModelError):
            induce_dtmc(m, StationaryPolicy({"s0": "h", "s1": "h"}))

    def test_induced_rows_match_mdp(self):
        m = simple_mdp()
        d = induce_dtmc(m, StationaryPolicy({"s0": "a", "s1": "h"}))
        assert dict(d.row("s0").items()) == dict(m.row("s0", "a").items())

    def test_path_probability_by_hand(self):
        # [s0,s1,s2] with P(s0,s1)=0.5 and P(s1,s2)=0.4 has probability 0.2
        d = Dtmc(
            ["s0", "s1", "s2"],
            "s0",
            {
                "s0": Distribution({"s0": 0.5, "s1": 0.5}),
                "s1": Distribution({"s1": 0.6, "s2": 0.4}),
                "s2": Distribution({"s2": 1.0}),
            },
        )
        assert math.isclose(finite_path_probability(d, ["s0", "s1", "s2"]), 0.2)
        assert finite_path_probability(d, ["s0"]) == 1.0

    def test_cylinder_additivity(self, rng):
        # prefix probability equals the sum over one-step extensions
        m = random_mdp(rng, 4)
        mu = StationaryPolicy({s: m.actions_at(s)[0] for s in m.states})
        d = induce_dtmc(m, mu)
        prefix = ["s0", sorted(d.row("s0").support)[0]]
        total = sum(
            finite_path_probability(d, prefix + [t]) for t in d.row(prefix[-1]).support
        )
        assert math.isclose(total, finite_path_probability(d, prefix), rel_tol=1e-12)


def test_two_action_gadget_rows():
    m = two_action_gadget()
    assert m.row("s0", "a")["goal"] == pytest.approx(0.8)
    assert m.row("s0", "b")["goal"] == pytest.approx(0.5)


def test_finite_path_container():
    p = FinitePath(states=("s0", "s1"), actions=("a",))
    assert p.states[0] == "s0"
    assert len(p.actions) == len(p.states) - 1
