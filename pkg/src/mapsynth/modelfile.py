"""Model and policy file formats (JSON) and their validation.

A model file lists agent blocks; each block declares the agent's regions,
initial region, handshake/independent action sets, transition quadruples
and its specification formula as text.  A policy file records per-cluster
team policies, context-tagged per-agent projections and the satisfaction
report, plus a digest of the model it was synthesized from.

JSON Schema documents for both formats are shipped under docs/.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from typing import Mapping

from mapsynth import pctl
from mapsynth.mdp import Mdp, ModelError, build_mdp
from mapsynth.policy import SolutionBundle
from mapsynth.product import state_label


@dataclass
class Team:
    mdps: dict  # agent id -> Mdp
    formulas: dict  # agent id -> parsed core formula
    formula_texts: dict  # agent id -> original text
    raw: dict  # the parsed JSON document

    @property
    def agent_ids(self) -> list:
        return sorted(self.mdps)

    def digest(self) -> str:
        canon = json.dumps(self.raw, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()


def _require(cond: bool, message: str):
    if not cond:
        raise ModelError(message)


def parse_team(doc: Mapping) -> Team:
    """Validate a parsed model document into a Team."""
    _require(isinstance(doc, dict) and "agents" in doc, "model file needs an 'agents' list")
    agents = doc["agents"]
    _require(isinstance(agents, list) and len(agents) >= 1, "'agents' must be a nonempty list")
    mdps: dict[int, Mdp] = {}
    formulas, texts = {}, {}
    independents: dict[str, int] = {}
    kinds: dict[str, str] = {}
    for block in agents:
        _require(isinstance(block, dict), "each agent block must be an object")
        for key in ("id", "states", "initial", "transitions", "formula"):
            _require(key in block, f"agent block missing {key!r}")
        agent_id = block["id"]
        _require(isinstance(agent_id, int), "agent id must be an integer")
        _require(agent_id not in mdps, f"duplicate agent id {agent_id}")
        try:
            m = build_mdp(block)
        except ModelError as exc:
            raise ModelError(f"agent {agent_id}: {exc}") from None
        for a in m.independent_actions:
            _require(
                a not in independents,
                f"independent action {a!r} declared by agents "
                f"{independents.get(a)} and {agent_id}: independent action "
                "sets must be pairwise disjoint",
            )
            independents[a] = agent_id
        for a, k in m.actions.items():
            _require(
                kinds.setdefault(a, k) == k,
                f"action {a!r} has kind {k!r} for agent {agent_id} but "
                f"{kinds[a]!r} elsewhere",
            )
        try:
            phi = pctl.parse_formula(block["formula"])
        except pctl.ParseError as exc:
            raise ModelError(f"agent {agent_id}: formula: {exc}") from None
        unknown = pctl.atoms_of(phi) - set(m.actions)
        _require(
            not unknown,
            f"agent {agent_id}: formula uses actions {sorted(unknown)} "
            "outside the agent's action set",
        )
        mdps[agent_id] = m
        formulas[agent_id] = phi
        texts[agent_id] = block["formula"]
    return Team(mdps, formulas, texts, dict(doc))


def load_team(path: str) -> Team:
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ModelError(f"{path}: not valid JSON: {exc}") from None
    return parse_team(doc)


# ---------------------------------------------------------------------------
# Policy files


def bundle_to_doc(bundle: SolutionBundle, team: Team, cfg) -> dict:
    clusters = []
    for cs in bundle.clusters:
        clusters.append(
            {
                "index": cs.index,
                "agents": list(cs.agents),
                "team_policy": {
                    state_label(s): a for s, a in sorted(cs.team_policy.choice.items())
                },
                "satisfaction": [
                    {
                        "agent": e.agent,
                        "formula": e.formula,
                        "holds": e.holds,
                        "probability": e.probability,
                        "comparator": e.comparator,
                        "threshold": e.threshold,
                        "mode": e.mode,
                        "epsilon": e.epsilon,
                        "residual": e.residual,
                    }
                    for e in cs.satisfaction
                ],
                "policies_tried": cs.policies_tried,
            }
        )
    agents = {
        str(agent): {
            "cluster": bundle.clustering.f[agent],
            "policy": dict(sorted(projection.items())),
        }
        for cs in bundle.clusters
        for agent, projection in cs.projections.items()
    }
    return {
        "model_digest": team.digest(),
        "config": {
            "mode": cfg.mode,
            "epsilon": cfg.epsilon,
            "max_policies": cfg.max_policies,
        },
        "clusters": clusters,
        "agents": agents,
        "warnings": list(bundle.warnings),
    }


def write_policy(path: str, doc: dict):
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_policy(path: str) -> dict:
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ModelError(f"{path}: not valid JSON: {exc}") from None
    for key in ("model_digest", "clusters", "agents"):
        if key not in doc:
            raise ModelError(f"{path}: policy file missing {key!r}")
    return doc


def check_policy_matches(doc: dict, team: Team):
    if doc["model_digest"] != team.digest():
        raise ModelError(
            "policy file was synthesized from a different model "
            "(digest mismatch)"
        )
