"""Team policies: enumeration, projection, validation and the solver.

The solver clusters the agents, builds each cluster's product MDP and
mutual specification, eliminates state-action pairs that cannot meet the
thresholds, then enumerates candidate stationary team policies.  A
candidate is accepted when (a) every handshake it schedules fires at a
co-located product state with all sharers able to execute it and (b) the
exact satisfaction probabilities on the induced chain meet every agent's
threshold.  Accepted team policies are projected onto context-tagged
per-agent policies.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterator, Mapping

import numpy as np

from mapsynth import coupling, pctl, synthesis
from mapsynth.mdp import Mdp, ModelError
from mapsynth.pctl import And, Atom, Next, Not, ProbOp, TrueFormula, Until
from mapsynth.product import ProductMdp, build_product, mutual_formula, state_label
from mapsynth.synthesis import AllowedActions, SynthConfig


@dataclass(frozen=True)
class TeamPolicy:
    cluster_index: int
    choice: Mapping[tuple, str]  # product state -> action


@dataclass
class SatisfactionEntry:
    agent: int
    formula: str
    holds: bool
    probability: float | None  # top-level operator probability, if any
    comparator: str | None
    threshold: float | None
    mode: str
    epsilon: float
    residual: float


@dataclass
class ClusterSolution:
    index: int
    agents: tuple
    team_policy: TeamPolicy
    projections: dict  # agent -> {product state label -> action | None}
    satisfaction: list  # of SatisfactionEntry
    policies_tried: int


@dataclass
class SolutionBundle:
    clusters: list  # of ClusterSolution
    clustering: coupling.Clustering
    warnings: list = field(default_factory=list)

    @property
    def agent_policies(self) -> dict:
        out = {}
        for cs in self.clusters:
            out.update(cs.projections)
        return out


@dataclass
class SolveResult:
    status: str  # "solution" | "no-solution" | "inconclusive"
    bundle: SolutionBundle | None = None
    failed_cluster: tuple | None = None
    clustering: coupling.Clustering | None = None
    warnings: list = field(default_factory=list)


@dataclass(frozen=True)
class SolveConfig:
    mode: str = synthesis.EXISTENTIAL
    epsilon: float = 1e-8
    max_iters: int = 10**6
    max_policies: int = 10**5
    horizon: int | None = None
    prune: bool = True
    jobs: int = 1

    def synth(self) -> SynthConfig:
        return SynthConfig(self.mode, self.epsilon, self.max_iters)


class NoSolution(Exception):
    pass


# ---------------------------------------------------------------------------
# Enumeration, projection, validation


def enumerate_team_policies(
    allowed: AllowedActions, cluster_index: int, limit: int
) -> Iterator[TeamPolicy]:
    """Lazy deterministic enumeration: lexicographic over states, then
    action label.  States with an empty allowed set carry no assignment;
    the caller rejects candidates that reach them."""
    if limit < 1:
        raise ValueError("limit must be at least 1")
    states = sorted(s for s in allowed.per_state if allowed.per_state[s])
    options = [sorted(allowed.per_state[s]) for s in states]
    count = 0
    for combo in itertools.product(*options):
        if count >= limit:
            return
        count += 1
        yield TeamPolicy(cluster_index, dict(zip(states, combo)))


def count_team_policies(allowed: AllowedActions, limit: int) -> int:
    """Number of enumerable policies, saturating at ``limit`` + 1."""
    total = 1
    for s, acts in allowed.per_state.items():
        if acts:
            total *= len(acts)
            if total > limit:
                return limit + 1
    return total


def policy_reachable(p: ProductMdp, tp: TeamPolicy) -> tuple[set, bool]:
    """(states reachable from the initial state under tp, fully assigned?)."""
    seen = {p.initial}
    frontier = [p.initial]
    total = True
    while frontier:
        cur = frontier.pop()
        act = tp.choice.get(cur)
        if act is None:
            total = False
            continue
        for succ in p.row(cur, act).support:
            if succ not in seen:
                seen.add(succ)
                frontier.append(succ)
    return seen, total


def project_policy(tp: TeamPolicy, p: ProductMdp) -> dict:
    """Context-tagged local policies: for each agent, the chosen action at
    every assigned product state where the agent moves, None (idle) where
    it does not."""
    out = {i: {} for i in p.agents}
    for s, a in tp.choice.items():
        mover_set = p.movers[(s, a)]
        for i in p.agents:
            out[i][state_label(s)] = a if i in mover_set else None
    return out


def succ_actions(tp: TeamPolicy, p: ProductMdp) -> set:
    """Handshake actions appearing in the policy's range."""
    return {a for a in tp.choice.values() if p.actions.get(a) == "handshake"}


def is_successful(tp: TeamPolicy, p: ProductMdp, strict: bool = False) -> tuple[bool, list]:
    """Check the handshake discipline of a team policy.

    Wherever the policy schedules a handshake action, all the action's
    sharers must occupy the same region and each must be able to execute
    it.  By default only states reachable under the policy are checked;
    ``strict`` extends the check to every assigned state.
    """
    if strict:
        domain = set(tp.choice)
    else:
        domain, _ = policy_reachable(p, tp)
        domain &= set(tp.choice)
    violations = []
    handshakes = succ_actions(tp, p)
    for s in sorted(domain):
        a = tp.choice[s]
        if a not in handshakes:
            continue
        sharers = p.handshake_sharers(a)
        positions = [p.agents.index(i) for i in sharers]
        colocated = len({s[pos] for pos in positions}) == 1
        all_enabled = p.movers[(s, a)] >= frozenset(sharers)
        if not (colocated and all_enabled):
            violations.append((s, a))
    return not violations, violations


# ---------------------------------------------------------------------------
# Exact evaluation of a formula under a fixed team policy


def _chain_rows(p: ProductMdp, tp: TeamPolicy, domain: set) -> dict:
    return {s: dict(p.row(s, tp.choice[s]).items()) for s in domain}


def _chain_path_prob(rows, states, start, kind, sets) -> tuple[float, float]:
    """Exact path-formula probability on the policy-induced chain.

    Returns (value, residual); residual is nonzero only for the unbounded
    case, where a linear solve keeps it at numerical noise.
    """
    if kind == "next":
        (target,) = sets
        return sum(pr for succ, pr in rows[start].items() if succ in target), 0.0
    sat1, sat2, bound = sets
    yes = {s for s in states if s in sat2}
    no = {s for s in states if s not in sat1 and s not in yes}
    rem = [s for s in states if s not in yes and s not in no]
    if start in yes:
        return 1.0, 0.0
    if start in no:
        return 0.0, 0.0
    if bound != pctl.INF:
        vals = {s: 0.0 for s in rem}
        for _ in range(int(bound)):
            new = {}
            for s in rem:
                acc = 0.0
                for succ, pr in rows[s].items():
                    if succ in yes:
                        acc += pr
                    elif succ in vals:
                        acc += pr * vals[succ]
                new[s] = acc
            vals = new
        return vals[start], 0.0
    # unbounded: zero out states that cannot reach yes, then solve linearly
    reach = set(yes)
    changed = True
    while changed:
        changed = False
        for s in rem:
            if s not in reach and any(succ in reach for succ in rows[s]):
                reach.add(s)
                changed = True
    core = [s for s in rem if s in reach]
    if start not in reach:
        return 0.0, 0.0
    idx = {s: i for i, s in enumerate(core)}
    n = len(core)
    mat = np.eye(n)
    vec = np.zeros(n)
    for s in core:
        for succ, pr in rows[s].items():
            if succ in yes:
                vec[idx[s]] += pr
            elif succ in idx:
                mat[idx[s], idx[succ]] -= pr
    sol = np.linalg.solve(mat, vec)
    residual = float(np.max(np.abs(mat @ sol - vec)))
    return float(sol[idx[start]]), residual


def evaluate_formula_under_policy(
    p: ProductMdp, tp: TeamPolicy, phi, cfg: SolveConfig, agent: int
) -> tuple[bool, list]:
    """Exact check of ``phi`` at the product initial state under ``tp``.

    State subformulas are resolved on the full product; the policy fixes
    the probabilities.  Returns (holds, report entries for top-level
    probability operators).
    """
    domain, total = policy_reachable(p, tp)
    if not total:
        raise ModelError("policy is not total on its reachable states")
    rows = _chain_rows(p, tp, domain & set(tp.choice))
    states = sorted(rows)
    synth_cfg = cfg.synth()
    entries = []

    def eval_state(phi) -> bool:
        if isinstance(phi, TrueFormula):
            return True
        if isinstance(phi, Atom):
            return phi.label in p.actions_at(p.initial)
        if isinstance(phi, Not):
            return not eval_state(phi.sub)
        if isinstance(phi, And):
            left = eval_state(phi.left)
            right = eval_state(phi.right)
            return left and right
        if isinstance(phi, ProbOp):
            if isinstance(phi.path, Next):
                target = synthesis.sat_states(p, phi.path.sub, synth_cfg).states
                value, residual = _chain_path_prob(
                    rows, states, p.initial, "next", (target,)
                )
            elif isinstance(phi.path, Until):
                sat1 = synthesis.sat_states(p, phi.path.left, synth_cfg).states
                sat2 = synthesis.sat_states(p, phi.path.right, synth_cfg).states
                value, residual = _chain_path_prob(
                    rows, states, p.initial, "until",
                    (sat1, sat2, phi.path.bound),
                )
            else:
                raise TypeError(f"not a core path formula: {phi.path!r}")
            holds = synthesis.threshold_holds(value, phi.comparator, phi.threshold)
            entries.append(
                SatisfactionEntry(
                    agent=agent,
                    formula=pctl.format_formula(phi),
                    holds=holds,
                    probability=value,
                    comparator=phi.comparator,
                    threshold=phi.threshold,
                    mode=cfg.mode,
                    epsilon=cfg.epsilon,
                    residual=residual,
                )
            )
            return holds
        raise TypeError(f"not a core state formula: {phi!r}")

    ok = eval_state(phi)
    if not entries:
        entries.append(
            SatisfactionEntry(
                agent=agent,
                formula=pctl.format_formula(phi),
                holds=ok,
                probability=None,
                comparator=None,
                threshold=None,
                mode=cfg.mode,
                epsilon=cfg.epsilon,
                residual=0.0,
            )
        )
    return ok, entries


# ---------------------------------------------------------------------------
# Per-cluster synthesis and the orchestrator


def _allowed_for_formula(p: ProductMdp, phi, synth_cfg: SynthConfig) -> AllowedActions:
    """Action constraints induced by the top-level probability operators.

    Conjunction intersects its sides' constraints.  Purely state-level
    parts (atoms, negations, constants) constrain no actions; their truth
    is checked at the initial state by the Sat gate.
    """
    if isinstance(phi, ProbOp):
        return synthesis.synthesize_allowed_actions(
            p, phi.comparator, phi.threshold, phi.path, synth_cfg
        )
    if isinstance(phi, And):
        left = _allowed_for_formula(p, phi.left, synth_cfg)
        right = _allowed_for_formula(p, phi.right, synth_cfg)
        return AllowedActions(
            {s: left.per_state[s] & right.per_state[s] for s in left.per_state}
        )
    return AllowedActions({s: set(p.actions_at(s)) for s in p.states})


@dataclass
class ClusterOutcome:
    status: str  # "solution" | "no-solution" | "inconclusive"
    solution: ClusterSolution | None = None


def synthesize_cluster(
    index: int,
    cluster,
    mdps: Mapping[int, Mdp],
    formulas: Mapping[int, object],
    cfg: SolveConfig,
) -> ClusterOutcome:
    agents = tuple(sorted(cluster))
    phi_m = mutual_formula(formulas, agents, mdps)
    p = build_product(agents, mdps, prune=cfg.prune)
    synth_cfg = cfg.synth()
    sat = synthesis.sat_states(p, phi_m, synth_cfg)
    if p.initial not in sat.states:
        return ClusterOutcome("no-solution")
    allowed = _allowed_for_formula(p, phi_m, synth_cfg)
    exhausted = count_team_policies(allowed, cfg.max_policies) <= cfg.max_policies
    tried = 0
    for tp in enumerate_team_policies(allowed, index, cfg.max_policies):
        tried += 1
        reachable, total = policy_reachable(p, tp)
        if not total:
            continue
        ok, _violations = is_successful(tp, p)
        if not ok:
            continue
        entries = []
        holds = True
        for i in agents:
            agent_ok, agent_entries = evaluate_formula_under_policy(
                p, tp, formulas[i], cfg, i
            )
            entries.extend(agent_entries)
            holds = holds and agent_ok
        if not holds:
            continue
        restricted = TeamPolicy(index, {s: tp.choice[s] for s in reachable})
        return ClusterOutcome(
            "solution",
            ClusterSolution(
                index=index,
                agents=agents,
                team_policy=restricted,
                projections=project_policy(restricted, p),
                satisfaction=entries,
                policies_tried=tried,
            ),
        )
    return ClusterOutcome("no-solution" if exhausted else "inconclusive")


def solve_problem1(
    mdps: Mapping[int, Mdp],
    formulas: Mapping[int, object],
    cfg: SolveConfig = SolveConfig(),
) -> SolveResult:
    """Cluster the agents, then synthesize each cluster independently."""
    if len(mdps) < 2:
        raise ModelError("a team needs at least two agents")
    graph = coupling.build_dependency_graph(mdps, cfg.horizon)
    clustering = coupling.compute_clusters(graph)
    warnings = coupling.wellposedness_warnings(mdps, cfg.horizon)
    if all(len(c) == 1 for c in clustering.clusters):
        warnings.append(
            "no two agents are dependent: every cluster is a singleton and "
            "the problem decomposes into independent single-agent syntheses"
        )

    def run(args):
        idx, cluster = args
        return idx, cluster, synthesize_cluster(idx, cluster, mdps, formulas, cfg)

    tasks = list(enumerate(clustering.clusters, start=1))
    if cfg.jobs > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=cfg.jobs) as pool:
            outcomes = list(pool.map(run, tasks))
    else:
        outcomes = [run(t) for t in tasks]

    solutions = []
    for idx, cluster, outcome in outcomes:
        if outcome.status != "solution":
            return SolveResult(
                status=outcome.status,
                failed_cluster=tuple(sorted(cluster)),
                clustering=clustering,
                warnings=warnings,
            )
        solutions.append(outcome.solution)
    bundle = SolutionBundle(solutions, clustering, warnings)
    return SolveResult("solution", bundle=bundle, clustering=clustering, warnings=warnings)
