"""Command-line surface: validate, cluster, synthesize, simulate.

Exit codes: 0 success, 1 invalid input, 2 proven no solution,
3 inconclusive (enumeration cap reached), 4 internal error.
"""

from __future__ import annotations

import argparse
import os
import sys

from mapsynth import coupling, modelfile, pctl, policy, sim, synthesis
from mapsynth.mdp import Dtmc, ModelError
from mapsynth.product import build_product, state_label

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_NO_SOLUTION = 2
EXIT_INCONCLUSIVE = 3
EXIT_INTERNAL = 4


def _fmt(p: float) -> str:
    return f"{p:.12g}"


def cmd_validate(args) -> int:
    team = modelfile.load_team(args.model)
    warnings = coupling.wellposedness_warnings(team.mdps, args.horizon)
    print(f"{args.model}: {len(team.mdps)} agents, all blocks valid")
    for w in warnings:
        print(f"warning: {w}")
    return EXIT_OK


def cmd_cluster(args) -> int:
    team = modelfile.load_team(args.model)
    graph = coupling.build_dependency_graph(team.mdps, args.horizon)
    clustering = coupling.compute_clusters(graph)
    print(f"dependency edges: {sorted(tuple(sorted(e)) for e in graph.edges)}")
    for idx, cluster in enumerate(clustering.clusters, start=1):
        print(f"cluster {idx}: agents {sorted(cluster)}")
    print(f"f: {dict(sorted(clustering.f.items()))}")
    regions = max(len(m.states) for m in team.mdps.values())
    report = coupling.estimate_state_counts(clustering, regions)
    for idx, size in enumerate(report.cluster_sizes, start=1):
        print(f"cluster {idx} product states: {size}")
    print(f"centralized product states: {report.centralized}")
    print(f"max cluster <= centralized: {report.ordering_holds}")
    if all(len(c) == 1 for c in clustering.clusters):
        print("warning: no two agents are dependent (all clusters are singletons)")
    return EXIT_OK


def cmd_synthesize(args) -> int:
    team = modelfile.load_team(args.model)
    cfg = policy.SolveConfig(
        mode=args.mode,
        epsilon=args.epsilon,
        max_policies=args.max_policies,
        horizon=args.horizon,
        jobs=args.jobs,
    )
    result = policy.solve_problem1(team.mdps, team.formulas, cfg)
    for w in result.warnings:
        print(f"warning: {w}")
    if result.status == "solution":
        doc = modelfile.bundle_to_doc(result.bundle, team, cfg)
        modelfile.write_policy(args.out, doc)
        for cs in result.bundle.clusters:
            for e in cs.satisfaction:
                prob = "n/a" if e.probability is None else _fmt(e.probability)
                print(
                    f"agent {e.agent}: {e.formula} -> probability {prob} "
                    f"(mode {e.mode}, epsilon {e.epsilon:g}, residual {e.residual:.3g})"
                )
        print(f"policy written to {args.out}")
        return EXIT_OK
    if result.status == "no-solution":
        print(f"no solution: cluster {list(result.failed_cluster)} cannot satisfy "
              "its mutual specification with a successful policy")
        return EXIT_NO_SOLUTION
    print(f"inconclusive: enumeration cap {args.max_policies} reached on cluster "
          f"{list(result.failed_cluster)} without a successful policy")
    return EXIT_INCONCLUSIVE


def _top_prob_path(phi):
    """The path formula of a top-level probability operator, if any."""
    if isinstance(phi, pctl.ProbOp):
        return phi.path
    return None


def cmd_simulate(args) -> int:
    team = modelfile.load_team(args.model)
    doc = modelfile.read_policy(args.policy)
    modelfile.check_policy_matches(doc, team)
    cfg = sim.SimConfig(trials=args.trials, max_steps=args.max_steps, seed=args.seed)
    synth_cfg = synthesis.SynthConfig()
    for cluster in doc["clusters"]:
        agents = cluster["agents"]
        p = build_product(agents, team.mdps)
        labels = {state_label(s): s for s in p.states}
        choice = {labels[lbl]: a for lbl, a in cluster["team_policy"].items()}
        matrix = {}
        for s, a in choice.items():
            matrix[state_label(s)] = _relabel(p.row(s, a))
        chain_states = [state_label(s) for s in choice]
        chain = Dtmc(tuple(chain_states), state_label(p.initial), matrix)
        for entry in cluster["satisfaction"]:
            if entry["probability"] is None:
                continue
            phi = pctl.parse_formula(entry["formula"])
            path = _top_prob_path(phi)
            if isinstance(path, pctl.Next):
                target = synthesis.sat_states(p, path.sub, synth_cfg).states
                sets = ({state_label(s) for s in target},)
                report = sim.estimate_path_prob(chain, "next", sets, cfg)
            else:
                sat1 = synthesis.sat_states(p, path.left, synth_cfg).states
                sat2 = synthesis.sat_states(p, path.right, synth_cfg).states
                sets = (
                    {state_label(s) for s in sat1},
                    {state_label(s) for s in sat2},
                    path.bound,
                )
                report = sim.estimate_path_prob(chain, "until", sets, cfg)
            flag = " (truncated estimate)" if report.truncated else ""
            print(
                f"agent {entry['agent']}: computed {_fmt(entry['probability'])} "
                f"vs simulated {_fmt(report.estimate)} "
                f"+/- {_fmt(report.stderr)} over {report.trials} trials{flag}"
            )
            if args.trace:
                print(sim.format_trace(report.sample_traces[0]))
    return EXIT_OK


def _relabel(dist):
    from mapsynth.mdp import Distribution

    return Distribution({state_label(s): pr for s, pr in dist.items()})


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mapsynth",
        description="Synthesize coordinated control policies for coupled "
        "multi-agent MDPs under individual PCTL specifications.",
    )
    default_jobs = int(os.environ.get("MAPSYNTH_JOBS", "1"))
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check a model file")
    p.add_argument("model")
    p.add_argument("--horizon", type=int, default=None)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("cluster", help="print dependency clusters and state counts")
    p.add_argument("model")
    p.add_argument("--horizon", type=int, default=None)
    p.set_defaults(func=cmd_cluster)

    p = sub.add_parser("synthesize", help="synthesize a team policy")
    p.add_argument("model")
    p.add_argument("--mode", choices=["existential", "universal"], default="existential")
    p.add_argument("--epsilon", type=float, default=1e-8)
    p.add_argument("--max-policies", type=int, default=10**5)
    p.add_argument("--horizon", type=int, default=None)
    p.add_argument("--jobs", type=int, default=default_jobs)
    p.add_argument("--out", default="policy.json")
    p.set_defaults(func=cmd_synthesize)

    p = sub.add_parser("simulate", help="Monte-Carlo check of a synthesized policy")
    p.add_argument("model")
    p.add_argument("policy")
    p.add_argument("--trials", type=int, default=10**5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-steps", type=int, default=100)
    p.add_argument("--trace", action="store_true", help="print one sample trace")
    p.set_defaults(func=cmd_simulate)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ModelError, pctl.ParseError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except Exception as exc:  # pragma: no cover - defensive
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
