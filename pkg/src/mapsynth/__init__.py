"""Controller synthesis for coupled multi-agent MDPs under PCTL tasks."""

from mapsynth._kernels import BACKEND as KERNEL_BACKEND
from mapsynth.coupling import (
    Clustering,
    DependencyGraph,
    build_dependency_graph,
    check_dependent,
    check_handshake_wellposed,
    compute_clusters,
    estimate_state_counts,
)
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
from mapsynth.pctl import ParseError, atoms_of, format_formula, formula_metrics, parse_formula
from mapsynth.policy import SolveConfig, SolveResult, solve_problem1
from mapsynth.product import ProductMdp, build_product, handshake_enabled_states, mutual_formula
from mapsynth.synthesis import (
    SynthConfig,
    check_prob_operator,
    prob_bounded_until_extremal,
    prob_next_extremal,
    prob_unbounded_until_extremal,
    sat_states,
    synthesize_allowed_actions,
)

__version__ = "0.1.0"
