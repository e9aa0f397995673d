"""liftmp: lifted message passing for Max-Cut, Vertex Cover, and Max-3-SAT.

The package solves low-rank semidefinite relaxations by projected
gradient message passing, optionally through trained layer matrices,
rounds fractional solutions with random hyperplanes plus local repair,
and emits dual optimality certificates from the embeddings.
"""

__version__ = "0.1.0"

from .embeddings import gram, init_uniform_sphere, inner, normalize_rows
from .errors import LiftmpError
from .instances import (CnfInstance, Graph, gen_ba, gen_er, gen_hk,
                        gen_random_3sat, gen_ws, parse_dimacs_cnf,
                        parse_edge_list, serialize_dimacs,
                        serialize_edge_list)
from .problems import (Max3SatProblem, MaxCutProblem, Problem,
                       VertexCoverProblem, make_problem)
from .rng import Rng
from .rounding import (best_of_rounds, brute_force, greedy_maxcut, greedy_vc,
                       hyperplane_round, local_search_cut, repair_vc)
from .solver import SolverConfig, SolveResult, backtracking_step, pgd_step, solve
from .certify import (Certificate, maxcut_certificate, maxcut_dual_vars,
                      min_eigenvalue, penalized_certificate)
from .model import (InstanceDistribution, Model, TrainConfig, forward,
                    load_model, model_init, save_model, train)

__all__ = [
    "CnfInstance", "Graph", "Rng", "LiftmpError",
    "gen_ba", "gen_er", "gen_hk", "gen_random_3sat", "gen_ws",
    "parse_dimacs_cnf", "parse_edge_list", "serialize_dimacs",
    "serialize_edge_list",
    "gram", "init_uniform_sphere", "inner", "normalize_rows",
    "Problem", "MaxCutProblem", "VertexCoverProblem", "Max3SatProblem",
    "make_problem",
    "SolverConfig", "SolveResult", "backtracking_step", "pgd_step", "solve",
    "best_of_rounds", "brute_force", "greedy_maxcut", "greedy_vc",
    "hyperplane_round", "local_search_cut", "repair_vc",
    "Certificate", "maxcut_certificate", "maxcut_dual_vars",
    "min_eigenvalue", "penalized_certificate",
    "InstanceDistribution", "Model", "TrainConfig", "forward", "load_model",
    "model_init", "save_model", "train",
]
