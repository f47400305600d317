"""Microservice placement on edge servers that balances image layer sharing
against service chain co-location.

The placement problem is an integer quadratic program over a binary
assignment ``x`` and layer pulls ``d``; :func:`sca_solve` minimizes its
weighted-sum scalarization by successive convex approximation with an exact
branch-and-bound inner solver.  Greedy comparison strategies, cpu
reallocation after placement, a scenario generator and an experiment harness
sit around it.
"""

from .baselines import METHODS, BaselineKind, cds, gds, k8s_default, lds, ls, solve_with
from .errors import (
    AlreadyAugmented,
    BudgetExhausted,
    DegenerateBounds,
    DimensionMismatch,
    DisconnectedTopology,
    GenerationFailed,
    Infeasible,
    InfeasibleInstance,
    InfeasibleReference,
    InvalidInstance,
    LayerChainError,
    NoFeasiblePlacement,
    NoFeasiblePoint,
    NonFiniteEntries,
    NotAugmented,
    OverSubscribed,
)
from .experiment import ExperimentConfig, ExperimentReport, baseline_metrics, run_experiment
from .generator import PRESETS, GeneratorParams, generate_instance, nsfnet_topology, preset
from .io import load_deployment, load_instance, save_deployment, save_instance
from .model import (
    Application,
    Deployment,
    FeasibilityReport,
    HopMatrix,
    Instance,
    Layer,
    Microservice,
    Server,
    Violation,
    attach_virtual_sources,
    build_hop_matrix,
    check_feasibility,
    derive_layer_pulls,
    ensure_augmented,
)
from .objective import UtilityConfig, communication_overhead, evaluate, normalization_bounds, pull_delay, utility
from .reallocation import ReallocationResult, kkt_residual, processing_time, reallocate, reallocate_deployment
from .sca import ScaConfig, ScaTrace, build_subproblem, initial_feasible, sca_solve, split_matrix
from .subproblem import SubproblemResult, SubproblemStats, solve_subproblem
from .vectorize import VectorizedModel, vectorize

__version__ = "0.1.0"
