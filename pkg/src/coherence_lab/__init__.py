"""Coherency analysis for power grids mixing synchronous generators with
droop-controlled grid-forming inverters."""

from .coherency import (
    EpsilonSplit,
    ModeShape,
    Partition,
    SlowSubspace,
    SubspaceComparison,
    compare_subspaces,
    epsilon_decompose,
    group_machines,
    mode_shapes,
    slow_eigensolve,
    slow_variable,
    subspace_angles,
    track_modes,
)
from .errors import (
    CoherenceLabError,
    ConvergenceError,
    InputOutputError,
    PipelineError,
    ValidationError,
)
from .linearize import (
    JacobianBlocks,
    LaplacianPair,
    StateSpace,
    build_jacobians,
    check_equilibrium,
    kron_reduce,
    laplacian_closed_form,
    reduced_susceptance,
    row_sum_check,
    state_matrix,
    symmetry_gap,
)
from .machines import Gfm, MachineSet, Sg, load_machines
from .network import Branch, Bus, Network, build_admittance, connectivity_check, load_network
from .powerflow import (
    OperatingPoint,
    PowerFlowOptions,
    PowerFlowSolution,
    init_dynamic_states,
    solve_power_flow,
)
from .scenario import (
    BatchJob,
    Replacement,
    ScenarioReport,
    ScenarioSpec,
    apply_scenario,
    batch_run,
    load_scenario,
    run_pipeline,
)

__version__ = "0.1.0"

__all__ = [
    "BatchJob",
    "Branch",
    "Bus",
    "CoherenceLabError",
    "ConvergenceError",
    "EpsilonSplit",
    "Gfm",
    "InputOutputError",
    "JacobianBlocks",
    "LaplacianPair",
    "MachineSet",
    "ModeShape",
    "Network",
    "OperatingPoint",
    "Partition",
    "PipelineError",
    "PowerFlowOptions",
    "PowerFlowSolution",
    "Replacement",
    "ScenarioReport",
    "ScenarioSpec",
    "Sg",
    "SlowSubspace",
    "StateSpace",
    "SubspaceComparison",
    "ValidationError",
    "apply_scenario",
    "batch_run",
    "build_admittance",
    "build_jacobians",
    "check_equilibrium",
    "compare_subspaces",
    "connectivity_check",
    "epsilon_decompose",
    "group_machines",
    "init_dynamic_states",
    "kron_reduce",
    "laplacian_closed_form",
    "load_machines",
    "load_network",
    "load_scenario",
    "mode_shapes",
    "reduced_susceptance",
    "row_sum_check",
    "run_pipeline",
    "slow_eigensolve",
    "slow_variable",
    "solve_power_flow",
    "state_matrix",
    "subspace_angles",
    "symmetry_gap",
    "track_modes",
]
