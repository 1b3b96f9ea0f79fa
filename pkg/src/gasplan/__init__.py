"""Emission-aware gas network planning with input-convex ReLU surrogates."""

from .formulation import (
    BuildOptions,
    FormulationError,
    build_icnn_expansion,
    build_icnn_operational,
    build_miqp_relaxation,
    extract_solution,
)
from .icnn import (
    Envelope,
    ReluNet,
    TrainConfig,
    TrainingDivergedError,
    build_envelope,
    enumerate_hyperplanes,
    load_net,
    save_net,
    screen_supporting,
    train_pair,
)
from .network import GasNetwork, NetworkError, PlanningProblem, incidence_matrix, load_problem, validate
from .physics import FlowState, RestorationError, newton_restore, residuals, restore_and_score
from .pipeline import RunReport, minimum_emission, run_plan, train_nets

__all__ = [
    "BuildOptions",
    "Envelope",
    "FlowState",
    "FormulationError",
    "GasNetwork",
    "NetworkError",
    "PlanningProblem",
    "ReluNet",
    "RestorationError",
    "RunReport",
    "TrainConfig",
    "TrainingDivergedError",
    "build_envelope",
    "build_icnn_expansion",
    "build_icnn_operational",
    "build_miqp_relaxation",
    "enumerate_hyperplanes",
    "extract_solution",
    "incidence_matrix",
    "load_net",
    "load_problem",
    "minimum_emission",
    "newton_restore",
    "residuals",
    "restore_and_score",
    "run_plan",
    "save_net",
    "screen_supporting",
    "train_nets",
    "train_pair",
    "validate",
]
