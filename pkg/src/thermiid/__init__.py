"""Intrinsic image decomposition guided by an aligned thermal image."""

from .errors import DegenerateRangeError, InvalidInputError, SolverError
from .metrics import EvalReport, edge_accuracy, mse, ordinal_accuracy, si_mse
from .objective import LossWeights, ObjectiveData, total_objective
from .ordinality import (
    EdgeClassifierConfig,
    EdgeLabel,
    PairClassifierConfig,
    PairLabel,
    PointPair,
    PointPairSet,
    classify_edges,
    classify_pairs,
    sample_point_pairs,
)
from .simulate import (
    SceneTruth,
    SpectralConfig,
    ThermalSceneParams,
    make_scene,
    render_absorbed,
    render_visible,
    simulate_scene,
)
from .solver import SolverConfig, check_gradients, decompose

__version__ = "0.1.0"

__all__ = [
    "DegenerateRangeError",
    "EdgeClassifierConfig",
    "EdgeLabel",
    "EvalReport",
    "InvalidInputError",
    "LossWeights",
    "ObjectiveData",
    "PairClassifierConfig",
    "PairLabel",
    "PointPair",
    "PointPairSet",
    "SceneTruth",
    "SolverConfig",
    "SolverError",
    "SpectralConfig",
    "ThermalSceneParams",
    "check_gradients",
    "classify_edges",
    "classify_pairs",
    "decompose",
    "edge_accuracy",
    "make_scene",
    "mse",
    "ordinal_accuracy",
    "render_absorbed",
    "render_visible",
    "sample_point_pairs",
    "si_mse",
    "simulate_scene",
    "total_objective",
]
