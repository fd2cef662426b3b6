"""Dual-update deformable mirror control in a 2D Walsh basis."""

from walshdm.walsh import WalshBasis, build_basis, pattern_matrix, project, reconstruct
from walshdm.bvls import BoxLsqProblem, BoxLsqSolution, solve_box_lsq
from walshdm.plant import ActuatorGrid, PlantConfig, PlantState, build_plant
from walshdm.controller import (
    CalibrationBatch,
    ControlParams,
    ControlRecord,
    InfluenceModel,
    RlsState,
    run_dual_update,
)
from walshdm.shapes import ShapeRecipe, finalize_target, gaussian_filter, raw_shape

__version__ = "0.1.0"

__all__ = [
    "ActuatorGrid",
    "BoxLsqProblem",
    "BoxLsqSolution",
    "CalibrationBatch",
    "ControlParams",
    "ControlRecord",
    "InfluenceModel",
    "PlantConfig",
    "PlantState",
    "RlsState",
    "ShapeRecipe",
    "WalshBasis",
    "build_basis",
    "build_plant",
    "finalize_target",
    "gaussian_filter",
    "pattern_matrix",
    "project",
    "raw_shape",
    "reconstruct",
    "run_dual_update",
    "solve_box_lsq",
]
