"""planefocal: focal lengths and relative poses from three views of a plane."""

from .constraints import (
    GeneratorTable,
    SymQ,
    assemble_case1,
    assemble_case2,
    assemble_case3,
    assemble_case4,
    compute_Q,
    evaluate_generators,
    load_table,
)
from .exceptions import PlaneFocalError
from .geometry import (
    CameraIntrinsics,
    Plane,
    PointTriplet,
    Pose,
    dlt_homography,
    euclidean_homography,
    image_homography,
    normalize_homography,
    project,
)
from .pose import ThreeViewModel, build_model, decompose_homography
from .ransac import EstimationResult, RansacConfig, estimate, local_optimize
from .solvers import (
    FocalSolution,
    oracle_cost,
    solve_ff,
    solve_fff,
    solve_fr,
    solve_frr,
)

__version__ = "0.1.0"

__all__ = [
    "CameraIntrinsics",
    "EstimationResult",
    "FocalSolution",
    "GeneratorTable",
    "Plane",
    "PlaneFocalError",
    "PointTriplet",
    "Pose",
    "RansacConfig",
    "SymQ",
    "ThreeViewModel",
    "assemble_case1",
    "assemble_case2",
    "assemble_case3",
    "assemble_case4",
    "build_model",
    "compute_Q",
    "decompose_homography",
    "dlt_homography",
    "estimate",
    "euclidean_homography",
    "evaluate_generators",
    "image_homography",
    "load_table",
    "local_optimize",
    "normalize_homography",
    "oracle_cost",
    "project",
    "solve_ff",
    "solve_fff",
    "solve_fr",
    "solve_frr",
]
