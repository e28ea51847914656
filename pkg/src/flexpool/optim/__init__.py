"""Linear-programming and projection kernels."""
from .lp import TOL_FEAS, TOL_OPT, LinearProgram, LpSolution, LpStatus, solve_lp
from .projection import TOL_PROJ, AffineBoxProjector, project_affine_box

__all__ = [
    "TOL_FEAS", "TOL_OPT", "TOL_PROJ", "LinearProgram", "LpSolution", "LpStatus", "solve_lp",
    "AffineBoxProjector", "project_affine_box",
]
