"""Single-level primal-dual solvers."""

from .base import (
    DEFAULT_GAP_TOLERANCE,
    BaseSolver,
    LevelReport,
    SolveReport,
    SolverParams,
    StepMode,
    ValueBounds,
)
from .cp import CPSolver, CPState, cp_residual, cp_run, cp_step
from .pdhg import PDHGSolver, PDHGState, pdhg_residual, pdhg_run, pdhg_step, recover_potential

__all__ = [
    "BaseSolver",
    "LevelReport",
    "SolveReport",
    "SolverParams",
    "StepMode",
    "ValueBounds",
    "DEFAULT_GAP_TOLERANCE",
    "CPSolver",
    "CPState",
    "cp_step",
    "cp_residual",
    "cp_run",
    "PDHGSolver",
    "PDHGState",
    "pdhg_step",
    "pdhg_residual",
    "pdhg_run",
    "recover_potential",
    "SOLVERS",
    "get_solver",
]

SOLVERS: dict[str, type[BaseSolver]] = {
    "cp": CPSolver,
    "pdhg": PDHGSolver,
}


def get_solver(name: str, params: SolverParams) -> BaseSolver:
    """Look up a solver by algorithm name; multilevel names map to their inner solver."""
    key = name.lower().removeprefix("ml-")
    if key not in SOLVERS:
        raise ValueError(f"Unknown solver: {name!r} (expected one of {', '.join(SOLVERS)})")
    return SOLVERS[key](params)
