"""From two density images to a solve report."""

import logging
from dataclasses import dataclass
from typing import Optional, Union

from .config import Config
from .grid import GridSpec
from .images import DensityImage, default_cells, discretize, level_sources, make_source
from .multilevel import default_levels, default_tolerance, feasible_levels, make_schedule, ml_run
from .prox import PNorm
from .solvers import DEFAULT_GAP_TOLERANCE, SolveReport, SolverParams, StepMode, get_solver

logger = logging.getLogger(__name__)


@dataclass
class SolveRequest:
    """Everything a solve needs besides the densities; None means automatic.

    ``gap`` is the certified relative gap the finest level must reach on top
    of its residual tolerance; None or "off" stops on the residual alone.
    """
    p: PNorm = PNorm.ONE
    algo: str = "ml-pdhg"
    levels: Optional[int] = None
    alpha: float = -1.0
    tol: Optional[float] = None
    max_iters: int = 100_000
    safe_steps: bool = False
    cells: Optional[int] = None
    gap: Union[float, str, None] = DEFAULT_GAP_TOLERANCE

    def __post_init__(self):
        self.p = PNorm.parse(self.p)
        if isinstance(self.gap, str):
            self.gap = None if self.gap.lower() == "off" else float(self.gap)

    @property
    def multilevel(self) -> bool:
        return self.algo.startswith("ml-")

    def params(self, tolerance: float) -> SolverParams:
        return SolverParams(
            p=self.p,
            tolerance=tolerance,
            max_iters=self.max_iters,
            step_mode=StepMode.SAFE if self.safe_steps else StepMode.PRACTICAL,
            gap_tolerance=self.gap,
        )

    @classmethod
    def from_config(cls, config: Config, **overrides) -> "SolveRequest":
        """Config values with every non-None override applied on top."""
        solver = config.solver
        values = dict(
            p=solver.p,
            algo=solver.algo,
            levels=None if solver.levels == "auto" else solver.levels,
            alpha=solver.alpha,
            tol=None if solver.tol == "auto" else solver.tol,
            max_iters=solver.max_iters,
            safe_steps=solver.safe_steps,
            gap=solver.gap,
        )
        values.update({key: value for key, value in overrides.items() if value is not None})
        return cls(**values)


def solve_images(image0: DensityImage, image1: DensityImage, request: SolveRequest) -> SolveReport:
    cells = request.cells or default_cells(image0.width)
    grid = GridSpec(cells)
    tolerance = request.tol or default_tolerance(request.algo, grid.step)

    if not request.multilevel:
        logger.info("%s on N=%d with eps=%.3e", request.algo, cells, tolerance)
        rho = make_source(discretize(image0, grid), discretize(image1, grid))
        return get_solver(request.algo, request.params(tolerance)).run(rho)

    levels = feasible_levels(cells, request.levels or default_levels(cells))
    schedule = make_schedule(cells, levels, tolerance, request.alpha, request.algo)
    logger.info("%s on N=%d with %d level(s), eps_L=%.3e, alpha=%g",
                request.algo, cells, levels, tolerance, request.alpha)
    sources = level_sources(image0, image1, schedule.grids)
    return ml_run(sources, request.p, schedule, request.algo, request.params(tolerance))
