"""Cascadic multilevel driver: coarse-to-fine interpolation and tolerance schedules.

Levels are numbered 1..L from coarsest to finest with h_l = 2^(L-l) h. Each
level is solved to its own tolerance and its final iterate, interpolated to
the next grid, is the starting point there. There is one pass and no
coarse-grid correction.
"""

import logging
import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .grid import FluxField, GridError, GridSpec, ScalarField
from .prox import PNorm
from .solvers import CPState, PDHGState, SolveReport, SolverParams, get_solver

logger = logging.getLogger(__name__)

ALGORITHMS = ("cp", "pdhg", "ml-cp", "ml-pdhg")


class ScheduleError(ValueError):
    """Raised when a level schedule cannot be built."""
    pass


def _check_nesting(coarse: GridSpec, fine: GridSpec):
    if fine.cells_per_side != 2 * coarse.cells_per_side:
        raise GridError(
            f"Grids do not nest: N={coarse.cells_per_side} cannot be refined to N={fine.cells_per_side}"
        )


def interpolate_scalar(coarse: ScalarField, fine: GridSpec) -> ScalarField:
    """Copy coincident nodes, average 2 neighbours on coarse lines and 4 corners at cell centres."""
    _check_nesting(coarse.grid, fine)
    c = coarse.values
    out = np.empty(fine.node_shape)
    out[0::2, 0::2] = c
    out[0::2, 1::2] = 0.5 * (c[:, :-1] + c[:, 1:])
    out[1::2, 0::2] = 0.5 * (c[:-1, :] + c[1:, :])
    out[1::2, 1::2] = 0.25 * (c[:-1, :-1] + c[:-1, 1:] + c[1:, :-1] + c[1:, 1:])
    return ScalarField(fine, out)


def interpolate_flux(coarse: FluxField, fine: GridSpec) -> FluxField:
    """Nearest coarse edge along each component's own direction, averaged across it."""
    _check_nesting(coarse.grid, fine)

    along = np.repeat(coarse.x_edges, 2, axis=1)
    x_edges = np.empty(fine.x_edge_shape)
    x_edges[0::2, :] = along
    x_edges[1::2, :] = 0.5 * (along[:-1, :] + along[1:, :])

    along = np.repeat(coarse.y_edges, 2, axis=0)
    y_edges = np.empty(fine.y_edge_shape)
    y_edges[:, 0::2] = along
    y_edges[:, 1::2] = 0.5 * (along[:, :-1] + along[:, 1:])

    return FluxField(fine, x_edges, y_edges)


def interpolate_state(state, fine: GridSpec) -> tuple:
    """Interpolated (primal, dual) starting pair for the next level."""
    if isinstance(state, CPState):
        return interpolate_flux(state.m, fine), interpolate_scalar(state.phi, fine)
    if isinstance(state, PDHGState):
        return interpolate_flux(state.m, fine), interpolate_flux(state.dual_flux, fine)
    raise TypeError(f"Cannot interpolate solver state of type {type(state).__name__}")


@dataclass(frozen=True)
class LevelSchedule:
    grids: tuple[GridSpec, ...]
    tolerances: tuple[float, ...]
    alpha: float

    @property
    def levels(self) -> int:
        return len(self.grids)

    @property
    def finest(self) -> GridSpec:
        return self.grids[-1]

    def __iter__(self):
        return iter(zip(self.grids, self.tolerances))


def default_levels(cells_per_side: int) -> int:
    return max(1, int(math.floor(math.log2(cells_per_side))) - 3)


def feasible_levels(cells_per_side: int, levels: int) -> int:
    """Largest L' <= levels with N divisible by 2^(L'-1); warns when reducing."""
    if levels < 1:
        raise ScheduleError(f"levels must be at least 1, got {levels}")
    reduced = levels
    while reduced > 1 and cells_per_side % 2 ** (reduced - 1):
        reduced -= 1
    if reduced != levels:
        logger.warning(
            "N=%d is not divisible by 2^%d; using %d level(s) instead of %d",
            cells_per_side, levels - 1, reduced, levels,
        )
    return reduced


def default_tolerance(algo: str, step: float) -> float:
    """Finest-level stopping tolerance scaled from the 512 x 512 reference values."""
    scale = step * 512.0
    algo = algo.lower()
    if algo == "cp":
        return 1e-6 / 512 * scale ** 3
    if algo == "ml-cp":
        return 1e-6 / 128 * scale ** 2
    if algo == "pdhg":
        return min(2e-4, 1e-4 / 16 * scale ** 2)
    if algo == "ml-pdhg":
        return min(2e-4, 1e-4 / 32 * scale ** 2)
    raise ScheduleError(f"Unknown algorithm: {algo!r}")


def make_schedule(cells_per_side: int, levels: int | None = None, tolerance: float | None = None,
                  alpha: float = -1.0, algo: str = "ml-pdhg") -> LevelSchedule:
    """Grids N_l = N / 2^(L-l) and tolerances eps_l = eps_L (h_l / h_L)^alpha."""
    finest = GridSpec(cells_per_side)
    if levels is None:
        levels = default_levels(cells_per_side)
    if levels < 1:
        raise ScheduleError(f"levels must be at least 1, got {levels}")
    if cells_per_side % 2 ** (levels - 1):
        raise ScheduleError(
            f"N={cells_per_side} is not divisible by 2^{levels - 1} for {levels} levels"
        )
    if tolerance is None:
        tolerance = default_tolerance(algo, finest.step)
    if not tolerance > 0:
        raise ScheduleError(f"tolerance must be positive, got {tolerance}")

    grids = tuple(GridSpec(cells_per_side // 2 ** (levels - l)) for l in range(1, levels + 1))
    tolerances = tuple(tolerance * float(2 ** (levels - l)) ** alpha for l in range(1, levels + 1))
    return LevelSchedule(grids=grids, tolerances=tolerances, alpha=alpha)


def ml_run(sources: Sequence[ScalarField], p, schedule: LevelSchedule, inner: str = "pdhg",
           params: SolverParams | None = None) -> SolveReport:
    """Solve coarse to fine, seeding each level from the previous one.

    ``sources`` holds one zero-sum source per level, coarsest first, each
    discretized from the original densities on that level's grid.
    """
    if len(sources) != schedule.levels:
        raise ScheduleError(f"Expected {schedule.levels} sources, got {len(sources)}")
    for rho, grid in zip(sources, schedule.grids):
        if rho.grid != grid:
            raise GridError(
                f"Source on N={rho.grid.cells_per_side} does not match level grid N={grid.cells_per_side}"
            )

    p = PNorm.parse(p)
    params = replace(params or SolverParams(), p=p)
    solver = get_solver(inner, params)
    # coarse levels only seed the next grid, so they stop on the residual alone
    coarse_solver = get_solver(inner, replace(params, gap_tolerance=None))

    levels = []
    history: list[float] = []
    report = None
    init_primal = init_dual = None
    for index, (rho, (grid, tol)) in enumerate(zip(sources, schedule), start=1):
        if report is not None:
            init_primal, init_dual = interpolate_state(report.state, grid)
        level_solver = solver if index == schedule.levels else coarse_solver
        report = level_solver.run(rho, init_primal, init_dual, tolerance=tol)
        level = report.levels[0]
        levels.append(level)
        history.extend(report.residual_history)
        logger.info(
            "level %d/%d N=%d eps=%.3e iters=%d fpr=%.3e value=%.6g (%.2fs)",
            index, schedule.levels, grid.cells_per_side, tol, level.iterations,
            level.fpr_final, level.distance, level.seconds,
        )

    return SolveReport(
        distance=report.distance,
        dual_value=report.dual_value,
        p=p,
        algo=f"ml-{solver.name}",
        flux=report.flux,
        potential=report.potential,
        dual_flux=report.dual_flux,
        levels=levels,
        residual_history=history,
        total_seconds=sum(level.seconds for level in levels),
        state=report.state,
    )
