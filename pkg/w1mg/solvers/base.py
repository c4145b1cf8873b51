"""Abstract solver interface and the report types shared by all solvers."""

import logging
import math
import time
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Optional

import numpy as np

from ..grid import FluxField, GridSpec, ScalarField, adjoint, dual_value, pointwise_norm, primal_value
from ..prox import PNorm

logger = logging.getLogger(__name__)

DEFAULT_GAP_TOLERANCE = 5e-5
GAP_CHECK_EVERY = 10


class StepMode(Enum):
    """How mu and tau are chosen from the operator-norm bound."""
    SAFE = "safe"
    PRACTICAL = "practical"


@dataclass
class SolverParams:
    p: PNorm = PNorm.ONE
    tolerance: float = 1e-6
    max_iters: int = 100_000
    step_mode: StepMode = StepMode.PRACTICAL
    step_size: Optional[float] = None  # overrides mu = tau when set
    # relative certified primal-dual gap; None stops on the residual alone
    gap_tolerance: Optional[float] = DEFAULT_GAP_TOLERANCE
    record_history: bool = True

    def __post_init__(self):
        self.p = PNorm.parse(self.p)
        if isinstance(self.step_mode, str):
            self.step_mode = StepMode(self.step_mode)
        if not self.tolerance > 0:
            raise ValueError(f"tolerance must be positive, got {self.tolerance}")
        if self.max_iters < 1:
            raise ValueError(f"max_iters must be at least 1, got {self.max_iters}")
        if self.step_size is not None and not self.step_size > 0:
            raise ValueError(f"step_size must be positive, got {self.step_size}")
        if self.gap_tolerance is not None and not self.gap_tolerance > 0:
            raise ValueError(f"gap_tolerance must be positive, got {self.gap_tolerance}")


@dataclass(frozen=True)
class ValueBounds:
    """Certified bracket lower <= W <= upper around the current primal value."""
    lower: float
    upper: float
    value: float

    @property
    def relative_gap(self) -> float:
        """Bound on |value - W| / value."""
        spread = max(self.upper, self.value) - min(self.lower, self.value)
        scale = max(abs(self.value), abs(self.upper))
        if scale == 0.0:
            return 0.0 if spread <= 0.0 else math.inf
        return spread / scale


@dataclass
class LevelReport:
    """Outcome of one inner solve on one grid."""
    cells_per_side: int
    step: float
    tolerance: float
    iterations: int
    fpr_final: float
    seconds: float
    converged: bool
    distance: float
    gap: Optional[float] = None
    state: Any = field(default=None, repr=False)


@dataclass
class SolveReport:
    distance: float
    dual_value: float
    p: PNorm
    algo: str
    flux: FluxField
    potential: ScalarField
    dual_flux: Optional[FluxField]
    levels: list[LevelReport] = field(default_factory=list)
    residual_history: list[float] = field(default_factory=list)
    total_seconds: float = 0.0
    state: Any = field(default=None, repr=False)

    @property
    def converged(self) -> bool:
        return all(level.converged for level in self.levels)

    @property
    def iterations(self) -> int:
        """Iterations spent on the finest grid."""
        return self.levels[-1].iterations if self.levels else 0

    @property
    def grid(self) -> GridSpec:
        return self.flux.grid

    @property
    def dual_infeasibility(self) -> float:
        """max_x ||A* phi(x)||_q of the reported potential."""
        return potential_slope(self.potential, self.p)

    @property
    def duality_gap(self) -> float:
        return self.distance - self.dual_value


def potential_slope(potential: ScalarField, p: PNorm) -> float:
    slopes = pointwise_norm(adjoint(potential), PNorm.parse(p).conjugate)
    return float(np.max(slopes))


class BaseSolver(ABC):
    """Single-level primal-dual solver driven by a fixed-point residual."""

    def __init__(self, params: SolverParams):
        self.params = params

    @property
    @abstractmethod
    def name(self) -> str:
        """Registry key of the algorithm."""
        pass

    @abstractmethod
    def default_step(self, grid: GridSpec) -> float:
        """mu = tau for the configured step mode."""
        pass

    @abstractmethod
    def initial_state(self, rho: ScalarField, init_primal=None, init_dual=None):
        pass

    @abstractmethod
    def step(self, state, rho: ScalarField):
        pass

    @abstractmethod
    def residual(self, curr, prev) -> float:
        pass

    @abstractmethod
    def finalize(self, state) -> tuple[FluxField, ScalarField, FluxField]:
        """Return (flux, potential, dual flux) with potential(rho) >= 0 at optimum."""
        pass

    def feasible_flux(self, flux: FluxField, rho: ScalarField) -> FluxField:
        """A flux with div = rho close to ``flux``; iterates that are already feasible pass through."""
        return flux

    def step_size(self, grid: GridSpec) -> float:
        if self.params.step_size is not None:
            return self.params.step_size
        return self.default_step(grid)

    def value_bounds(self, state, rho: ScalarField) -> ValueBounds:
        """Bracket W with a feasible flux above and the rescaled potential below.

        Dividing the potential by its largest slope makes it dual feasible,
        so <phi, rho>_h / max(1, slope) <= W <= f(feasible flux).
        """
        p = self.params.p
        flux, potential, _ = self.finalize(state)
        slope = potential_slope(potential, p)
        return ValueBounds(
            lower=dual_value(potential, rho) / max(1.0, slope),
            upper=primal_value(self.feasible_flux(flux, rho), p),
            value=primal_value(flux, p),
        )

    def run(self, rho: ScalarField, init_primal=None, init_dual=None, tolerance: float | None = None) -> SolveReport:
        """Iterate until the residual drops below the tolerance or max_iters is hit.

        At least one step is always taken, since the residual needs two states.
        With ``gap_tolerance`` set, a small residual also has to come with a
        certified relative gap below it; the gap is checked every
        GAP_CHECK_EVERY iterations once the residual is small.
        """
        tol = self.params.tolerance if tolerance is None else tolerance
        if not tol > 0:
            raise ValueError(f"tolerance must be positive, got {tol}")
        gap_tol = self.params.gap_tolerance
        grid = rho.grid
        state = self.initial_state(rho, init_primal, init_dual)
        history: list[float] = []
        fpr = math.inf
        gap = None
        last_check = None
        converged = False
        started = time.perf_counter()

        for k in range(1, self.params.max_iters + 1):
            new_state = self.step(state, rho)
            fpr = self.residual(new_state, state)
            state = new_state
            if self.params.record_history:
                history.append(fpr)
            logger.debug("%s N=%d k=%d fpr=%.3e", self.name, grid.cells_per_side, k, fpr)
            if fpr >= tol:
                continue
            if gap_tol is None:
                converged = True
                break
            if last_check is None or k - last_check >= GAP_CHECK_EVERY:
                last_check = k
                gap = self.value_bounds(state, rho).relative_gap
                logger.debug("%s N=%d k=%d gap=%.3e", self.name, grid.cells_per_side, k, gap)
                if gap <= gap_tol:
                    converged = True
                    break

        seconds = time.perf_counter() - started
        iterations = state.k
        if not converged:
            if gap is not None and fpr < tol:
                logger.warning(
                    "%s on N=%d stopped at max_iters=%d with relative gap %.3e > %.3e",
                    self.name, grid.cells_per_side, self.params.max_iters, gap, gap_tol,
                )
            else:
                logger.warning(
                    "%s on N=%d stopped at max_iters=%d with residual %.3e > %.3e",
                    self.name, grid.cells_per_side, self.params.max_iters, fpr, tol,
                )

        flux, potential, dual_flux = self.finalize(state)
        distance = primal_value(flux, self.params.p)
        level = LevelReport(
            cells_per_side=grid.cells_per_side,
            step=grid.step,
            tolerance=tol,
            iterations=iterations,
            fpr_final=fpr,
            seconds=seconds,
            converged=converged,
            distance=distance,
            gap=gap,
            state=state,
        )
        return SolveReport(
            distance=distance,
            dual_value=dual_value(potential, rho),
            p=self.params.p,
            algo=self.name,
            flux=flux,
            potential=potential,
            dual_flux=dual_flux,
            levels=[level],
            residual_history=history,
            total_seconds=seconds,
            state=state,
        )
