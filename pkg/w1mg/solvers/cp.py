"""Primal-dual iteration on the flux m and the multiplier phi of div m = rho."""

from dataclasses import dataclass, replace

from ..grid import (
    FluxField,
    GridError,
    GridSpec,
    ScalarField,
    adjoint,
    divergence,
    inner_h,
    norm_L2,
    operator_norm_bound,
)
from ..poisson import project_affine
from ..prox import PNorm, shrink
from .base import BaseSolver, SolveReport, SolverParams, StepMode


@dataclass(frozen=True, eq=False)
class CPState:
    """m^k, phi^k and m^{k-1} with the step sizes that produced them.

    ``phi`` is the raw multiplier; at the optimum <phi, rho>_h = -W, so the
    reported potential is ``-phi``.
    """
    m: FluxField
    phi: ScalarField
    m_prev: FluxField
    mu: float
    tau: float
    k: int = 0

    def __post_init__(self):
        grid = self.m.grid
        if self.phi.grid != grid or self.m_prev.grid != grid:
            raise GridError("CP state fields live on different grids")
        if not (self.mu > 0 and self.tau > 0):
            raise ValueError(f"step sizes must be positive, got mu={self.mu}, tau={self.tau}")

    @classmethod
    def start(cls, grid: GridSpec, mu: float, tau: float, m: FluxField | None = None,
              phi: ScalarField | None = None) -> "CPState":
        m = FluxField.zeros(grid) if m is None else m
        phi = ScalarField.zeros(grid) if phi is None else phi
        return cls(m=m, phi=phi, m_prev=m, mu=mu, tau=tau, k=0)


def cp_step(state: CPState, rho: ScalarField, p) -> CPState:
    """One sweep: shrink the flux, extrapolate, then ascend in phi."""
    p = PNorm.parse(p)
    grid = state.m.grid
    trial = state.m - state.mu * adjoint(state.phi)
    m_new = FluxField.from_nodes(grid, shrink(trial.to_nodes(), state.mu, p))
    m_bar = 2.0 * m_new - state.m
    phi_new = state.phi + state.tau * (divergence(m_bar) - rho)
    return replace(state, m=m_new, phi=phi_new, m_prev=state.m, k=state.k + 1)


def cp_residual(curr: CPState, prev: CPState) -> float:
    """(1/mu)|dm|^2 + (1/tau)|dphi|^2 - 2 <dphi, A dm>_h."""
    dm = curr.m - prev.m
    dphi = curr.phi - prev.phi
    return (
        norm_L2(dm) ** 2 / curr.mu
        + norm_L2(dphi) ** 2 / curr.tau
        - 2.0 * inner_h(dphi, divergence(dm))
    )


class CPSolver(BaseSolver):
    @property
    def name(self) -> str:
        return "cp"

    def default_step(self, grid: GridSpec) -> float:
        bound = operator_norm_bound(grid)
        if self.params.step_mode is StepMode.SAFE:
            return 1.0 / (2.0 * bound)
        return 1.0 / bound

    def initial_state(self, rho, init_primal=None, init_dual=None) -> CPState:
        step = self.step_size(rho.grid)
        return CPState.start(rho.grid, step, step, init_primal, init_dual)

    def step(self, state, rho):
        return cp_step(state, rho, self.params.p)

    def residual(self, curr, prev) -> float:
        return cp_residual(curr, prev)

    def finalize(self, state):
        potential = -state.phi
        return state.m, potential, adjoint(potential)

    def feasible_flux(self, flux, rho):
        # CP iterates satisfy div m = rho only in the limit
        return project_affine(flux, rho)


def cp_run(rho: ScalarField, p, params: SolverParams | None = None,
           init_m: FluxField | None = None, init_phi: ScalarField | None = None) -> SolveReport:
    params = replace(params or SolverParams(), p=PNorm.parse(p))
    return CPSolver(params).run(rho, init_m, init_phi)
