"""Projected PDHG on the flux m and the dual flux, plus potential recovery.

The m-update is an exact projection onto {div m = rho}, so every iterate is
feasible; the dual flux is projected pointwise onto the unit q-ball.
"""

from dataclasses import dataclass, replace

from ..grid import FluxField, GridError, GridSpec, ScalarField, divergence, inner_h, norm_L2
from ..poisson import neumann_poisson_solve, project_affine
from ..prox import PNorm, project_qball
from .base import BaseSolver, SolveReport, SolverParams, StepMode


@dataclass(frozen=True, eq=False)
class PDHGState:
    m: FluxField
    dual_flux: FluxField
    dual_bar: FluxField
    mu: float
    tau: float
    k: int = 0

    def __post_init__(self):
        grid = self.m.grid
        if self.dual_flux.grid != grid or self.dual_bar.grid != grid:
            raise GridError("PDHG state fields live on different grids")
        if not (self.mu > 0 and self.tau > 0):
            raise ValueError(f"step sizes must be positive, got mu={self.mu}, tau={self.tau}")

    @classmethod
    def start(cls, grid: GridSpec, mu: float, tau: float, m: FluxField | None = None,
              dual_flux: FluxField | None = None) -> "PDHGState":
        m = FluxField.zeros(grid) if m is None else m
        dual_flux = FluxField.zeros(grid) if dual_flux is None else dual_flux
        return cls(m=m, dual_flux=dual_flux, dual_bar=dual_flux, mu=mu, tau=tau, k=0)


def pdhg_step(state: PDHGState, rho: ScalarField, p) -> PDHGState:
    q = PNorm.parse(p).conjugate
    grid = state.m.grid
    m_new = project_affine(state.m - state.mu * state.dual_bar, rho)
    trial = state.dual_flux + state.tau * m_new
    dual_new = FluxField.from_nodes(grid, project_qball(trial.to_nodes(), q))
    dual_bar = 2.0 * dual_new - state.dual_flux
    return replace(state, m=m_new, dual_flux=dual_new, dual_bar=dual_bar, k=state.k + 1)


def pdhg_residual(curr: PDHGState, prev: PDHGState) -> float:
    """(1/mu)|dm|^2 + (1/tau)|dvarphi|^2 + 2 <dvarphi, dm>_h."""
    dm = curr.m - prev.m
    dvar = curr.dual_flux - prev.dual_flux
    return (
        norm_L2(dm) ** 2 / curr.mu
        + norm_L2(dvar) ** 2 / curr.tau
        + 2.0 * inner_h(dvar, dm)
    )


def recover_potential(dual_flux: FluxField) -> ScalarField:
    """Zero-mean phi minimizing |A* phi - dual_flux|, i.e. (A A*)^-1 A dual_flux."""
    return neumann_poisson_solve(divergence(dual_flux))


class PDHGSolver(BaseSolver):
    @property
    def name(self) -> str:
        return "pdhg"

    def default_step(self, grid: GridSpec) -> float:
        return 0.5 if self.params.step_mode is StepMode.SAFE else 1.0

    def initial_state(self, rho, init_primal=None, init_dual=None) -> PDHGState:
        step = self.step_size(rho.grid)
        return PDHGState.start(rho.grid, step, step, init_primal, init_dual)

    def step(self, state, rho):
        return pdhg_step(state, rho, self.params.p)

    def residual(self, curr, prev) -> float:
        return pdhg_residual(curr, prev)

    def finalize(self, state):
        return state.m, recover_potential(state.dual_flux), state.dual_flux


def pdhg_run(rho: ScalarField, p, params: SolverParams | None = None,
             init_m: FluxField | None = None, init_dual: FluxField | None = None) -> SolveReport:
    params = replace(params or SolverParams(), p=PNorm.parse(p))
    return PDHGSolver(params).run(rho, init_m, init_dual)
