"""Spectral solver for the Neumann node Laplacian A A* and the affine projection.

The operator ``divergence(adjoint(.))`` on an (N+1) x (N+1) node grid is the
5-point Laplacian with reflecting boundaries. It is diagonalized by the
orthonormal type-II cosine transform over N+1 points, with eigenvalues
``(2 - 2 cos(pi k / (N+1))) / h^2`` per axis.
"""

import logging
from functools import lru_cache

import numpy as np
from scipy import fft

from .grid import (
    CompatibilityError,
    FluxField,
    GridSpec,
    ScalarField,
    adjoint,
    divergence,
)

__all__ = [
    "CompatibilityError",
    "NeumannPoissonSolver",
    "get_poisson_solver",
    "neumann_poisson_solve",
    "project_affine",
]

logger = logging.getLogger(__name__)

COMPATIBILITY_RTOL = 1e-10


def _check_zero_sum(values: np.ndarray, what: str):
    total = abs(float(np.sum(values)))
    scale = float(np.sum(np.abs(values)))
    if total > COMPATIBILITY_RTOL * scale:
        raise CompatibilityError(
            f"{what} must sum to zero: |sum| = {total:.3e}, sum|.| = {scale:.3e}"
        )


class NeumannPoissonSolver:
    """Precomputed spectral tables for one grid; read-only after construction."""

    def __init__(self, grid: GridSpec):
        self.grid = grid
        n = grid.nodes_per_side
        k = np.arange(n)
        axis = (2.0 - 2.0 * np.cos(np.pi * k / n)) / grid.weight
        eigenvalues = axis[:, None] + axis[None, :]
        with np.errstate(divide="ignore"):
            kernel = np.where(eigenvalues > 0, 1.0 / eigenvalues, 0.0)
        kernel[0, 0] = 0.0
        self.eigenvalues = eigenvalues
        self._kernel = kernel

    def solve(self, b: ScalarField, check: bool = True) -> ScalarField:
        """Zero-mean phi with divergence(adjoint(phi)) = b.

        With ``check=False`` the mean of b is silently dropped, which is what
        the affine projection wants for round-off sized residual means.
        """
        if b.grid != self.grid:
            raise CompatibilityError(
                f"Right-hand side on N={b.grid.cells_per_side}, solver on N={self.grid.cells_per_side}"
            )
        if check:
            _check_zero_sum(b.values, "Poisson right-hand side")
        coefficients = fft.dctn(b.values, type=2, norm="ortho")
        coefficients *= self._kernel
        return ScalarField(self.grid, fft.idctn(coefficients, type=2, norm="ortho"))

    def apply(self, phi: ScalarField) -> ScalarField:
        """Forward operator, for residual checks."""
        return divergence(adjoint(phi))


@lru_cache(maxsize=32)
def get_poisson_solver(grid: GridSpec) -> NeumannPoissonSolver:
    logger.debug("Building Poisson tables for N=%d", grid.cells_per_side)
    return NeumannPoissonSolver(grid)


def neumann_poisson_solve(b: ScalarField) -> ScalarField:
    """Solve A A* phi = b for a zero-sum b, pinning mean(phi) = 0."""
    return get_poisson_solver(b.grid).solve(b)


def project_affine(m: FluxField, rho: ScalarField) -> FluxField:
    """Euclidean projection of m onto {m : divergence(m) = rho}."""
    _check_zero_sum(rho.values, "Source")
    residual = divergence(m) - rho
    correction = get_poisson_solver(m.grid).solve(residual, check=False)
    return m - adjoint(correction)
