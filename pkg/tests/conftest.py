import numpy as np
import pytest

from w1mg.grid import FluxField, GridSpec, ScalarField, SourceField


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_scalar(rng, n: int) -> ScalarField:
    grid = GridSpec(n)
    return ScalarField(grid, rng.standard_normal(grid.node_shape))


def random_flux(rng, n: int) -> FluxField:
    grid = GridSpec(n)
    return FluxField(grid, rng.standard_normal(grid.x_edge_shape), rng.standard_normal(grid.y_edge_shape))


def random_source(rng, n: int) -> SourceField:
    grid = GridSpec(n)
    values = rng.standard_normal(grid.node_shape)
    return SourceField(grid, values - values.mean())


def dirac_source(n: int) -> SourceField:
    """Unit point masses at (0, 0) and (1, 0)."""
    grid = GridSpec(n)
    values = np.zeros(grid.node_shape)
    values[0, 0] = 1.0 / grid.weight
    values[0, -1] = -1.0 / grid.weight
    return SourceField(grid, values)
