"""w1mg: Wasserstein-1 distances on 2D grids with multilevel primal-dual solvers."""

__version__ = "0.1.0"
