"""Grid geometry, node and edge fields, the discrete divergence and its adjoint.

Arrays are indexed ``[j, i]`` with ``(x1, x2) = (i*h, j*h)``, so a C-order
ravel is row-major with x1 fastest. A flux stores only live edges:
``x_edges[j, i]`` is the edge (i*h, j*h) -> ((i+1)*h, j*h) and ``y_edges[j, i]``
the edge (i*h, j*h) -> (i*h, (j+1)*h). Components leaving the domain do not
exist, which is the zero-flux boundary condition.
"""

import math
from dataclasses import dataclass

import numpy as np

from .prox import PNorm, vector_norm


class GridError(ValueError):
    """Raised on malformed grids or when fields live on different grids."""
    pass


class CompatibilityError(GridError):
    """Raised when a right-hand side or source does not sum to zero."""
    pass


@dataclass(frozen=True)
class GridSpec:
    """Square grid on [0,1]^2 with N cells per side and step h = 1/N."""
    cells_per_side: int

    def __post_init__(self):
        n = self.cells_per_side
        if isinstance(n, bool) or not isinstance(n, (int, np.integer)) or n < 1:
            raise GridError(f"cells_per_side must be a positive integer, got {n!r}")
        object.__setattr__(self, "cells_per_side", int(n))

    @property
    def step(self) -> float:
        return 1.0 / self.cells_per_side

    @property
    def nodes_per_side(self) -> int:
        return self.cells_per_side + 1

    @property
    def node_shape(self) -> tuple[int, int]:
        return (self.nodes_per_side, self.nodes_per_side)

    @property
    def x_edge_shape(self) -> tuple[int, int]:
        return (self.nodes_per_side, self.cells_per_side)

    @property
    def y_edge_shape(self) -> tuple[int, int]:
        return (self.cells_per_side, self.nodes_per_side)

    @property
    def weight(self) -> float:
        """The h^2 factor of L2 norms and inner products."""
        return self.step * self.step

    def coordinates(self) -> tuple[np.ndarray, np.ndarray]:
        """Node coordinates (x1, x2), each of shape ``node_shape``."""
        axis = np.arange(self.nodes_per_side) / self.cells_per_side
        x1, x2 = np.meshgrid(axis, axis)
        return x1, x2

    def coarsened(self) -> "GridSpec":
        if self.cells_per_side % 2:
            raise GridError(f"Cannot coarsen a grid with {self.cells_per_side} cells per side")
        return GridSpec(self.cells_per_side // 2)

    def refined(self) -> "GridSpec":
        return GridSpec(2 * self.cells_per_side)


def _same_grid(a, b) -> GridSpec:
    if a.grid != b.grid:
        raise GridError(
            f"Grid mismatch: N={a.grid.cells_per_side} vs N={b.grid.cells_per_side}"
        )
    return a.grid


@dataclass(frozen=True, eq=False)
class ScalarField:
    """One real per node: potentials and densities."""
    grid: GridSpec
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim == 1 and values.size == self.grid.nodes_per_side ** 2:
            values = values.reshape(self.grid.node_shape)
        if values.shape != self.grid.node_shape:
            raise GridError(
                f"Scalar field of shape {values.shape} does not match {self.grid.node_shape}"
            )
        object.__setattr__(self, "values", values)

    @classmethod
    def zeros(cls, grid: GridSpec) -> "ScalarField":
        return cls(grid, np.zeros(grid.node_shape))

    @classmethod
    def constant(cls, grid: GridSpec, value: float) -> "ScalarField":
        return cls(grid, np.full(grid.node_shape, float(value)))

    def total(self) -> float:
        return float(np.sum(self.values))

    def mass(self) -> float:
        """Sum of values times h^2."""
        return self.total() * self.grid.weight

    def mean(self) -> float:
        return float(np.mean(self.values))

    def centered(self) -> "ScalarField":
        return ScalarField(self.grid, self.values - self.mean())

    def __add__(self, other: "ScalarField") -> "ScalarField":
        return ScalarField(_same_grid(self, other), self.values + other.values)

    def __sub__(self, other: "ScalarField") -> "ScalarField":
        return ScalarField(_same_grid(self, other), self.values - other.values)

    def __neg__(self) -> "ScalarField":
        return ScalarField(self.grid, -self.values)

    def __mul__(self, scalar: float) -> "ScalarField":
        return ScalarField(self.grid, scalar * self.values)

    __rmul__ = __mul__


class SourceField(ScalarField):
    """A zero-total source rho = rho0 - rho1."""

    def __post_init__(self):
        super().__post_init__()
        total = abs(float(np.sum(self.values)))
        scale = float(np.sum(np.abs(self.values)))
        if total > 1e-12 * scale:
            raise CompatibilityError(
                f"Source does not sum to zero: |sum| = {total:.3e}, sum|.| = {scale:.3e}"
            )

    @classmethod
    def from_field(cls, field: ScalarField) -> "SourceField":
        return cls(field.grid, field.values)


@dataclass(frozen=True, eq=False)
class FluxField:
    """Edge values of a vector field m: Omega^h -> R^2 (also the dual flux)."""
    grid: GridSpec
    x_edges: np.ndarray
    y_edges: np.ndarray

    def __post_init__(self):
        x_edges = np.asarray(self.x_edges, dtype=float)
        y_edges = np.asarray(self.y_edges, dtype=float)
        if x_edges.shape != self.grid.x_edge_shape or y_edges.shape != self.grid.y_edge_shape:
            raise GridError(
                f"Flux edges {x_edges.shape}/{y_edges.shape} do not match "
                f"{self.grid.x_edge_shape}/{self.grid.y_edge_shape}"
            )
        object.__setattr__(self, "x_edges", x_edges)
        object.__setattr__(self, "y_edges", y_edges)

    @classmethod
    def zeros(cls, grid: GridSpec) -> "FluxField":
        return cls(grid, np.zeros(grid.x_edge_shape), np.zeros(grid.y_edge_shape))

    def to_nodes(self) -> np.ndarray:
        """Node tensor of shape (N+1, N+1, 2); absent boundary components are 0."""
        out = np.zeros(self.grid.node_shape + (2,))
        out[:, :-1, 0] = self.x_edges
        out[:-1, :, 1] = self.y_edges
        return out

    @classmethod
    def from_nodes(cls, grid: GridSpec, nodes: np.ndarray) -> "FluxField":
        """Inverse of ``to_nodes``; components at x_i = 1 are dropped."""
        nodes = np.asarray(nodes, dtype=float)
        return cls(grid, nodes[:, :-1, 0].copy(), nodes[:-1, :, 1].copy())

    def __add__(self, other: "FluxField") -> "FluxField":
        grid = _same_grid(self, other)
        return FluxField(grid, self.x_edges + other.x_edges, self.y_edges + other.y_edges)

    def __sub__(self, other: "FluxField") -> "FluxField":
        grid = _same_grid(self, other)
        return FluxField(grid, self.x_edges - other.x_edges, self.y_edges - other.y_edges)

    def __neg__(self) -> "FluxField":
        return FluxField(self.grid, -self.x_edges, -self.y_edges)

    def __mul__(self, scalar: float) -> "FluxField":
        return FluxField(self.grid, scalar * self.x_edges, scalar * self.y_edges)

    __rmul__ = __mul__


def divergence(m: FluxField) -> ScalarField:
    """Discrete divergence with the three boundary cases of the flux problem."""
    out = np.zeros(m.grid.node_shape)
    out[:, :-1] += m.x_edges
    out[:, 1:] -= m.x_edges
    out[:-1, :] += m.y_edges
    out[1:, :] -= m.y_edges
    return ScalarField(m.grid, out / m.grid.step)


def adjoint(phi: ScalarField) -> FluxField:
    """Exact adjoint of ``divergence``: (phi(x) - phi(x + h e_i)) / h per edge."""
    v = phi.values
    h = phi.grid.step
    return FluxField(phi.grid, (v[:, :-1] - v[:, 1:]) / h, (v[:-1, :] - v[1:, :]) / h)


def _plain_inner(a, b) -> float:
    _same_grid(a, b)
    if isinstance(a, FluxField) and isinstance(b, FluxField):
        return float(np.vdot(a.x_edges, b.x_edges) + np.vdot(a.y_edges, b.y_edges))
    if isinstance(a, ScalarField) and isinstance(b, ScalarField):
        return float(np.vdot(a.values, b.values))
    raise GridError(f"Cannot pair {type(a).__name__} with {type(b).__name__}")


def inner_h(a, b) -> float:
    """<a, b>_h = sum a*b*h^2 for two scalar or two flux fields."""
    return _plain_inner(a, b) * a.grid.weight


def norm_L2(a) -> float:
    return math.sqrt(max(inner_h(a, a), 0.0))


def norm_plain(a) -> float:
    return math.sqrt(max(_plain_inner(a, a), 0.0))


def operator_norm_bound(grid: GridSpec) -> float:
    """Gershgorin bound 2*sqrt(d)/h on ||A_h|| with d = 2."""
    return 2.0 * math.sqrt(2.0) / grid.step


def estimate_operator_norm(grid: GridSpec, iterations: int = 200, seed: int = 0) -> float:
    """Power-iteration estimate of ||A_h|| from the node operator A A*."""
    rng = np.random.default_rng(seed)
    v = ScalarField(grid, rng.standard_normal(grid.node_shape)).centered()
    eigenvalue = 0.0
    for _ in range(iterations):
        w = divergence(adjoint(v))
        norm = norm_plain(w)
        if norm == 0.0:
            return 0.0
        eigenvalue = norm / norm_plain(v)
        v = w * (1.0 / norm)
    return math.sqrt(eigenvalue)


def pointwise_norm(m: FluxField, p: PNorm) -> np.ndarray:
    """||(m_1(x), m_2(x))||_p per node, absent components counted as 0."""
    return vector_norm(m.to_nodes(), p)


def primal_value(m: FluxField, p) -> float:
    """sum_x ||m(x)||_p h^2."""
    p = PNorm.parse(p)
    return float(np.sum(pointwise_norm(m, p))) * m.grid.weight


def dual_value(phi: ScalarField, rho: ScalarField) -> float:
    """<phi, rho>_h."""
    return inner_h(phi, rho)
