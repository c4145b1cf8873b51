"""Exact references for small instances and the validation harnesses built on them.

For p = 1 the flux problem is a min-cost flow on the 4-connected grid graph
with unit cost per edge, solved here exactly with successive shortest paths
on integer-scaled supplies. The same engine handles a 1D path graph.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import networkx as nx
import numpy as np
from scipy import optimize, sparse

from .grid import GridSpec, ScalarField, norm_L2
from .multilevel import interpolate_flux, interpolate_scalar, make_schedule, ml_run
from .prox import PNorm
from .solvers import SolverParams, pdhg_run

logger = logging.getLogger(__name__)

MAX_ORACLE_CELLS = 16
FLOW_SCALE = 2 ** 20


class OracleError(ValueError):
    """Raised when an exact reference or a search cannot be produced."""
    pass


@dataclass
class FlowResult:
    value: float
    quantization_bound: float
    augmentations: int


def _quantize(supply: np.ndarray) -> tuple[np.ndarray, float]:
    """Integer supplies with denominator FLOW_SCALE summing exactly to zero."""
    scaled = np.rint(supply * FLOW_SCALE).astype(np.int64)
    drift = int(scaled.sum())
    if drift:
        scaled.flat[int(np.argmax(np.abs(scaled)))] -= drift
    error = float(np.sum(np.abs(supply - scaled / FLOW_SCALE)))
    return scaled, error


def _successive_shortest_paths(graph: nx.Graph, supply: dict) -> tuple[int, int]:
    """Total unit-cost of an optimal flow on an uncapacitated undirected graph.

    The residual arc u->v costs -1 while net flow runs v->u (capacity equal to
    that flow) and +1 otherwise. Node potentials keep reduced costs
    nonnegative, so Dijkstra applies throughout.
    """
    residual = nx.DiGraph()
    residual.add_nodes_from(graph.nodes)
    for u, v in graph.edges:
        residual.add_edge(u, v, cost=1, cap=math.inf)
        residual.add_edge(v, u, cost=1, cap=math.inf)

    net: dict[tuple, int] = {}
    excess = {node: int(value) for node, value in supply.items() if value}
    if sum(excess.values()):
        raise OracleError("Supplies do not balance")
    potential = {node: 0 for node in residual.nodes}

    def reduced(u, v, data):
        return data["cost"] + potential[u] - potential[v]

    def set_arc(u, v, flow_uv):
        arc = residual[u][v]
        if flow_uv < 0:
            arc["cost"], arc["cap"] = -1, -flow_uv
        else:
            arc["cost"], arc["cap"] = 1, math.inf

    total = 0
    augmentations = 0
    while excess:
        source = min(node for node, value in excess.items() if value > 0)
        dist, paths = nx.single_source_dijkstra(residual, source, weight=reduced)
        sink = min((node for node, value in excess.items() if value < 0),
                   key=lambda node: (dist[node], node))
        arcs = list(zip(paths[sink][:-1], paths[sink][1:]))

        amount = min(excess[source], -excess[sink])
        for u, v in arcs:
            amount = min(amount, residual[u][v]["cap"])

        for u, v in arcs:
            total += amount * residual[u][v]["cost"]
            flow_uv = net.get((u, v), 0) + amount
            net[u, v], net[v, u] = flow_uv, -flow_uv
            set_arc(u, v, flow_uv)
            set_arc(v, u, -flow_uv)

        for node, d in dist.items():
            potential[node] += d
        excess[source] -= amount
        excess[sink] += amount
        excess = {node: value for node, value in excess.items() if value}
        augmentations += 1

    return total, augmentations


def _grid_graph(grid: GridSpec) -> nx.Graph:
    n = grid.nodes_per_side
    return nx.grid_2d_graph(n, n)


def min_cost_flow_p1(rho: ScalarField) -> FlowResult:
    """Exact p = 1 optimum with the quantization error of the integer supplies."""
    grid = rho.grid
    if grid.cells_per_side > MAX_ORACLE_CELLS:
        raise OracleError(
            f"Exact oracle is limited to N <= {MAX_ORACLE_CELLS}, got N={grid.cells_per_side}"
        )
    scaled, error = _quantize(rho.values * grid.weight)
    supply = {(j, i): scaled[j, i] for j in range(grid.nodes_per_side) for i in range(grid.nodes_per_side)}
    cost, augmentations = _successive_shortest_paths(_grid_graph(grid), supply)
    # W1 of the rounding residual <= (error / 2) * l1 diameter 2 = error
    bound = error
    logger.debug("min-cost flow N=%d: %d augmentations, quantization bound %.2e",
                 grid.cells_per_side, augmentations, bound)
    return FlowResult(value=cost * grid.step / FLOW_SCALE, quantization_bound=bound,
                      augmentations=augmentations)


def w1_exact_p1(rho: ScalarField) -> float:
    """W1 for the l1 ground metric on grids with N <= 16."""
    return min_cost_flow_p1(rho).value


def _divergence_matrix(grid: GridSpec) -> sparse.csr_matrix:
    n = grid.nodes_per_side
    index = np.arange(n * n).reshape(grid.node_shape)
    tails = np.concatenate([index[:, :-1].ravel(), index[:-1, :].ravel()])
    heads = np.concatenate([index[:, 1:].ravel(), index[1:, :].ravel()])
    edges = np.arange(tails.size)
    rows = np.concatenate([tails, heads])
    cols = np.concatenate([edges, edges])
    data = np.concatenate([np.ones(tails.size), -np.ones(heads.size)]) / grid.step
    return sparse.coo_matrix((data, (rows, cols)), shape=(n * n, tails.size)).tocsr()


def w1_linprog_p1(rho: ScalarField) -> float:
    """Independent LP solve of the p = 1 flux problem (split m = m+ - m-)."""
    grid = rho.grid
    a = _divergence_matrix(grid)
    edges = a.shape[1]
    cost = np.full(2 * edges, grid.weight)
    result = optimize.linprog(
        cost,
        A_eq=sparse.hstack([a, -a]).tocsr(),
        b_eq=rho.values.ravel(),
        bounds=(0, None),
        method="highs",
    )
    if result.status != 0:
        raise OracleError(f"Linear program failed: {result.message}")
    return float(result.fun)


def w1_1d_cdf(rho0, rho1, step: float) -> float:
    """h * sum_x |sum_{y<=x} (rho0 - rho1)(y) h|."""
    rho0 = np.asarray(rho0, dtype=float)
    rho1 = np.asarray(rho1, dtype=float)
    if rho0.shape != rho1.shape or rho0.ndim != 1:
        raise OracleError(f"1D densities must have equal length, got {rho0.shape} and {rho1.shape}")
    diff = (rho0 - rho1) * step
    scale = float(np.sum(np.abs(rho0)) + np.sum(np.abs(rho1))) * step
    if abs(float(diff.sum())) > 1e-9 * max(scale, 1.0):
        raise OracleError(f"Mass mismatch: {float(diff.sum()):.3e}")
    return step * float(np.sum(np.abs(np.cumsum(diff))))


def w1_exact_path(rho0, rho1, step: float) -> float:
    """Min-cost flow on the 1D path graph, for cross-checking ``w1_1d_cdf``."""
    rho0 = np.asarray(rho0, dtype=float)
    rho1 = np.asarray(rho1, dtype=float)
    if rho0.shape != rho1.shape or rho0.ndim != 1:
        raise OracleError(f"1D densities must have equal length, got {rho0.shape} and {rho1.shape}")
    scaled, _ = _quantize((rho0 - rho1) * step)
    cost, _ = _successive_shortest_paths(nx.path_graph(rho0.size), dict(enumerate(scaled)))
    return cost * step / FLOW_SCALE


def fit_decay_exponent(steps: Sequence[float], values: Sequence[float]) -> float:
    """Least-squares slope of log2(values) against log2(steps)."""
    steps = np.asarray(steps, dtype=float)
    values = np.asarray(values, dtype=float)
    if steps.size < 2 or steps.shape != values.shape:
        raise OracleError("Need at least two (step, value) pairs of equal length")
    if np.any(values <= 0) or np.any(steps <= 0):
        raise OracleError("Exponent fit needs strictly positive steps and values")
    slope, _ = np.polyfit(np.log2(steps), np.log2(values), 1)
    return float(slope)


@dataclass
class AssumptionReport:
    """Level-wise solution norms and interpolation discrepancies.

    ``z`` is (m, phi) from the multiplier iteration and ``y`` is (m, dual
    flux) from the projected iteration. Discrepancies start at level 2.
    """
    p: PNorm
    steps: list[float]
    z_norms: list[float]
    y_norms: list[float]
    z_discrepancy: list[float]
    y_discrepancy: list[float]
    r: float = math.nan
    nu: float = math.nan
    instances: int = 0

    def to_rows(self) -> list[dict]:
        rows = []
        for index, step in enumerate(self.steps):
            rows.append({
                "p": str(self.p),
                "h": step,
                "z_norm2": self.z_norms[index],
                "y_norm2": self.y_norms[index],
                "z_interp_err2": self.z_discrepancy[index - 1] if index else "",
                "y_interp_err2": self.y_discrepancy[index - 1] if index else "",
            })
        return rows


def _pair_norm2(a, b) -> float:
    return norm_L2(a) ** 2 + norm_L2(b) ** 2


def validate_assumptions(instances: Sequence[Sequence[ScalarField]], p=PNorm.ONE,
                         tolerance: float = 1e-8, max_iters: int = 200_000) -> AssumptionReport:
    """Average solution norms and interpolation errors over instances.

    Each instance is a coarse-to-fine list of per-level sources. Both
    cascades run with alpha = 0, so every level is solved to ``tolerance``.
    """
    if not instances:
        raise OracleError("No instances to validate")
    p = PNorm.parse(p)
    levels = len(instances[0])
    finest = instances[0][-1].grid.cells_per_side
    schedule = make_schedule(finest, levels, tolerance, alpha=0.0)
    # every level to the same residual, so the per-level states are comparable
    params = SolverParams(p=p, tolerance=tolerance, max_iters=max_iters, gap_tolerance=None,
                          record_history=False)

    z_norms = np.zeros(levels)
    y_norms = np.zeros(levels)
    z_disc = np.zeros(levels - 1)
    y_disc = np.zeros(levels - 1)
    for count, sources in enumerate(instances, start=1):
        if len(sources) != levels:
            raise OracleError("All instances need the same number of levels")
        z_states = [lv.state for lv in ml_run(sources, p, schedule, "cp", params).levels]
        y_states = [lv.state for lv in ml_run(sources, p, schedule, "pdhg", params).levels]
        for l in range(levels):
            z_norms[l] += _pair_norm2(z_states[l].m, z_states[l].phi)
            y_norms[l] += _pair_norm2(y_states[l].m, y_states[l].dual_flux)
            if l == 0:
                continue
            fine = schedule.grids[l]
            z_disc[l - 1] += _pair_norm2(
                interpolate_flux(z_states[l - 1].m, fine) - z_states[l].m,
                interpolate_scalar(z_states[l - 1].phi, fine) - z_states[l].phi,
            )
            y_disc[l - 1] += _pair_norm2(
                interpolate_flux(y_states[l - 1].m, fine) - y_states[l].m,
                interpolate_flux(y_states[l - 1].dual_flux, fine) - y_states[l].dual_flux,
            )
        logger.info("validated instance %d/%d", count, len(instances))

    n = len(instances)
    steps = [grid.step for grid in schedule.grids]
    report = AssumptionReport(
        p=p,
        steps=steps,
        z_norms=list(z_norms / n),
        y_norms=list(y_norms / n),
        z_discrepancy=list(z_disc / n),
        y_discrepancy=list(y_disc / n),
        instances=n,
    )
    if levels >= 3:
        report.r = fit_decay_exponent(steps[1:], report.z_discrepancy)
        report.nu = fit_decay_exponent(steps[1:], report.y_discrepancy)
    return report


def grid_error_condition(references: Sequence[float], level_values: Sequence[float]) -> bool:
    """|f*_l - f_l| < |f*_l - f*_{l-1}| on every level but the coarsest."""
    if len(references) != len(level_values):
        raise OracleError("references and level values differ in length")
    return all(
        abs(references[l] - level_values[l]) < abs(references[l] - references[l - 1])
        for l in range(1, len(references))
    )


def default_candidates(algo: str) -> list[float]:
    """Descending tolerance grids used for the finest-level search."""
    if algo == "ml-cp":
        return [1e-6 * 2.0 ** k for k in range(0, -11, -1)]
    if algo == "ml-pdhg":
        return [1e-4 * 2.0 ** k for k in range(5, -11, -1)]
    raise OracleError(f"No candidate grid for {algo!r}")


def reference_values(sources: Sequence[ScalarField], p, tolerance: float = 1e-10,
                     max_iters: int = 500_000) -> list[float]:
    """Tight single-level solves f(m*_{h_l}) per level."""
    params = SolverParams(p=p, tolerance=tolerance, max_iters=max_iters, record_history=False)
    return [pdhg_run(rho, p, params).distance for rho in sources]


@dataclass
class ToleranceSearch:
    tolerance: float
    iterations: list[int] = field(default_factory=list)
    level_values: list[float] = field(default_factory=list)
    references: list[float] = field(default_factory=list)


def search_tolerance(sources: Sequence[ScalarField], p, alpha: float,
                     candidates: Optional[Sequence[float]] = None, algo: str = "ml-pdhg",
                     references: Optional[Sequence[float]] = None,
                     params: Optional[SolverParams] = None) -> ToleranceSearch:
    """Largest candidate eps_L whose cascade meets the grid-error condition."""
    if candidates is None:
        candidates = default_candidates(algo)
    candidates = sorted(candidates, reverse=True)
    if not candidates:
        raise OracleError("Empty tolerance candidate set")
    if references is None:
        references = reference_values(sources, p)
    references = list(references)
    if params is None:
        # the candidate eps_L alone has to decide where the cascade stops
        params = SolverParams(gap_tolerance=None, record_history=False)

    finest = sources[-1].grid.cells_per_side
    inner = algo.lower().removeprefix("ml-")
    for eps in candidates:
        schedule = make_schedule(finest, len(sources), eps, alpha=alpha)
        report = ml_run(sources, p, schedule, inner, params)
        values = [level.distance for level in report.levels]
        if grid_error_condition(references, values):
            logger.info("eps_L=%.3e satisfies the grid-error condition (alpha=%g)", eps, alpha)
            return ToleranceSearch(
                tolerance=eps,
                iterations=[level.iterations for level in report.levels],
                level_values=values,
                references=references,
            )
        logger.debug("eps_L=%.3e rejected", eps)
    raise OracleError(f"No candidate tolerance satisfies the grid-error condition (alpha={alpha})")


def find_best_tolerance(sources: Sequence[ScalarField], p, alpha: float,
                        candidates: Optional[Sequence[float]] = None, algo: str = "ml-pdhg",
                        references: Optional[Sequence[float]] = None) -> float:
    return search_tolerance(sources, p, alpha, candidates, algo, references).tolerance
