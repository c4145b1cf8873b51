import math

import numpy as np
import pytest

from w1mg.grid import GridSpec, ScalarField, SourceField
from w1mg.images import level_sources, synth_instance
from w1mg.oracle import (
    FLOW_SCALE,
    OracleError,
    default_candidates,
    find_best_tolerance,
    fit_decay_exponent,
    grid_error_condition,
    min_cost_flow_p1,
    search_tolerance,
    validate_assumptions,
    w1_1d_cdf,
    w1_exact_p1,
    w1_exact_path,
    w1_linprog_p1,
)
from w1mg.prox import PNorm
from w1mg.solvers import SolverParams, pdhg_run

from conftest import dirac_source


def dyadic_source(rng, n: int, denominator: int = 64) -> SourceField:
    """Zero-sum source whose node masses rho * h^2 are exact multiples of 1/denominator."""
    grid = GridSpec(n)
    counts = rng.integers(-20, 21, size=grid.node_shape)
    counts[0, 0] -= counts.sum()
    return SourceField(grid, counts / denominator / grid.weight)


@pytest.mark.parametrize("n", [1, 4, 8, 16])
def test_dirac_pair_costs_one(n):
    result = min_cost_flow_p1(dirac_source(n))
    assert result.value == pytest.approx(1.0, abs=1e-15)
    assert result.quantization_bound == 0.0
    assert result.augmentations == 1


def test_zero_source_costs_nothing():
    assert w1_exact_p1(ScalarField.zeros(GridSpec(4))) == 0.0


def test_diagonal_move_costs_l1_length():
    grid = GridSpec(4)
    values = np.zeros(grid.node_shape)
    values[0, 0] = 1.0 / grid.weight
    values[-1, -1] = -1.0 / grid.weight
    assert w1_exact_p1(SourceField(grid, values)) == pytest.approx(2.0)


def test_oracle_matches_linear_program(rng):
    for n in (2, 3, 4):
        for _ in range(3):
            rho = dyadic_source(rng, n)
            exact = w1_exact_p1(rho)
            assert exact > 0
            assert w1_linprog_p1(rho) == pytest.approx(exact, rel=1e-8)


def test_quantization_bound_covers_rounding(rng):
    grid = GridSpec(4)
    values = rng.standard_normal(grid.node_shape)
    rho = SourceField(grid, values - values.mean())
    result = min_cost_flow_p1(rho)
    assert 0 < result.quantization_bound <= grid.nodes_per_side ** 2 / FLOW_SCALE
    assert abs(result.value - w1_linprog_p1(rho)) <= result.quantization_bound + 1e-9


def test_oracle_rejects_large_grids():
    with pytest.raises(OracleError):
        w1_exact_p1(ScalarField.zeros(GridSpec(32)))


def test_1d_closed_form():
    n = 17
    step = 1 / (n - 1)
    a = np.zeros(n)
    b = np.zeros(n)
    a[0] = b[-1] = 1 / step
    assert w1_1d_cdf(a, b, step) == pytest.approx(1.0)
    assert w1_1d_cdf(a, a, step) == 0.0


def test_1d_closed_form_matches_path_flow(rng):
    step = 1 / 16
    for _ in range(5):
        counts = rng.integers(0, 50, size=16)
        rho0 = counts / 1024 / step
        rho1 = rng.permutation(counts) / 1024 / step
        assert w1_exact_path(rho0, rho1, step) == pytest.approx(w1_1d_cdf(rho0, rho1, step), abs=1e-10)


@pytest.mark.parametrize("p", list(PNorm))
def test_column_constant_densities_reduce_to_1d(rng, p):
    grid = GridSpec(16)
    rho0 = rng.uniform(0.0, 1.0, size=grid.nodes_per_side)
    rho1 = rng.permutation(rho0)
    values = np.tile(rho0 - rho1, (grid.nodes_per_side, 1))
    rho = SourceField(grid, values - values.mean())
    # x2-marginals: sum over the rows of each column, times h
    marginal0 = rho0 * grid.nodes_per_side * grid.step
    marginal1 = rho1 * grid.nodes_per_side * grid.step
    expected = w1_1d_cdf(marginal0, marginal1, grid.step)
    report = pdhg_run(rho, p, SolverParams(tolerance=1e-9, max_iters=500_000, record_history=False))
    assert report.converged
    assert report.distance == pytest.approx(expected, rel=1e-3, abs=1e-6)


def test_1d_rejects_mismatch():
    with pytest.raises(OracleError):
        w1_1d_cdf(np.ones(4), np.full(4, 2.0), 0.25)
    with pytest.raises(OracleError):
        w1_1d_cdf(np.ones(4), np.ones(5), 0.25)


def test_fit_decay_exponent():
    steps = [1 / 32, 1 / 64, 1 / 128]
    assert fit_decay_exponent(steps, [1e-3, 2.5e-4, 6.25e-5]) == pytest.approx(2.0)
    with pytest.raises(OracleError):
        fit_decay_exponent([0.5], [1.0])
    with pytest.raises(OracleError):
        fit_decay_exponent([0.5, 0.25], [1.0, 0.0])


def test_grid_error_condition():
    references = [1.0, 1.2, 1.25]
    assert grid_error_condition(references, [0.0, 1.19, 1.249])
    assert not grid_error_condition(references, [0.0, 1.0, 1.249])
    with pytest.raises(OracleError):
        grid_error_condition(references, [1.0])


def test_default_candidates_descend():
    for algo in ("ml-cp", "ml-pdhg"):
        candidates = default_candidates(algo)
        assert candidates == sorted(candidates, reverse=True)
    with pytest.raises(OracleError):
        default_candidates("cp")


def _zero_sources(*sizes):
    return [ScalarField.zeros(GridSpec(n)) for n in sizes]


def test_tolerance_search_fails_without_grid_error():
    with pytest.raises(OracleError):
        find_best_tolerance(_zero_sources(4, 8), PNorm.ONE, -1.0, [1e-6, 1e-7], references=[0.0, 0.0])


def test_tolerance_search_single_passing_candidate():
    assert find_best_tolerance(_zero_sources(4, 8), PNorm.ONE, -1.0, [1e-6], references=[5.0, 0.0]) == 1e-6


def test_tolerance_search_takes_largest_passing():
    found = search_tolerance(_zero_sources(4, 8), PNorm.ONE, 0.0, [1e-8, 1e-4, 1e-6], references=[5.0, 0.0])
    assert found.tolerance == 1e-4
    assert found.level_values == [0.0, 0.0]
    assert len(found.iterations) == 2


def test_tolerance_search_rejects_empty_candidates():
    with pytest.raises(OracleError):
        find_best_tolerance(_zero_sources(4, 8), PNorm.ONE, -1.0, [], references=[5.0, 0.0])


def test_validate_assumptions_structure():
    a, b = synth_instance("two_blobs", 8, seed=3)
    sources = level_sources(a, b, [GridSpec(4), GridSpec(8)])
    report = validate_assumptions([sources], PNorm.TWO, tolerance=1e-6)
    assert report.steps == [0.25, 0.125]
    assert report.instances == 1
    assert len(report.z_discrepancy) == len(report.y_discrepancy) == 1
    assert all(value > 0 for value in report.z_norms + report.y_norms)
    assert math.isnan(report.r) and math.isnan(report.nu)
    rows = report.to_rows()
    assert [row["h"] for row in rows] == [0.25, 0.125]
    assert rows[0]["z_interp_err2"] == ""
    assert rows[1]["y_interp_err2"] == report.y_discrepancy[0]
    assert rows[0]["p"] == "2"


def test_validate_assumptions_needs_instances():
    with pytest.raises(OracleError):
        validate_assumptions([])
