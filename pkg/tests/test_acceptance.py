"""Larger end-to-end checks; run with ``pytest -m slow``."""

import time

import numpy as np
import pytest

from w1mg.grid import GridSpec, SourceField, norm_L2
from w1mg.images import level_sources, synth_instance
from w1mg.multilevel import interpolate_flux, interpolate_scalar
from w1mg.oracle import min_cost_flow_p1, reference_values, validate_assumptions, w1_1d_cdf
from w1mg.pipeline import SolveRequest, solve_images
from w1mg.prox import PNorm
from w1mg.solvers import CPSolver, SolverParams, StepMode, cp_run, pdhg_run

from conftest import dirac_source, random_flux, random_scalar, random_source

pytestmark = pytest.mark.slow


@pytest.mark.parametrize("run", [cp_run, pdhg_run])
def test_solvers_match_min_cost_flow(rng, run):
    params = SolverParams(tolerance=1e-9, max_iters=500_000, record_history=False)
    for _ in range(20):
        rho = random_source(rng, 8)
        exact = min_cost_flow_p1(rho)
        report = run(rho, PNorm.ONE, params)
        assert abs(report.distance - exact.value) <= 1e-4 * exact.value + exact.quantization_bound


@pytest.mark.parametrize("p", list(PNorm))
@pytest.mark.parametrize("algo", ["cp", "pdhg", "ml-cp", "ml-pdhg"])
def test_dirac_corners_for_every_metric(p, algo):
    a, b = synth_instance("dirac_pair", 32)
    request = SolveRequest(p=p, algo=algo, levels=2, tol=1e-9, max_iters=500_000)
    report = solve_images(a, b, request)
    assert report.distance == pytest.approx(1.0, abs=1e-3)


def test_ml_pdhg_saves_finest_level_iterations():
    a, b = synth_instance("two_blobs", 128, seed=0)
    single = solve_images(a, b, SolveRequest(algo="pdhg", tol=1e-7, gap="off", max_iters=500_000))
    multi = solve_images(a, b, SolveRequest(algo="ml-pdhg", levels=4, tol=1e-7, gap="off", max_iters=500_000))
    assert single.converged and multi.converged
    assert multi.iterations * 10 <= single.iterations


def test_ml_cp_saves_finest_level_iterations():
    a, b = synth_instance("two_blobs", 128, seed=0)
    single = solve_images(a, b, SolveRequest(algo="cp", tol=1.25e-7, gap="off", max_iters=500_000))
    multi = solve_images(a, b, SolveRequest(algo="ml-cp", levels=4, tol=1.25e-7, gap="off", max_iters=500_000))
    assert single.converged and multi.converged
    assert multi.iterations * 20 <= single.iterations


def test_safe_step_residuals_on_random_instances(rng):
    for _ in range(10):
        rho = random_source(rng, 16)
        params = SolverParams(tolerance=1e-300, max_iters=500, step_mode=StepMode.SAFE)
        history = np.asarray(CPSolver(params).run(rho).residual_history)
        scale = 1e-10 * history[0]
        assert np.all(history >= -scale)
        assert np.all(np.diff(history) <= scale)


def test_interpolation_nonexpansive_on_many_fields(rng):
    fine = GridSpec(16)
    for _ in range(1000):
        phi = random_scalar(rng, 8)
        m = random_flux(rng, 8)
        assert norm_L2(interpolate_scalar(phi, fine)) <= norm_L2(phi) * (1 + 1e-12)
        assert norm_L2(interpolate_flux(m, fine)) <= norm_L2(m) * (1 + 1e-12)


def test_dirac_potential_is_dual_feasible():
    report = pdhg_run(dirac_source(16), PNorm.ONE, SolverParams(tolerance=1e-10, max_iters=500_000))
    assert report.dual_infeasibility <= 1 + 1e-2


@pytest.mark.parametrize("cells,algos", [
    (64, ["cp", "pdhg", "ml-cp", "ml-pdhg"]),
    (128, ["pdhg", "ml-cp", "ml-pdhg"]),
])
def test_default_tolerances_stay_within_grid_error(cells, algos):
    a, b = synth_instance("two_blobs", cells, seed=0)
    coarse_ref, fine_ref = reference_values(
        level_sources(a, b, [GridSpec(cells // 2), GridSpec(cells)]), PNorm.ONE
    )
    grid_error = abs(coarse_ref - fine_ref)
    for algo in algos:
        report = solve_images(a, b, SolveRequest(algo=algo, max_iters=500_000))
        assert report.converged, algo
        assert abs(report.distance - fine_ref) <= 1.5 * grid_error, algo


@pytest.mark.parametrize("p", list(PNorm))
def test_cp_reduces_to_1d_on_column_constant_densities(rng, p):
    grid = GridSpec(16)
    rho0 = rng.uniform(0.0, 1.0, size=grid.nodes_per_side)
    rho1 = rng.permutation(rho0)
    values = np.tile(rho0 - rho1, (grid.nodes_per_side, 1))
    rho = SourceField(grid, values - values.mean())
    scale = grid.nodes_per_side * grid.step
    expected = w1_1d_cdf(rho0 * scale, rho1 * scale, grid.step)
    report = cp_run(rho, p, SolverParams(tolerance=1e-9, max_iters=500_000, record_history=False))
    assert report.converged
    assert report.distance == pytest.approx(expected, rel=1e-3, abs=1e-6)


def test_assumption_exponents_on_smooth_pairs():
    grids = [GridSpec(n) for n in (16, 32, 64, 128)]
    instances = [level_sources(*synth_instance("two_blobs", 128, seed=seed), grids) for seed in range(5)]
    report = validate_assumptions(instances, PNorm.ONE)
    assert 1.5 <= report.r <= 2.5
    assert 0.6 <= report.nu <= 1.4
    for norms in (report.z_norms, report.y_norms):
        assert max(norms) <= 1.5 * min(norms)


def test_ml_pdhg_at_256_with_defaults_is_fast():
    a, b = synth_instance("two_blobs", 256, seed=0)
    started = time.perf_counter()
    report = solve_images(a, b, SolveRequest(algo="ml-pdhg"))
    elapsed = time.perf_counter() - started
    assert report.converged
    assert elapsed <= 5.0
