import logging

import numpy as np
import pytest

from w1mg.grid import FluxField, GridError, GridSpec, ScalarField, norm_L2
from w1mg.multilevel import (
    ScheduleError,
    default_levels,
    default_tolerance,
    feasible_levels,
    interpolate_flux,
    interpolate_scalar,
    interpolate_state,
    make_schedule,
    ml_run,
)
from w1mg.prox import PNorm
from w1mg.solvers import CPState, PDHGState, SolverParams

from conftest import random_flux, random_scalar


def test_interpolate_scalar_by_hand():
    coarse = ScalarField(GridSpec(1), np.array([[0.0, 2.0], [1.0, 3.0]]))
    fine = interpolate_scalar(coarse, GridSpec(2))
    np.testing.assert_array_equal(fine.values, [
        [0.0, 1.0, 2.0],
        [0.5, 1.5, 2.5],
        [1.0, 2.0, 3.0],
    ])
    assert norm_L2(fine) ** 2 == pytest.approx(6.9375)
    assert norm_L2(coarse) ** 2 == pytest.approx(14.0)


def test_interpolate_flux_by_hand():
    coarse = FluxField.zeros(GridSpec(1))
    coarse.x_edges[0, 0] = 3.0
    fine = interpolate_flux(coarse, GridSpec(2))
    np.testing.assert_array_equal(fine.x_edges, [[3.0, 3.0], [1.5, 1.5], [0.0, 0.0]])
    assert not np.any(fine.y_edges)


def test_interpolation_preserves_constants():
    fine = GridSpec(8)
    scalar = interpolate_scalar(ScalarField.constant(GridSpec(4), 2.5), fine)
    np.testing.assert_array_equal(scalar.values, 2.5)

    grid = GridSpec(4)
    flux = FluxField(grid, np.full(grid.x_edge_shape, -1.0), np.full(grid.y_edge_shape, 4.0))
    out = interpolate_flux(flux, fine)
    np.testing.assert_array_equal(out.x_edges, -1.0)
    np.testing.assert_array_equal(out.y_edges, 4.0)


def test_interpolation_is_nonexpansive(rng):
    for n in (1, 2, 4, 8):
        fine = GridSpec(2 * n)
        for _ in range(50):
            phi = random_scalar(rng, n)
            assert norm_L2(interpolate_scalar(phi, fine)) <= norm_L2(phi) * (1 + 1e-12)
            m = random_flux(rng, n)
            assert norm_L2(interpolate_flux(m, fine)) <= norm_L2(m) * (1 + 1e-12)


def test_interpolation_is_linear(rng):
    fine = GridSpec(8)
    a, b = random_scalar(rng, 4), random_scalar(rng, 4)
    lhs = interpolate_scalar(2.0 * a - b, fine)
    rhs = 2.0 * interpolate_scalar(a, fine) - interpolate_scalar(b, fine)
    np.testing.assert_allclose(lhs.values, rhs.values, atol=1e-12)

    u, v = random_flux(rng, 4), random_flux(rng, 4)
    lhs = interpolate_flux(u + 3.0 * v, fine)
    rhs = interpolate_flux(u, fine) + 3.0 * interpolate_flux(v, fine)
    np.testing.assert_allclose(lhs.x_edges, rhs.x_edges, atol=1e-12)
    np.testing.assert_allclose(lhs.y_edges, rhs.y_edges, atol=1e-12)


def test_interpolation_requires_nested_grids():
    with pytest.raises(GridError):
        interpolate_scalar(ScalarField.zeros(GridSpec(4)), GridSpec(6))
    with pytest.raises(GridError):
        interpolate_flux(FluxField.zeros(GridSpec(4)), GridSpec(4))


def test_interpolate_state_by_solver_kind():
    coarse, fine = GridSpec(2), GridSpec(4)
    primal, dual = interpolate_state(CPState.start(coarse, 0.1, 0.1), fine)
    assert isinstance(dual, ScalarField) and dual.grid == fine
    primal, dual = interpolate_state(PDHGState.start(coarse, 1.0, 1.0), fine)
    assert isinstance(dual, FluxField) and primal.grid == fine
    with pytest.raises(TypeError):
        interpolate_state(object(), fine)


def test_default_schedule_at_512():
    schedule = make_schedule(512, algo="ml-cp")
    assert schedule.levels == 6
    assert [grid.cells_per_side for grid in schedule.grids] == [16, 32, 64, 128, 256, 512]
    assert schedule.tolerances[-1] == pytest.approx(1e-6 / 128)


def test_schedule_tolerances():
    flat = make_schedule(64, 4, 1e-5, alpha=0.0)
    assert set(flat.tolerances) == {1e-5}

    schedule = make_schedule(64, 3, 1e-5, alpha=-1.0)
    assert schedule.tolerances == pytest.approx((1e-5 / 4, 1e-5 / 2, 1e-5))
    assert schedule.finest == GridSpec(64)
    assert list(schedule) == list(zip(schedule.grids, schedule.tolerances))


def test_schedule_errors():
    with pytest.raises(ScheduleError):
        make_schedule(24, 5, 1e-6)
    with pytest.raises(ScheduleError):
        make_schedule(64, 0, 1e-6)
    with pytest.raises(ScheduleError):
        make_schedule(64, 2, 0.0)


def test_default_levels():
    assert default_levels(512) == 6
    assert default_levels(64) == 3
    assert default_levels(8) == 1
    assert default_levels(3) == 1


def test_feasible_levels_warns_when_reducing(caplog):
    assert feasible_levels(64, 4) == 4
    with caplog.at_level(logging.WARNING, logger="w1mg.multilevel"):
        assert feasible_levels(24, 6) == 4
    assert "using 4 level(s)" in caplog.text
    with pytest.raises(ScheduleError):
        feasible_levels(24, 0)


def test_default_tolerances():
    h = 1 / 512
    assert default_tolerance("cp", h) == pytest.approx(1e-6 / 512)
    assert default_tolerance("ml-cp", h) == pytest.approx(1e-6 / 128)
    assert default_tolerance("pdhg", h) == pytest.approx(1e-4 / 16)
    assert default_tolerance("ml-pdhg", h) == pytest.approx(1e-4 / 32)
    assert default_tolerance("ml-cp", 1 / 256) == pytest.approx(4e-6 / 128)
    assert default_tolerance("pdhg", 1 / 8) == 2e-4
    with pytest.raises(ScheduleError):
        default_tolerance("newton", h)


@pytest.mark.parametrize("inner", ["cp", "pdhg"])
def test_ml_run_on_identical_densities(inner):
    schedule = make_schedule(16, 3, 1e-8)
    sources = [ScalarField.zeros(grid) for grid in schedule.grids]
    report = ml_run(sources, PNorm.ONE, schedule, inner)
    assert report.distance == 0.0
    assert report.algo == f"ml-{inner}"
    assert [level.cells_per_side for level in report.levels] == [4, 8, 16]
    assert all(level.iterations <= 2 for level in report.levels)


def test_ml_run_checks_sources():
    schedule = make_schedule(16, 2, 1e-8)
    with pytest.raises(ScheduleError):
        ml_run([ScalarField.zeros(GridSpec(16))], PNorm.ONE, schedule)
    with pytest.raises(GridError):
        ml_run([ScalarField.zeros(GridSpec(4)), ScalarField.zeros(GridSpec(16))], PNorm.ONE, schedule)


def test_ml_run_dirac_pair():
    from w1mg.images import level_sources, synth_instance

    a, b = synth_instance("dirac_pair", 16)
    schedule = make_schedule(16, 2, 1e-9, alpha=-1.0)
    report = ml_run(level_sources(a, b, schedule.grids), PNorm.ONE, schedule, "pdhg",
                    SolverParams(max_iters=200_000))
    assert report.distance == pytest.approx(1.0, abs=1e-3)
    assert len(report.levels) == 2
    assert report.iterations == report.levels[-1].iterations
    assert len(report.residual_history) == sum(level.iterations for level in report.levels)


def test_ml_run_certifies_only_the_finest_level():
    from w1mg.images import level_sources, synth_instance

    a, b = synth_instance("two_blobs", 16, seed=3)
    schedule = make_schedule(16, 3, 1e-6)
    report = ml_run(level_sources(a, b, schedule.grids), PNorm.ONE, schedule, "pdhg",
                    SolverParams(max_iters=500_000))
    assert report.converged
    assert [level.gap is None for level in report.levels] == [True, True, False]
    assert report.levels[-1].gap <= SolverParams().gap_tolerance
