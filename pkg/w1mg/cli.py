"""Click-based CLI for w1mg."""

import logging
import sys
from pathlib import Path

import click

from . import __version__

EXIT_USAGE = 1
EXIT_INPUT = 2
EXIT_NUMERICAL = 3

ALGOS = ["cp", "pdhg", "ml-cp", "ml-pdhg"]
P_CHOICES = ["1", "2", "inf"]
KINDS = ["two_blobs", "annulus_pair", "dirac_pair"]


def _fail(message: str, code: int):
    click.echo(f"Error: {message}", err=True)
    raise SystemExit(code)


def _load_config(ctx: click.Context):
    from .config import resolve_config, ConfigError

    try:
        return resolve_config(ctx.obj.get("config_path"))
    except ConfigError as e:
        _fail(str(e), EXIT_INPUT)


def _auto_int(value):
    if value is None or value == "auto":
        return None
    try:
        number = int(value)
    except ValueError:
        raise click.BadParameter(f"expected an integer or 'auto', got {value!r}")
    if number < 1:
        raise click.BadParameter(f"must be at least 1, got {number}")
    return number


def _auto_float(value):
    if value is None or value == "auto":
        return None
    try:
        number = float(value)
    except ValueError:
        raise click.BadParameter(f"expected a number or 'auto', got {value!r}")
    if not number > 0:
        raise click.BadParameter(f"must be positive, got {number}")
    return number


def _gap_or_off(value):
    if value is None or value == "off":
        return value
    return _auto_float(value)


def _split(value: str, kind, name: str) -> list:
    try:
        return [kind(item) for item in value.split(",") if item.strip()]
    except ValueError:
        raise click.BadParameter(f"{name} must be a comma-separated list, got {value!r}")


def _load_pair(a_path: Path, b_path: Path):
    from .images import load_image, InputFormatError

    try:
        return load_image(a_path), load_image(b_path)
    except InputFormatError as e:
        _fail(str(e), EXIT_INPUT)


@click.group()
@click.version_option(version=__version__, prog_name="w1mg")
@click.option("--config", "config_path", type=click.Path(path_type=Path), default=None,
              help="YAML config file (default: ./w1mg.yaml if present)")
@click.option("-v", "--verbose", count=True, help="Log progress (-v) or every iteration (-vv)")
@click.pass_context
def main(ctx: click.Context, config_path, verbose: int):
    """Wasserstein-1 distances on 2D grids with multilevel primal-dual solvers."""
    level = {0: logging.WARNING, 1: logging.INFO}.get(verbose, logging.DEBUG)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    logging.getLogger("w1mg").setLevel(level)
    ctx.ensure_object(dict)
    ctx.obj["config_path"] = config_path


@main.command()
@click.option("--force", is_flag=True, help="Overwrite existing configuration")
@click.option("--path", "config_path", type=click.Path(path_type=Path), default=Path("w1mg.yaml"),
              show_default=True)
def init(force: bool, config_path: Path):
    """Write a commented default configuration file."""
    from .config import create_default_config

    if config_path.exists() and not force:
        click.echo(f"{config_path} already exists. Use --force to overwrite.")
        raise SystemExit(EXIT_USAGE)

    create_default_config(config_path)
    click.echo(f"✓ Created {config_path}")


@main.command()
@click.option("--a", "a_path", required=True, type=click.Path(path_type=Path), help="Source density (.pgm, .png or .csv)")
@click.option("--b", "b_path", required=True, type=click.Path(path_type=Path), help="Target density (.pgm, .png or .csv)")
@click.option("--p", type=click.Choice(P_CHOICES), default=None, help="Ground metric exponent")
@click.option("--algo", type=click.Choice(ALGOS), default=None)
@click.option("--levels", default=None, help="Level count or 'auto'")
@click.option("--alpha", type=float, default=None, help="Tolerance schedule exponent")
@click.option("--tol", default=None, help="Finest-level tolerance or 'auto'")
@click.option("--gap", default=None, help="Certified relative gap on the finest level, or 'off'")
@click.option("--max-iters", type=click.IntRange(min=1), default=None)
@click.option("--safe-steps/--practical-steps", default=None, help="Step-size rule")
@click.option("--cells", type=click.IntRange(min=1), default=None, help="Cells per side (default from image size)")
@click.option("--out", type=click.Path(path_type=Path), default=None, help="JSON report path (default: stdout)")
@click.option("--export-flux", type=click.Path(path_type=Path), default=None)
@click.option("--export-potential", type=click.Path(path_type=Path), default=None)
@click.option("--export-quiver", type=click.Path(path_type=Path), default=None)
@click.pass_context
def solve(ctx, a_path, b_path, p, algo, levels, alpha, tol, gap, max_iters, safe_steps, cells,
          out, export_flux, export_potential, export_quiver):
    """Compute the distance, optimal flux and potential between two densities."""
    import json

    from .export import report_to_dict, save_report, write_flux_csv, write_quiver_csv, write_scalar_csv
    from .grid import GridError
    from .images import InputFormatError
    from .pipeline import SolveRequest, solve_images

    config = _load_config(ctx)
    request = SolveRequest.from_config(
        config,
        p=p,
        algo=algo,
        levels=_auto_int(levels),
        alpha=alpha,
        tol=_auto_float(tol),
        gap=_gap_or_off(gap),
        max_iters=max_iters,
        safe_steps=safe_steps,
        cells=cells,
    )
    image0, image1 = _load_pair(a_path, b_path)

    click.echo(f"→ {request.algo} with p={request.p}", err=True)
    try:
        report = solve_images(image0, image1, request)
    except (InputFormatError, GridError) as e:
        _fail(str(e), EXIT_INPUT)

    digits = config.output.digits
    if out:
        save_report(report, out, indent=config.output.json_indent)
        click.echo(f"✓ Wrote {out}", err=True)
    else:
        click.echo(json.dumps(report_to_dict(report), indent=config.output.json_indent))
    if export_flux:
        write_flux_csv(report.flux, export_flux, digits)
    if export_potential:
        write_scalar_csv(report.potential, export_potential, digits)
    if export_quiver:
        write_quiver_csv(report.flux, export_quiver, digits)

    if not report.converged:
        click.echo("✗ Stopped at max-iters before reaching the tolerance", err=True)
        raise SystemExit(EXIT_NUMERICAL)
    click.echo(f"✓ distance = {report.distance:.10g} ({report.iterations} finest-level iterations)", err=True)


@main.command()
@click.option("--a", "a_path", required=True, type=click.Path(path_type=Path))
@click.option("--b", "b_path", required=True, type=click.Path(path_type=Path))
@click.option("--cells", type=click.IntRange(min=1), default=None)
@click.option("--one-dim", "one_d", is_flag=True, help="Inputs are 1D densities (CSV vectors)")
def oracle(a_path, b_path, cells, one_d):
    """Exact p=1 reference values for small inputs."""
    import numpy as np

    from .grid import GridError, GridSpec
    from .images import InputFormatError, default_cells, discretize, make_source, read_csv
    from .oracle import OracleError, min_cost_flow_p1, w1_1d_cdf, w1_exact_path

    if one_d:
        try:
            rho0, rho1 = (read_csv(path).ravel() for path in (a_path, b_path))
        except (InputFormatError, OSError) as e:
            _fail(str(e), EXIT_INPUT)
        if rho0.size != rho1.size or rho0.size < 2:
            _fail("1D densities need equal length of at least 2", EXIT_INPUT)
        step = 1.0 / (rho0.size - 1)
        if rho0.sum() <= 0 or rho1.sum() <= 0 or np.any(rho0 < 0) or np.any(rho1 < 0):
            _fail("1D densities must be nonnegative with positive mass", EXIT_INPUT)
        rho0 = rho0 / (rho0.sum() * step)
        rho1 = rho1 / (rho1.sum() * step)
        click.echo(f"w1_1d_cdf   = {w1_1d_cdf(rho0, rho1, step):.12g}")
        click.echo(f"w1_min_flow = {w1_exact_path(rho0, rho1, step):.12g}")
        return

    image0, image1 = _load_pair(a_path, b_path)
    grid = GridSpec(cells or default_cells(image0.width))
    try:
        rho = make_source(discretize(image0, grid), discretize(image1, grid))
        result = min_cost_flow_p1(rho)
    except (InputFormatError, GridError, OracleError) as e:
        _fail(str(e), EXIT_INPUT)
    click.echo(f"w1_exact_p1 = {result.value:.12g} (N={grid.cells_per_side}, "
               f"quantization bound {result.quantization_bound:.1e})")


@main.command()
@click.option("--kind", type=click.Choice(KINDS), default="two_blobs", show_default=True)
@click.option("--instances", type=click.IntRange(min=1), default=5, show_default=True)
@click.option("--cells", type=click.IntRange(min=4), default=64, show_default=True)
@click.option("--levels", type=click.IntRange(min=2), default=3, show_default=True)
@click.option("--p", type=click.Choice(P_CHOICES), default="1", show_default=True)
@click.option("--tol", type=float, default=1e-8, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(path_type=Path), default=None, help="CSV path (default: stdout)")
def validate(kind, instances, cells, levels, p, tol, seed, out):
    """Level-wise solution norms and interpolation errors, with fitted decay exponents."""
    from .export import write_rows_csv
    from .images import level_sources, synth_instance
    from .multilevel import ScheduleError, make_schedule
    from .oracle import validate_assumptions

    try:
        grids = make_schedule(cells, levels, tol).grids
    except ScheduleError as e:
        _fail(str(e), EXIT_USAGE)

    pairs = [synth_instance(kind, cells, seed + index) for index in range(instances)]
    click.echo(f"→ Validating {instances} instance(s) on {len(grids)} levels", err=True)
    report = validate_assumptions([level_sources(a, b, grids) for a, b in pairs], p, tol)

    rows = report.to_rows()
    if out:
        write_rows_csv(rows, out)
        click.echo(f"✓ Wrote {out}", err=True)
    else:
        _echo_rows(rows)
    click.echo(f"✓ r = {report.r:.3f}, nu = {report.nu:.3f}", err=True)


def _echo_rows(rows: list[dict]):
    if not rows:
        return
    click.echo(",".join(rows[0]))
    for row in rows:
        click.echo(",".join(str(value) for value in row.values()))


@main.command()
@click.option("--a", "a_path", type=click.Path(path_type=Path), default=None)
@click.option("--b", "b_path", type=click.Path(path_type=Path), default=None)
@click.option("--kind", type=click.Choice(KINDS), default="two_blobs", show_default=True,
              help="Synthetic pair used when --a/--b are not given")
@click.option("--cells", type=click.IntRange(min=4), default=None)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--p", type=click.Choice(P_CHOICES), default=None)
@click.option("--algos", default="ml-pdhg", show_default=True, help="Comma-separated algorithms")
@click.option("--levels", "levels_list", default=None, help="Comma-separated level counts")
@click.option("--alphas", default=None, help="Comma-separated alpha values")
@click.option("--search-tol", is_flag=True, help="Search the best finest-level tolerance instead")
@click.option("--threads", type=click.IntRange(min=1), default=None, help="Worker threads")
@click.option("--out", type=click.Path(path_type=Path), default=None, help="CSV path (default: stdout)")
@click.pass_context
def bench(ctx, a_path, b_path, kind, cells, seed, p, algos, levels_list, alphas, search_tol, threads, out):
    """Iteration and timing sweeps over algorithms, levels and alpha."""
    from .bench import bench_cases, run_bench, run_tolerance_search
    from .export import write_rows_csv
    from .images import default_cells, synth_instance
    from .multilevel import default_levels
    from .pipeline import SolveRequest

    config = _load_config(ctx)
    algo_list = _split(algos, str, "--algos")
    unknown = [algo for algo in algo_list if algo not in ALGOS]
    if unknown:
        raise click.BadParameter(f"unknown algorithm(s): {', '.join(unknown)}", param_hint="--algos")

    if (a_path is None) != (b_path is None):
        raise click.UsageError("--a and --b must be given together")
    if a_path is not None:
        image0, image1 = _load_pair(a_path, b_path)
    else:
        image0, image1 = synth_instance(kind, cells or 128, seed)
    n = cells or default_cells(image0.width)

    request = SolveRequest.from_config(config, p=p, cells=n)
    level_values = _split(levels_list, int, "--levels") if levels_list else [default_levels(n)]
    threads = threads or config.bench.threads

    if search_tol:
        alpha_values = _split(alphas, float, "--alphas") if alphas else [1.0, 0.0, -1.0, -5.0]
        click.echo(f"→ Tolerance search over {len(alpha_values)} alpha value(s)", err=True)
        rows = run_tolerance_search(image0, image1, [a for a in algo_list if a.startswith("ml-")],
                                    alpha_values, request, max(level_values), threads)
    else:
        alpha_values = _split(alphas, float, "--alphas") if alphas else [request.alpha]
        cases = bench_cases(algo_list, level_values, alpha_values)
        click.echo(f"→ Running {len(cases)} configuration(s) on {threads} thread(s)", err=True)
        rows = run_bench(image0, image1, cases, request, threads)

    if out:
        write_rows_csv(rows, out)
        click.echo(f"✓ Wrote {out}", err=True)
    else:
        _echo_rows(rows)


@main.command()
@click.option("--kind", type=click.Choice(KINDS), default="two_blobs", show_default=True)
@click.option("--cells", type=click.IntRange(min=4), default=64, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--separation", type=float, default=None, help="Blob centre distance (two_blobs)")
@click.option("--out-a", type=click.Path(path_type=Path), required=True, help=".csv, .pgm or .png")
@click.option("--out-b", type=click.Path(path_type=Path), required=True, help=".csv, .pgm or .png")
def gen(kind, cells, seed, separation, out_a, out_b):
    """Write a synthetic density pair with (N+1) x (N+1) pixels."""
    from .images import save_image, synth_instance

    image0, image1 = synth_instance(kind, cells, seed, separation=separation)
    try:
        save_image(image0, out_a)
        save_image(image1, out_b)
    except OSError as e:
        _fail(str(e), EXIT_INPUT)
    click.echo(f"✓ Created {out_a}")
    click.echo(f"✓ Created {out_b}")


def cli_main(argv: list[str] | None = None) -> int:
    """Run the CLI and return its exit code instead of exiting."""
    from .config import ConfigError
    from .images import InputFormatError

    try:
        main.main(args=argv, prog_name="w1mg", standalone_mode=False)
    except click.UsageError as e:
        e.show()
        return EXIT_USAGE
    except click.ClickException as e:
        e.show()
        return e.exit_code
    except click.Abort:
        click.echo("Aborted!", err=True)
        return EXIT_USAGE
    except (InputFormatError, ConfigError) as e:
        click.echo(f"Error: {e}", err=True)
        return EXIT_INPUT
    except SystemExit as e:
        if e.code is None:
            return 0
        return e.code if isinstance(e.code, int) else EXIT_USAGE
    return 0


def run():
    sys.exit(cli_main())


if __name__ == "__main__":
    run()
