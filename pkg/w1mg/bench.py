"""Iteration and timing sweeps over algorithms, level counts and alpha."""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Sequence

from .images import DensityImage, default_cells, level_sources
from .multilevel import feasible_levels, make_schedule
from .oracle import OracleError, reference_values, search_tolerance
from .pipeline import SolveRequest, solve_images

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class BenchCase:
    algo: str
    levels: int
    alpha: float

    @property
    def key(self) -> tuple:
        return (self.algo, self.levels, self.alpha)


def bench_cases(algos: Sequence[str], levels: Sequence[int], alphas: Sequence[float]) -> list[BenchCase]:
    """Cross product; single-level algorithms ignore levels and alpha."""
    cases = set()
    for algo in algos:
        if algo.startswith("ml-"):
            cases.update(BenchCase(algo, l, a) for l in levels for a in alphas)
        else:
            cases.add(BenchCase(algo, 1, 0.0))
    return sorted(cases, key=lambda case: case.key)


def _run_case(case: BenchCase, image0: DensityImage, image1: DensityImage, request: SolveRequest) -> dict:
    report = solve_images(image0, image1, replace(request, algo=case.algo, levels=case.levels, alpha=case.alpha))
    return {
        "algo": case.algo,
        "levels": len(report.levels),
        "alpha": case.alpha,
        "N": report.grid.cells_per_side,
        "eps_L": report.levels[-1].tolerance,
        "iters_finest": report.iterations,
        "iters_per_level": ";".join(str(level.iterations) for level in report.levels),
        "distance": report.distance,
        "converged": report.converged,
        "seconds": round(report.total_seconds, 6),
    }


def run_bench(image0: DensityImage, image1: DensityImage, cases: Sequence[BenchCase],
              request: SolveRequest, threads: int = 1) -> list[dict]:
    """Run every case; rows come back ordered by (algo, levels, alpha) whatever the thread count."""
    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        futures = {case.key: pool.submit(_run_case, case, image0, image1, request) for case in cases}
        rows = {key: future.result() for key, future in futures.items()}
    for key in sorted(rows):
        logger.info("%s L=%d alpha=%g: %s iterations", key[0], key[1], key[2], rows[key]["iters_per_level"])
    return [rows[key] for key in sorted(rows)]


def run_tolerance_search(image0: DensityImage, image1: DensityImage, algos: Sequence[str],
                         alphas: Sequence[float], request: SolveRequest, levels: int,
                         threads: int = 1) -> list[dict]:
    """Best eps_L per (algo, alpha) with the per-level iteration counts it costs."""
    cells = request.cells or default_cells(image0.width)
    levels = feasible_levels(cells, levels)
    grids = make_schedule(cells, levels, 1.0).grids
    sources = level_sources(image0, image1, grids)
    references = reference_values(sources, request.p)

    def search(algo: str, alpha: float) -> dict:
        row = {"algo": algo, "alpha": alpha, "N": cells, "levels": levels}
        try:
            found = search_tolerance(sources, request.p, alpha, algo=algo, references=references,
                                     params=request.params(1.0))
        except OracleError as e:
            logger.warning("%s alpha=%g: %s", algo, alpha, e)
            return {**row, "eps_best": "", "iters_per_level": ""}
        return {
            **row,
            "eps_best": found.tolerance,
            "iters_per_level": ";".join(str(k) for k in found.iterations),
        }

    keys = sorted({(algo, float(alpha)) for algo in algos for alpha in alphas})
    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        futures = {key: pool.submit(search, *key) for key in keys}
        return [futures[key].result() for key in keys]
