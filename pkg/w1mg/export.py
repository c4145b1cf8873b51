"""Result files: the JSON solve report and CSV field dumps."""

import csv
import json
from pathlib import Path

import numpy as np

from .grid import FluxField, GridSpec, ScalarField
from .images import InputFormatError
from .prox import PNorm
from .solvers import SolveReport

X_EDGES_MARKER = "#x_edges"
Y_EDGES_MARKER = "#y_edges"


def _p_to_json(p: PNorm):
    return "inf" if p is PNorm.INF else int(p.exponent)


def report_to_dict(report: SolveReport) -> dict:
    return {
        "distance": report.distance,
        "dual_value": report.dual_value,
        "p": _p_to_json(report.p),
        "algo": report.algo,
        "cells_per_side": report.grid.cells_per_side,
        "levels": [
            {
                "h": level.step,
                "eps": level.tolerance,
                "iters": level.iterations,
                "fpr_final": level.fpr_final,
                "gap": level.gap,
                "seconds": level.seconds,
                "distance": level.distance,
                "converged": level.converged,
            }
            for level in report.levels
        ],
        "total_seconds": report.total_seconds,
        "converged": report.converged,
        "dual_infeasibility": report.dual_infeasibility,
    }


def save_report(report: SolveReport, path: Path, indent: int = 2):
    with open(path, "w") as f:
        json.dump(report_to_dict(report), f, indent=indent)
        f.write("\n")


def load_report(path: Path) -> dict:
    with open(path) as f:
        return json.load(f)


def _fmt(digits: int):
    return lambda value: format(float(value), f".{digits}g")


def write_scalar_csv(field: ScalarField, path: Path, digits: int = 17):
    """Header row ``scalar,N`` then one row per x2, x1 fastest."""
    fmt = _fmt(digits)
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["scalar", field.grid.cells_per_side])
        writer.writerows([fmt(v) for v in row] for row in field.values)


def write_flux_csv(flux: FluxField, path: Path, digits: int = 17):
    """Header row ``flux,N`` then the x-edge block and the y-edge block."""
    fmt = _fmt(digits)
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["flux", flux.grid.cells_per_side])
        writer.writerow([X_EDGES_MARKER])
        writer.writerows([fmt(v) for v in row] for row in flux.x_edges)
        writer.writerow([Y_EDGES_MARKER])
        writer.writerows([fmt(v) for v in row] for row in flux.y_edges)


def write_quiver_csv(flux: FluxField, path: Path, digits: int = 17):
    """One ``x,y,u,v`` row per node, boundary components that do not exist as 0."""
    fmt = _fmt(digits)
    x1, x2 = flux.grid.coordinates()
    vectors = flux.to_nodes()
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["x", "y", "u", "v"])
        for x, y, (u, v) in zip(x1.ravel(), x2.ravel(), vectors.reshape(-1, 2)):
            writer.writerow([fmt(x), fmt(y), fmt(u), fmt(v)])


def _read_rows(path: Path) -> list[list[str]]:
    with open(path, newline="") as f:
        return [row for row in csv.reader(f) if row]


def _header(rows: list[list[str]], kind: str, path: Path) -> GridSpec:
    if not rows or len(rows[0]) != 2 or rows[0][0] != kind:
        raise InputFormatError(f"{path}: expected a '{kind},N' header")
    try:
        return GridSpec(int(rows[0][1]))
    except ValueError as e:
        raise InputFormatError(f"{path}: bad cell count: {e}")


def _block(rows: list[list[str]], path: Path) -> np.ndarray:
    try:
        return np.array([[float(v) for v in row] for row in rows])
    except ValueError as e:
        raise InputFormatError(f"{path}: {e}")


def read_scalar_csv(path: Path) -> ScalarField:
    rows = _read_rows(path)
    grid = _header(rows, "scalar", path)
    return ScalarField(grid, _block(rows[1:], path))


def read_flux_csv(path: Path) -> FluxField:
    rows = _read_rows(path)
    grid = _header(rows, "flux", path)
    markers = [index for index, row in enumerate(rows) if row[0] in (X_EDGES_MARKER, Y_EDGES_MARKER)]
    if [rows[index][0] for index in markers] != [X_EDGES_MARKER, Y_EDGES_MARKER]:
        raise InputFormatError(f"{path}: expected {X_EDGES_MARKER} and {Y_EDGES_MARKER} blocks")
    x_start, y_start = markers
    x_edges = _block(rows[x_start + 1:y_start], path)
    y_edges = _block(rows[y_start + 1:], path)
    return FluxField(grid, x_edges, y_edges)


def write_rows_csv(rows: list[dict], path: Path):
    """Table output for the validate and bench commands."""
    if not rows:
        Path(path).write_text("")
        return
    with open(path, "w", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=list(rows[0]))
        writer.writeheader()
        writer.writerows(rows)
