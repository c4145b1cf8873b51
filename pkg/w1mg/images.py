"""Density images: reading, resampling onto grids, and synthetic instances.

Images use the usual orientation (row 0 at the top). An M x M image covers
[0,1]^2 with pixel centre c at c/(M-1), so its corner pixels sit on the
corner nodes of every grid.
"""

import logging
from dataclasses import dataclass
from pathlib import Path

import cv2
import numpy as np
from scipy.interpolate import RegularGridInterpolator

from .grid import GridSpec, ScalarField, SourceField

logger = logging.getLogger(__name__)

SYNTH_KINDS = ("two_blobs", "annulus_pair", "dirac_pair")


class InputFormatError(ValueError):
    """Raised when an input density cannot be read or used."""
    pass


@dataclass(frozen=True, eq=False)
class DensityImage:
    pixels: np.ndarray

    def __post_init__(self):
        pixels = np.asarray(self.pixels, dtype=float)
        if pixels.ndim != 2:
            raise InputFormatError(f"Density image must be 2D, got shape {pixels.shape}")
        if pixels.shape[0] != pixels.shape[1]:
            raise InputFormatError(f"Density image must be square, got {pixels.shape[1]}x{pixels.shape[0]}")
        if pixels.shape[0] < 2:
            raise InputFormatError("Density image needs at least 2x2 pixels")
        if not np.all(np.isfinite(pixels)) or np.any(pixels < 0):
            raise InputFormatError("Density image pixels must be finite and nonnegative")
        if not np.any(pixels > 0):
            raise InputFormatError("Density image has no positive pixel")
        object.__setattr__(self, "pixels", pixels)

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]


def default_cells(size: int) -> int:
    """Cells per side for an image of ``size`` pixels per side.

    N = M by default, except that an M = 2^k + 1 image gives N = M - 1 so its
    pixels land exactly on the nodes of a power-of-two grid.
    """
    if size & (size - 1) == 0:
        return size
    if (size - 1) & (size - 2) == 0:
        return size - 1
    return size


def discretize(image: DensityImage, grid: GridSpec) -> ScalarField:
    """Bilinear resampling onto the grid nodes, normalized to sum(rho h^2) = 1."""
    axis = np.linspace(0.0, 1.0, image.width)
    # flip so that row j of the lattice is x2 = j/(M-1)
    lattice = np.flipud(image.pixels)
    interpolator = RegularGridInterpolator((axis, axis), lattice, method="linear")
    x1, x2 = grid.coordinates()
    values = interpolator(np.stack([x2.ravel(), x1.ravel()], axis=-1)).reshape(grid.node_shape)
    values = np.maximum(values, 0.0)
    mass = float(np.sum(values)) * grid.weight
    if mass <= 0:
        raise InputFormatError(
            f"Image of {image.width} pixels has no mass on the N={grid.cells_per_side} grid"
        )
    return ScalarField(grid, values / mass)


def make_source(rho0: ScalarField, rho1: ScalarField) -> SourceField:
    """rho0 - rho1 with the residual mean removed so the total is exactly balanced."""
    if rho0.grid != rho1.grid:
        raise InputFormatError("Densities live on different grids")
    mismatch = abs(rho0.mass() - rho1.mass())
    if mismatch > 1e-9:
        raise InputFormatError(f"Density masses differ by {mismatch:.3e}")
    diff = rho0.values - rho1.values
    return SourceField(rho0.grid, diff - np.mean(diff))


def read_raster(path: Path) -> np.ndarray:
    """Grayscale pixels of a PGM (P2/P5) or PNG image scaled by the integer range to [0, 1]."""
    pixels = cv2.imread(str(path), cv2.IMREAD_GRAYSCALE | cv2.IMREAD_ANYDEPTH)
    if pixels is None:
        raise InputFormatError(f"{path}: not a readable PGM or PNG image")
    if np.issubdtype(pixels.dtype, np.integer):
        return pixels.astype(float) / np.iinfo(pixels.dtype).max
    return pixels.astype(float)


def read_csv(path: Path) -> np.ndarray:
    try:
        return np.loadtxt(path, delimiter=",", ndmin=2, comments="#")
    except ValueError as e:
        raise InputFormatError(f"{path}: {e}")


RASTER_SUFFIXES = (".pgm", ".png")


def load_image(path: Path) -> DensityImage:
    """Read a density from a .pgm, .png or .csv file."""
    path = Path(path)
    if not path.exists():
        raise InputFormatError(f"Input file not found: {path}")
    suffix = path.suffix.lower()
    if suffix in RASTER_SUFFIXES:
        pixels = read_raster(path)
    elif suffix in (".csv", ".txt"):
        pixels = read_csv(path)
    else:
        raise InputFormatError(f"{path}: unsupported input format {suffix!r} (use .pgm, .png or .csv)")
    logger.debug("Loaded %s (%dx%d)", path, pixels.shape[1], pixels.shape[0])
    return DensityImage(pixels)


def save_image(image: DensityImage, path: Path):
    """Write as CSV (full precision) or 16-bit PGM/PNG scaled to the maximum."""
    path = Path(path)
    if path.suffix.lower() in RASTER_SUFFIXES:
        scaled = np.rint(image.pixels / image.pixels.max() * 65535).astype(np.uint16)
        if not cv2.imwrite(str(path), scaled):
            raise OSError(f"Could not write image {path}")
    else:
        np.savetxt(path, image.pixels, fmt="%.17g", delimiter=",")


def _truncated_gaussian(x1, x2, centre, sigma):
    r2 = (x1 - centre[0]) ** 2 + (x2 - centre[1]) ** 2
    return np.where(r2 <= (3 * sigma) ** 2, np.exp(-r2 / (2 * sigma ** 2)), 0.0)


def _ring(x1, x2, centre, radius, width):
    r = np.hypot(x1 - centre[0], x2 - centre[1])
    return np.where(np.abs(r - radius) <= 3 * width, np.exp(-((r - radius) ** 2) / (2 * width ** 2)), 0.0)


def synth_instance(kind: str, cells_per_side: int, seed: int = 0,
                   separation: float | None = None) -> tuple[DensityImage, DensityImage]:
    """A deterministic pair of (N+1) x (N+1) images whose pixels sit on grid nodes.

    ``separation`` places two equal blobs at x1 = 0.5 -/+ separation/2 instead
    of drawing random centres (two_blobs only).
    """
    if cells_per_side < 4:
        raise ValueError(f"Synthetic instances need N >= 4, got {cells_per_side}")
    grid = GridSpec(cells_per_side)
    x1, x2 = grid.coordinates()
    rng = np.random.default_rng(seed)

    if kind == "two_blobs":
        if separation is None:
            fields = []
            for _ in range(2):
                centre = rng.uniform(0.25, 0.75, size=2)
                sigma = rng.uniform(0.06, 0.12)
                fields.append(_truncated_gaussian(x1, x2, centre, sigma))
        else:
            fields = [
                _truncated_gaussian(x1, x2, (0.5 - separation / 2, 0.5), 0.08),
                _truncated_gaussian(x1, x2, (0.5 + separation / 2, 0.5), 0.08),
            ]
    elif kind == "annulus_pair":
        jitter = rng.uniform(-0.05, 0.05, size=(2, 2))
        radius = rng.uniform(0.12, 0.18)
        fields = [
            _ring(x1, x2, np.array([0.3, 0.5]) + jitter[0], radius, 0.03),
            _ring(x1, x2, np.array([0.7, 0.5]) + jitter[1], radius, 0.03),
        ]
    elif kind == "dirac_pair":
        a = np.zeros(grid.node_shape)
        b = np.zeros(grid.node_shape)
        a[0, 0] = 1.0
        b[0, -1] = 1.0
        fields = [a, b]
    else:
        raise ValueError(f"Unknown instance kind {kind!r} (expected one of {', '.join(SYNTH_KINDS)})")

    # node arrays have x2 increasing with the row; images have row 0 on top
    return DensityImage(np.flipud(fields[0])), DensityImage(np.flipud(fields[1]))


def level_sources(image0: DensityImage, image1: DensityImage, grids) -> list[SourceField]:
    """Discretize the original pair on every grid, coarsest first."""
    return [make_source(discretize(image0, grid), discretize(image1, grid)) for grid in grids]
