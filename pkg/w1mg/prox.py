"""Pointwise proximal maps of mu*||.||_p and projections onto unit q-balls.

All functions act on arrays whose last axis holds the two components of a
vector, so a whole node field of shape (rows, cols, 2) is processed at once.
"""

import math
from enum import Enum

import numpy as np


class PNorm(Enum):
    """Ground-metric exponent p in {1, 2, inf}."""
    ONE = "1"
    TWO = "2"
    INF = "inf"

    @property
    def exponent(self) -> float:
        return {PNorm.ONE: 1.0, PNorm.TWO: 2.0, PNorm.INF: math.inf}[self]

    @property
    def conjugate(self) -> "PNorm":
        """The q with 1/p + 1/q = 1."""
        return {PNorm.ONE: PNorm.INF, PNorm.TWO: PNorm.TWO, PNorm.INF: PNorm.ONE}[self]

    @classmethod
    def parse(cls, value) -> "PNorm":
        """Accept 1, 2, 'inf', math.inf, '∞' or an existing PNorm."""
        if isinstance(value, PNorm):
            return value
        text = str(value).strip().lower()
        aliases = {
            "1": cls.ONE, "1.0": cls.ONE,
            "2": cls.TWO, "2.0": cls.TWO,
            "inf": cls.INF, "infinity": cls.INF, "∞": cls.INF,
        }
        if text not in aliases:
            raise ValueError(f"Unsupported p-norm: {value!r} (expected 1, 2 or inf)")
        return aliases[text]

    def __str__(self) -> str:
        return self.value


def vector_norm(v: np.ndarray, p: PNorm) -> np.ndarray:
    """||v||_p along the last axis."""
    return np.linalg.norm(np.asarray(v, dtype=float), ord=p.exponent, axis=-1)


def project_l1_ball(v: np.ndarray, radius: float) -> np.ndarray:
    """Euclidean projection of 2-vectors onto {u : ||u||_1 <= radius}.

    Sort-and-threshold with two components reduces to a two-case branch:
    either only the larger magnitude survives or both are shifted by the
    same threshold.
    """
    if radius <= 0:
        raise ValueError(f"radius must be positive, got {radius}")
    v = np.asarray(v, dtype=float)
    a = np.abs(v)
    big = np.max(a, axis=-1, keepdims=True)
    small = np.min(a, axis=-1, keepdims=True)
    theta = np.where(
        big - small >= radius,
        big - radius,
        0.5 * (big + small - radius),
    )
    inside = np.sum(a, axis=-1, keepdims=True) <= radius
    theta = np.where(inside, 0.0, theta)
    return np.sign(v) * np.maximum(a - theta, 0.0)


def project_qball(v: np.ndarray, q: PNorm) -> np.ndarray:
    """Nearest point of the unit q-ball, pointwise."""
    v = np.asarray(v, dtype=float)
    if q is PNorm.INF:
        return np.clip(v, -1.0, 1.0)
    if q is PNorm.TWO:
        norm = np.linalg.norm(v, axis=-1, keepdims=True)
        return v / np.maximum(norm, 1.0)
    return project_l1_ball(v, 1.0)


def shrink(v: np.ndarray, mu: float, p: PNorm) -> np.ndarray:
    """argmin_u ||u||_p + ||u - v||^2 / (2 mu), pointwise.

    p=1 is componentwise soft-thresholding, p=2 block soft-thresholding and
    p=inf goes through the Moreau decomposition with the l1-ball projection.
    """
    if mu <= 0:
        raise ValueError(f"mu must be positive, got {mu}")
    v = np.asarray(v, dtype=float)
    if p is PNorm.ONE:
        return np.sign(v) * np.maximum(np.abs(v) - mu, 0.0)
    if p is PNorm.TWO:
        norm = np.linalg.norm(v, axis=-1, keepdims=True)
        with np.errstate(divide="ignore", invalid="ignore"):
            scale = np.where(norm > mu, 1.0 - mu / norm, 0.0)
        return scale * v
    return v - project_l1_ball(v, mu)
