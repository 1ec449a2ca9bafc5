"""Closed-form transport maps, distances, and depth values for parametric families.

These are the oracles the simulation harnesses check the empirical machinery
against: the quantile reduction in one dimension, the Gaussian closed form
built from covariance square roots, four analytic depth values for specific
parametric populations, and the plain Euclidean spatial depth that location
families reduce to.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import (
    DimensionMismatch,
    InvalidParameter,
    LengthMismatch,
    NotSPD,
    UnsupportedPairing,
)
from .ot_core import Cloud, TransportMap

__all__ = [
    "Exponential",
    "Weibull",
    "GaussianIso",
    "Gaussian",
    "UniformCube",
    "UniformInterval",
    "Laplace",
    "AnalyticPopulation",
    "FOUR_CENTERS",
    "GaussianMapParts",
    "quantile_map_1d",
    "gaussian_ot",
    "analytic_wsd",
    "euclid_spatial_depth",
]

# Relative eigenvalue floor below which a covariance counts as singular.
_SPD_FLOOR = 1e-12


# ---------------------------------------------------------------------------
# family specifications
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Exponential:
    """Exponential distribution with the given rate."""

    rate: float

    def __post_init__(self) -> None:
        if not (self.rate > 0 and math.isfinite(self.rate)):
            raise InvalidParameter(f"exponential rate must be > 0, got {self.rate}")


@dataclass(frozen=True)
class Weibull:
    """Weibull distribution with unit scale; shape restricted to 1 or 2."""

    shape: int
    scale: float = 1.0

    def __post_init__(self) -> None:
        if self.shape not in (1, 2):
            raise InvalidParameter(f"weibull shape must be 1 or 2, got {self.shape}")
        if self.scale != 1.0:
            raise InvalidParameter("weibull scale is fixed at 1")


@dataclass(frozen=True)
class GaussianIso:
    """Isotropic Gaussian: center plus a single standard deviation."""

    center: tuple
    sd: float = 1.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        if not (self.sd > 0 and math.isfinite(self.sd)):
            raise InvalidParameter(f"sd must be > 0, got {self.sd}")

    @property
    def mean(self) -> np.ndarray:
        return np.asarray(self.center)

    @property
    def cov(self) -> np.ndarray:
        return self.sd**2 * np.eye(len(self.center))


@dataclass(frozen=True)
class Gaussian:
    """Gaussian with full covariance (symmetric positive definite)."""

    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self) -> None:
        mean = np.asarray(self.mean, dtype=np.float64).reshape(-1)
        cov = np.asarray(self.cov, dtype=np.float64)
        if cov.shape != (mean.shape[0], mean.shape[0]):
            raise InvalidParameter(
                f"covariance shape {cov.shape} does not match dimension {mean.shape[0]}"
            )
        if np.abs(cov - cov.T).max() > 1e-12:
            raise InvalidParameter("covariance must be symmetric within 1e-12")
        if np.linalg.eigvalsh(cov).min() <= 0:
            raise InvalidParameter("covariance must be positive definite")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)


@dataclass(frozen=True)
class UniformCube:
    """Uniform distribution on the cube ``[0, side]^dim``."""

    side: float
    dim: int = 2

    def __post_init__(self) -> None:
        if not (self.side > 0 and math.isfinite(self.side)):
            raise InvalidParameter(f"cube side must be > 0, got {self.side}")
        if self.dim < 1:
            raise InvalidParameter("cube dimension must be >= 1")


@dataclass(frozen=True)
class UniformInterval:
    """Product of ``dim`` independent ``Uniform([0, upper])`` factors."""

    upper: float
    dim: int = 1

    def __post_init__(self) -> None:
        if not (self.upper > 0 and math.isfinite(self.upper)):
            raise InvalidParameter(f"upper bound must be > 0, got {self.upper}")
        if self.dim < 1:
            raise InvalidParameter("dimension must be >= 1")


@dataclass(frozen=True)
class Laplace:
    """Double exponential with unit rate and the given location."""

    location: float
    rate: float = 1.0

    def __post_init__(self) -> None:
        if self.rate != 1.0:
            raise InvalidParameter("laplace rate is fixed at 1")


class AnalyticPopulation(Enum):
    """Populations of distributions with a known closed-form depth."""

    EXPONENTIAL_BETA_RATE = "exponential_beta_rate"
    WEIBULL_UNIFORM_SHAPE = "weibull_uniform_shape"
    GAUSSIAN_FOUR_CENTERS = "gaussian_four_centers"
    CUBE_UNIFORM_SIDE = "cube_uniform_side"


FOUR_CENTERS: tuple[tuple[float, float], ...] = (
    (1.0, 0.0),
    (-1.0, 0.0),
    (0.0, 1.0),
    (0.0, -1.0),
)


# ---------------------------------------------------------------------------
# operations
# ---------------------------------------------------------------------------


def quantile_map_1d(q_sorted, p_sorted) -> TransportMap:
    """Monotone map between two sorted samples: i-th order statistic to i-th.

    Raises:
        LengthMismatch: the vectors have different lengths.
        InvalidParameter: either vector is not sorted ascending.
    """
    q = np.asarray(q_sorted, dtype=np.float64).reshape(-1)
    p = np.asarray(p_sorted, dtype=np.float64).reshape(-1)
    if q.shape[0] != p.shape[0]:
        raise LengthMismatch(f"lengths differ: {q.shape[0]} vs {p.shape[0]}")
    if (np.diff(q) < 0).any() or (np.diff(p) < 0).any():
        raise InvalidParameter("inputs must be sorted ascending")
    source = Cloud(q.reshape(-1, 1))
    images = p.reshape(-1, 1).copy()
    images.setflags(write=False)
    return TransportMap(images=images, source=source)


def _spd_sqrt_pair(cov: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Symmetric square root and inverse square root via eigendecomposition."""
    vals, vecs = np.linalg.eigh(cov)
    floor = _SPD_FLOOR * np.trace(cov)
    if vals.min() <= floor:
        raise NotSPD(
            f"covariance eigenvalue {vals.min():.3e} at or below {floor:.3e}"
        )
    root = np.sqrt(vals)
    return (vecs * root) @ vecs.T, (vecs / root) @ vecs.T


def _spd_sqrt(mat: np.ndarray) -> np.ndarray:
    sym = 0.5 * (mat + mat.T)
    vals, vecs = np.linalg.eigh(sym)
    vals = np.clip(vals, 0.0, None)
    return (vecs * np.sqrt(vals)) @ vecs.T


@dataclass(frozen=True)
class GaussianMapParts:
    """Affine optimal map between Gaussians: ``x -> mu_p + A (x - mu_q)``."""

    matrix: np.ndarray
    mu_q: np.ndarray
    mu_p: np.ndarray

    def apply(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        return self.mu_p + (x - self.mu_q) @ self.matrix.T


def _as_gaussian(g) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(g, GaussianIso):
        return g.mean, g.cov
    if isinstance(g, Gaussian):
        return g.mean, g.cov
    raise InvalidParameter(f"expected a Gaussian family member, got {type(g).__name__}")


def gaussian_ot(q, p) -> tuple[GaussianMapParts, float]:
    """Closed-form optimal map and distance between two Gaussians.

    The map matrix is ``Sq^{-1/2} (Sq^{1/2} Sp Sq^{1/2})^{1/2} Sq^{-1/2}``
    (symmetrised against round-off) and the squared distance adds the mean
    gap to the covariance trace term.

    Raises:
        NotSPD: a covariance has an eigenvalue at or below ``1e-12 * trace``.
    """
    mu_q, cov_q = _as_gaussian(q)
    mu_p, cov_p = _as_gaussian(p)
    if mu_q.shape != mu_p.shape:
        raise DimensionMismatch(
            f"gaussians live in different dimensions: {mu_q.shape[0]} vs {mu_p.shape[0]}"
        )
    if np.array_equal(cov_q, cov_p):
        # equal covariances: the map is a pure translation and the trace
        # term vanishes identically, so skip the noisy square roots
        _spd_sqrt_pair(cov_q)  # still enforce the SPD floor
        a = np.eye(mu_q.shape[0])
        trace_term = 0.0
    else:
        sq_root, sq_inv_root = _spd_sqrt_pair(cov_q)
        middle = _spd_sqrt(sq_root @ cov_p @ sq_root)
        a = sq_inv_root @ middle @ sq_inv_root
        a = 0.5 * (a + a.T)
        sp_root, _ = _spd_sqrt_pair(cov_p)
        cross = _spd_sqrt(sp_root @ cov_q @ sp_root)
        trace_term = float(
            np.trace(cov_p) + np.trace(cov_q) - 2.0 * np.trace(cross)
        )
    gap = mu_p - mu_q
    dist_sq = float(gap @ gap) + max(trace_term, 0.0)
    return GaussianMapParts(matrix=a, mu_q=mu_q, mu_p=mu_p), math.sqrt(max(dist_sq, 0.0))


def analytic_wsd(q, population: AnalyticPopulation) -> float:
    """Closed-form depth of ``q`` within one of the four supported populations.

    Supported pairings and values:

    * ``Exponential(rate)`` against rates drawn from ``Beta(2, 2)``, for
      rates in ``(0, 1]``: ``1 - |1 + 4 r^3 - 6 r^2|``;
    * ``Weibull(shape)`` against shapes uniform on ``{1, 2}``: ``1/2``;
    * ``GaussianIso`` with unit sd at one of the four unit-axis centers
      against that four-center family: ``(3 - sqrt(2)) / 4``;
    * ``UniformCube(side, dim=2)`` against sides uniform on ``[1, 2]``, for
      sides in ``[1, 2]``: ``1 - |2 c - 3|``.

    Raises:
        UnsupportedPairing: any other combination or out-of-domain parameter.
    """
    if population is AnalyticPopulation.EXPONENTIAL_BETA_RATE:
        if not isinstance(q, Exponential):
            raise UnsupportedPairing(f"{type(q).__name__} vs {population.value}")
        r = q.rate
        if not 0.0 < r <= 1.0:
            raise UnsupportedPairing(f"rate {r} outside (0, 1]")
        return 1.0 - abs(1.0 + 4.0 * r**3 - 6.0 * r**2)

    if population is AnalyticPopulation.WEIBULL_UNIFORM_SHAPE:
        if not isinstance(q, Weibull):
            raise UnsupportedPairing(f"{type(q).__name__} vs {population.value}")
        return 0.5

    if population is AnalyticPopulation.GAUSSIAN_FOUR_CENTERS:
        if not isinstance(q, GaussianIso):
            raise UnsupportedPairing(f"{type(q).__name__} vs {population.value}")
        if len(q.center) != 2 or abs(q.sd - 1.0) > 1e-12:
            raise UnsupportedPairing("four-center family needs 2-D unit-sd gaussians")
        center = np.asarray(q.center)
        if not any(
            np.abs(center - np.asarray(c)).max() <= 1e-12 for c in FOUR_CENTERS
        ):
            raise UnsupportedPairing(f"center {q.center} is not one of the four")
        return (3.0 - math.sqrt(2.0)) / 4.0

    if population is AnalyticPopulation.CUBE_UNIFORM_SIDE:
        if not isinstance(q, UniformCube):
            raise UnsupportedPairing(f"{type(q).__name__} vs {population.value}")
        if q.dim != 2 or not 1.0 <= q.side <= 2.0:
            raise UnsupportedPairing(
                f"cube family needs dim 2 and side in [1, 2], got {q}"
            )
        return 1.0 - abs(2.0 * q.side - 3.0)

    raise UnsupportedPairing(f"unknown population {population!r}")


def euclid_spatial_depth(x, points) -> float:
    """Euclidean spatial depth: one minus the norm of the mean unit direction.

    Points coinciding with ``x`` contribute a zero vector (the ``0/0 = 0``
    convention).  The result is clamped into ``[0, 1]``.
    """
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim == 1:
        pts = pts.reshape(-1, 1)
    if pts.shape[1] != x.shape[0]:
        raise DimensionMismatch(
            f"query has d={x.shape[0]} but points have d={pts.shape[1]}"
        )
    diffs = pts - x
    norms = np.sqrt((diffs * diffs).sum(axis=1))
    units = np.zeros_like(diffs)
    hit = norms > 0
    units[hit] = diffs[hit] / norms[hit, None]
    mean = units.sum(axis=0) / pts.shape[0]
    return min(1.0, max(0.0, 1.0 - float(np.sqrt((mean * mean).sum()))))
