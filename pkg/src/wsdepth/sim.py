"""Seeded samplers and experiment harnesses.

Sampling follows a two-stage scheme: a population object draws a
distribution specification per cloud, then the specification draws the
cloud's points.  Every cloud gets its own counter-based substream keyed by
``(seed, repetition, namespace, index)``, so regeneration is bit-exact and
independent of evaluation order or parallelism.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.special import ndtri
from scipy.stats import spearmanr

from . import analytic
from .depth import (
    DepthReport,
    _embedding_gram,
    _kernel_depth_from_gram,
    wsd_all,
    wsd_empirical,
)
from .errors import EmptyPopulation, InvalidParameter
from .ot_core import Cloud

__all__ = [
    "DataArray",
    "ExperimentConfig",
    "substream",
    "sample_two_stage",
    "run_consistency",
    "query_cloud",
    "run_location_equivalence",
    "run_outlier_experiment",
    "run_kernel_comparison",
    "ConsistencyResult",
    "ConsistencyRow",
    "LocationEquivalenceResult",
    "OutlierResult",
    "KernelComparisonResult",
    "EXPERIMENTS",
]

EXPERIMENTS = ("consistency", "location_equivalence", "outliers", "kernel_comparison")

# Substream namespaces.
_NS_POPULATION = 0
_NS_PLANTED = 1

# Rate draws this close to zero would make exponential samples degenerate.
_RATE_FLOOR = 1e-6


def substream(seed: int, *path: int) -> np.random.Generator:
    """Independent counter-based generator for a (seed, path) address."""
    return np.random.Generator(
        np.random.Philox(np.random.SeedSequence(seed, spawn_key=tuple(path)))
    )


# ---------------------------------------------------------------------------
# univariate factors
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class _Factor:
    """A univariate sampler used as an i.i.d. coordinate factor."""

    def draw(self, rng: np.random.Generator, size) -> np.ndarray:
        raise NotImplementedError


@dataclass(frozen=True)
class ExpFactor(_Factor):
    rate: float

    def draw(self, rng, size):
        return rng.exponential(1.0 / self.rate, size)


@dataclass(frozen=True)
class WeibullFactor(_Factor):
    shape: float

    def draw(self, rng, size):
        return rng.weibull(self.shape, size)


@dataclass(frozen=True)
class GammaFactor(_Factor):
    shape: float
    rate: float

    def draw(self, rng, size):
        return rng.gamma(self.shape, 1.0 / self.rate, size)


@dataclass(frozen=True)
class BetaFactor(_Factor):
    a: float
    b: float

    def draw(self, rng, size):
        return rng.beta(self.a, self.b, size)


@dataclass(frozen=True)
class PoissonFactor(_Factor):
    lam: float

    def draw(self, rng, size):
        return rng.poisson(self.lam, size).astype(np.float64)


@dataclass(frozen=True)
class BinomialFactor(_Factor):
    trials: int
    p: float

    def draw(self, rng, size):
        return rng.binomial(self.trials, self.p, size).astype(np.float64)


@dataclass(frozen=True)
class ChiSquareFactor(_Factor):
    df: float

    def draw(self, rng, size):
        return rng.chisquare(self.df, size)


@dataclass(frozen=True)
class UniformFactor(_Factor):
    low: float
    high: float

    def draw(self, rng, size):
        return rng.uniform(self.low, self.high, size)


@dataclass(frozen=True)
class ChoiceFactor(_Factor):
    values: tuple

    def draw(self, rng, size):
        return rng.choice(np.asarray(self.values, dtype=np.float64), size=size)


@dataclass(frozen=True)
class LaplaceFactor(_Factor):
    loc: float
    scale: float = 1.0

    def draw(self, rng, size):
        return rng.laplace(self.loc, self.scale, size)


@dataclass(frozen=True)
class SignFlipFactor(_Factor):
    """Base factor multiplied by an independent random sign (and a constant)."""

    inner: _Factor
    multiplier: float = 1.0

    def draw(self, rng, size):
        values = self.inner.draw(rng, size)
        signs = rng.choice(np.array([-1.0, 1.0]), size=size)
        return values * signs * self.multiplier


# ---------------------------------------------------------------------------
# cloud specifications
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CloudSpec:
    """A fully parameterized distribution that can sample a cloud."""

    tag: str
    param: object = None

    @property
    def dim(self) -> int:
        raise NotImplementedError

    def sample(self, rng: np.random.Generator, m: int) -> np.ndarray:
        raise NotImplementedError


@dataclass(frozen=True)
class IIDSpec(CloudSpec):
    factor: _Factor = None
    d: int = 1

    @property
    def dim(self) -> int:
        return self.d

    def sample(self, rng, m):
        return self.factor.draw(rng, (m, self.d))


@dataclass(frozen=True)
class GaussianSpec(CloudSpec):
    mean: tuple = ()
    chol: Optional[tuple] = None  # row-major lower factor; None is identity

    @property
    def dim(self) -> int:
        return len(self.mean)

    def sample(self, rng, m):
        z = rng.standard_normal((m, self.dim))
        if self.chol is not None:
            z = z @ np.asarray(self.chol).T
        return np.asarray(self.mean) + z


@dataclass(frozen=True)
class CubeSpec(CloudSpec):
    origin: tuple = ()
    side: float = 1.0

    @property
    def dim(self) -> int:
        return len(self.origin)

    def sample(self, rng, m):
        return np.asarray(self.origin) + self.side * rng.random((m, self.dim))


@dataclass(frozen=True)
class MultinomialSpec(CloudSpec):
    trials: int = 1
    probs: tuple = ()

    @property
    def dim(self) -> int:
        return len(self.probs)

    def sample(self, rng, m):
        return rng.multinomial(self.trials, self.probs, size=m).astype(np.float64)


def ar_cholesky(d: int, rho: float) -> tuple:
    """Lower factor of the covariance with entries ``rho^|i-j|``."""
    cov = rho ** np.abs(np.subtract.outer(np.arange(d), np.arange(d)))
    return tuple(map(tuple, np.linalg.cholesky(cov)))


def _iso_chol(d: int, sd: float) -> tuple:
    return tuple(map(tuple, sd * np.eye(d)))


# ---------------------------------------------------------------------------
# populations
# ---------------------------------------------------------------------------


class _Population:
    """Draws one distribution specification per cloud."""

    dim: int

    def draw_spec(self, rng: np.random.Generator) -> CloudSpec:
        raise NotImplementedError


class ExpBetaRatePopulation(_Population):
    dim = 1

    def draw_spec(self, rng):
        rate = max(float(rng.beta(2.0, 2.0)), _RATE_FLOOR)
        return IIDSpec(tag="exponential", param=rate, factor=ExpFactor(rate), d=1)


class WeibullShapePopulation(_Population):
    dim = 1

    def draw_spec(self, rng):
        shape = float(rng.integers(1, 3))
        return IIDSpec(tag="weibull", param=shape, factor=WeibullFactor(shape), d=1)


class FourCenterGaussianPopulation(_Population):
    dim = 2

    def draw_spec(self, rng):
        idx = int(rng.integers(4))
        return GaussianSpec(
            tag="gaussian_center", param=float(idx), mean=analytic.FOUR_CENTERS[idx]
        )


class CubeSidePopulation(_Population):
    dim = 2

    def draw_spec(self, rng):
        side = float(rng.uniform(1.0, 2.0))
        return CubeSpec(tag="cube", param=side, origin=(0.0, 0.0), side=side)


class GaussianLocationPopulation(_Population):
    """Gaussians sharing one covariance, centers drawn from a prior."""

    def __init__(self, d: int, rho: Optional[float] = None, centers: str = "uniform"):
        self.dim = d
        self._chol = ar_cholesky(d, rho) if rho is not None else None
        self._centers = centers

    def _draw_center(self, rng):
        if self._centers == "uniform":
            return rng.uniform(-2.0, 2.0, self.dim)
        return rng.standard_normal(self.dim)

    def draw_spec(self, rng):
        center = self._draw_center(rng)
        return GaussianSpec(
            tag="gaussian_location",
            param=tuple(center),
            mean=tuple(center),
            chol=self._chol,
        )


class CubeLocationPopulation(_Population):
    """Unit cubes centered at standard normal draws."""

    def __init__(self, d: int):
        self.dim = d

    def draw_spec(self, rng):
        center = rng.standard_normal(self.dim)
        return CubeSpec(
            tag="unit_cube",
            param=tuple(center),
            origin=tuple(center - 0.5),
            side=1.0,
        )


class LaplaceLocationPopulation(_Population):
    dim = 1

    def draw_spec(self, rng):
        loc = float(rng.standard_normal())
        return IIDSpec(
            tag="laplace", param=loc, factor=LaplaceFactor(loc), d=1
        )


class UniformIntervalPopulation(_Population):
    """Products of ``Uniform([0, u])`` factors with a random upper bound."""

    def __init__(self, d: int, upper: str = "uniform12"):
        self.dim = d
        self._upper = upper

    def draw_spec(self, rng):
        if self._upper == "uniform12":
            u = float(rng.uniform(1.0, 2.0))
        else:  # beta(2,2) shifted into [1, 2]
            u = float(rng.beta(2.0, 2.0) + 1.0)
        return IIDSpec(
            tag="uniform_interval", param=u, factor=UniformFactor(0.0, u), d=self.dim
        )


class GaussianScalePopulation(_Population):
    """Spherical Gaussians with random centers and random spread."""

    def __init__(self, d: int):
        self.dim = d

    def draw_spec(self, rng):
        center = rng.standard_normal(self.dim)
        sd = float(rng.uniform(0.8, 1.0))
        return GaussianSpec(
            tag="gaussian_scale",
            param=(tuple(center), sd),
            mean=tuple(center),
            chol=_iso_chol(self.dim, sd),
        )


# ---------------------------------------------------------------------------
# experiment registry
# ---------------------------------------------------------------------------

_CASES = {
    "consistency": (1, 2, 3, 4),
    "location_equivalence": (1, 2, 3, 4),
    "outliers": (1, 2),
    "kernel_comparison": (1, 2),
}

_FIXED_D = {
    ("consistency", 1): 1,
    ("consistency", 2): 1,
    ("consistency", 3): 2,
    ("consistency", 4): 2,
    ("location_equivalence", 4): 1,
    ("outliers", 1): 10,
    ("outliers", 2): 10,
    ("kernel_comparison", 1): 3,
    ("kernel_comparison", 2): 3,
}

_DEFAULT_D = {"location_equivalence": 10}


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything a simulation run depends on, seed included."""

    experiment: str
    case: int
    n: int
    m: int
    d: Optional[int] = None
    repetitions: int = 1
    seed: int = 0
    threshold_quantile: float = 0.01
    bandwidth: float = 1.0
    threads: int = 1

    def __post_init__(self) -> None:
        if self.experiment not in EXPERIMENTS:
            raise InvalidParameter(f"unknown experiment {self.experiment!r}")
        if self.case not in _CASES[self.experiment]:
            raise InvalidParameter(
                f"experiment {self.experiment!r} has no case {self.case}"
            )
        min_n = 0 if self.experiment == "kernel_comparison" else 2
        if self.n < min_n:
            raise InvalidParameter(f"n must be >= {min_n}, got {self.n}")
        if self.m < 1:
            raise InvalidParameter(f"m must be >= 1, got {self.m}")
        if self.repetitions < 1:
            raise InvalidParameter(
                f"repetitions must be >= 1, got {self.repetitions}"
            )
        if not 0 <= self.seed < 2**64:
            raise InvalidParameter("seed must fit in 64 unsigned bits")
        if not 0.0 <= self.threshold_quantile <= 1.0:
            raise InvalidParameter(
                f"threshold quantile must lie in [0, 1], got {self.threshold_quantile}"
            )
        if not self.bandwidth > 0:
            raise InvalidParameter(f"bandwidth must be > 0, got {self.bandwidth}")
        if self.threads < 1:
            raise InvalidParameter(f"threads must be >= 1, got {self.threads}")
        fixed = _FIXED_D.get((self.experiment, self.case))
        if fixed is not None and self.d is not None and self.d != fixed:
            raise InvalidParameter(
                f"{self.experiment} case {self.case} is defined in d={fixed}"
            )

    @property
    def resolved_d(self) -> int:
        fixed = _FIXED_D.get((self.experiment, self.case))
        if fixed is not None:
            return fixed
        if self.d is not None:
            return self.d
        return _DEFAULT_D.get(self.experiment, 10)


def _population_for(config: ExperimentConfig) -> _Population:
    key = (config.experiment, config.case)
    d = config.resolved_d
    if key == ("consistency", 1):
        return ExpBetaRatePopulation()
    if key == ("consistency", 2):
        return WeibullShapePopulation()
    if key == ("consistency", 3):
        return FourCenterGaussianPopulation()
    if key == ("consistency", 4):
        return CubeSidePopulation()
    if key == ("location_equivalence", 1):
        return GaussianLocationPopulation(d)
    if key == ("location_equivalence", 2):
        return GaussianLocationPopulation(d, rho=0.2)
    if key == ("location_equivalence", 3):
        return CubeLocationPopulation(d)
    if key == ("location_equivalence", 4):
        return LaplaceLocationPopulation()
    if key == ("outliers", 1):
        return GaussianLocationPopulation(d, centers="normal")
    if key == ("outliers", 2):
        return UniformIntervalPopulation(d)
    if key == ("kernel_comparison", 1):
        return GaussianScalePopulation(d)
    if key == ("kernel_comparison", 2):
        return UniformIntervalPopulation(d, upper="beta_plus_one")
    raise InvalidParameter(f"no population for {key}")


def _outlier_specs(case: int, d: int) -> list[CloudSpec]:
    """The six planted outlier distributions per outlier case."""
    ar_half = ar_cholesky(d, 0.5)
    if case == 1:
        probs = (0.25, 0.25, 0.15, 0.15, 0.15, 0.01, 0.01, 0.01, 0.01, 0.01)
        return [
            GaussianSpec(tag="out_gauss_far", mean=(5.0,) * d),
            GaussianSpec(tag="out_gauss_far_ar", mean=(5.0,) * d, chol=ar_half),
            IIDSpec(tag="out_gamma", factor=GammaFactor(3.0, 2.0), d=d),
            IIDSpec(tag="out_wide_uniform", factor=UniformFactor(-6.0, 6.0), d=d),
            IIDSpec(tag="out_beta_bimodal", factor=BetaFactor(0.1, 0.1), d=d),
            MultinomialSpec(tag="out_multinomial", trials=2 * d, probs=probs),
        ]
    probs = (0.25, 0.15, 0.1, 0.1, 0.15, 0.05, 0.05, 0.05, 0.05, 0.05)
    return [
        GaussianSpec(tag="out_gauss_far", mean=(3.0,) * d),
        GaussianSpec(tag="out_gauss_neg_ar", mean=(-1.0,) * d, chol=ar_half),
        IIDSpec(tag="out_poisson", factor=PoissonFactor(3.0), d=d),
        IIDSpec(tag="out_binomial", factor=BinomialFactor(d, 0.2), d=d),
        IIDSpec(tag="out_chisquare", factor=ChiSquareFactor(10.0), d=d),
        MultinomialSpec(tag="out_multinomial", trials=2 * d, probs=probs),
    ]


def _exotic_specs(case: int, d: int) -> list[CloudSpec]:
    """The four exotic distributions of the embedding comparison."""
    if case == 1:
        return [
            IIDSpec(tag="exo_gamma", factor=GammaFactor(3.0, 2.0), d=d),
            IIDSpec(
                tag="exo_signed_weibull",
                factor=SignFlipFactor(WeibullFactor(2.0), 3.0),
                d=d,
            ),
            IIDSpec(
                tag="exo_choice",
                factor=ChoiceFactor((-3.5, -2.5, 2.5, 3.5)),
                d=d,
            ),
            GaussianSpec(
                tag="exo_gauss_ar", mean=(-3.0, 3.0, -3.0), chol=ar_cholesky(d, 0.5)
            ),
        ]
    return [
        IIDSpec(tag="exo_poisson", factor=PoissonFactor(1.0), d=d),
        IIDSpec(
            tag="exo_signed_exponential",
            factor=SignFlipFactor(ExpFactor(2.0)),
            d=d,
        ),
        IIDSpec(tag="exo_choice", factor=ChoiceFactor((1.0, 2.0, 3.0)), d=d),
        MultinomialSpec(tag="exo_multinomial", trials=2 * d, probs=(0.1, 0.2, 0.7)),
    ]


# ---------------------------------------------------------------------------
# two-stage sampling
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DataArray:
    """A two-stage sample: ``n`` clouds of ``m`` points each.

    ``params`` holds the generating parameter per cloud, and regenerating
    with the same seed reproduces identical coordinates bit for bit.
    """

    clouds: tuple
    tags: tuple
    params: tuple
    seed: int

    def __post_init__(self) -> None:
        if not self.clouds:
            raise InvalidParameter("a data array needs at least one cloud")
        m0, d0 = self.clouds[0].m, self.clouds[0].d
        for c in self.clouds:
            if c.m != m0 or c.d != d0:
                raise InvalidParameter("all clouds must share m and d")

    @property
    def n(self) -> int:
        return len(self.clouds)


def _sample_cloud(spec: CloudSpec, rng: np.random.Generator, m: int) -> Cloud:
    return Cloud(spec.sample(rng, m))


def sample_two_stage(config: ExperimentConfig, rep: int = 0) -> DataArray:
    """Draw ``n`` population clouds of ``m`` points for one repetition."""
    population = _population_for(config)
    clouds = []
    tags = []
    params = []
    for i in range(config.n):
        rng = substream(config.seed, rep, _NS_POPULATION, i)
        spec = population.draw_spec(rng)
        clouds.append(_sample_cloud(spec, rng, config.m))
        tags.append(spec.tag)
        params.append(spec.param)
    return DataArray(
        clouds=tuple(clouds), tags=tuple(tags), params=tuple(params), seed=config.seed
    )


def _sample_planted(
    specs: Sequence[CloudSpec], config: ExperimentConfig, rep: int
) -> list[Cloud]:
    return [
        _sample_cloud(spec, substream(config.seed, rep, _NS_PLANTED, k), config.m)
        for k, spec in enumerate(specs)
    ]


# ---------------------------------------------------------------------------
# consistency experiment
# ---------------------------------------------------------------------------

_DEFAULT_QUERIES = {
    1: (0.3, 0.5, 0.8),
    2: (1.0, 2.0),
    3: (0.0, 1.0, 2.0, 3.0),
    4: (1.2, 1.5, 1.8),
}

_ANALYTIC_POPULATIONS = {
    1: analytic.AnalyticPopulation.EXPONENTIAL_BETA_RATE,
    2: analytic.AnalyticPopulation.WEIBULL_UNIFORM_SHAPE,
    3: analytic.AnalyticPopulation.GAUSSIAN_FOUR_CENTERS,
    4: analytic.AnalyticPopulation.CUBE_UNIFORM_SIDE,
}

_GOLDEN = (1.0 + math.sqrt(5.0)) / 2.0


def _square_grid_size(m: int, budget: int = 4) -> Optional[int]:
    """Smallest g with g*g a multiple of m and at most ``budget * m``."""
    g = math.isqrt(m)
    if g * g < m:
        g += 1
    while g * g <= budget * m:
        if (g * g) % m == 0:
            return g
        g += 1
    return None


def _unit_square_points(m: int) -> np.ndarray:
    """Deterministic low-discrepancy points on the unit square.

    A midpoint product grid when one with a size divisible by ``m`` exists
    (so the transport to m-point clouds stays on the exact assignment path),
    otherwise a Fibonacci lattice with 2m points.
    """
    g = _square_grid_size(m)
    if g is not None:
        u = (np.arange(g) + 0.5) / g
        xx, yy = np.meshgrid(u, u)
        return np.column_stack([xx.ravel(), yy.ravel()])
    count = 2 * m
    j = np.arange(count)
    u1 = (j + 0.5) / count
    u2 = (j / _GOLDEN) % 1.0
    lo = 0.5 / count
    return np.column_stack([u1, np.clip(u2, lo, 1.0 - lo)])


def query_cloud(case: int, param: float, m: int) -> Cloud:
    """Deterministic discretization of a consistency-case query distribution.

    The query stands for the distribution at the requested parameter, so it
    is discretized by quantiles (one dimension) or a low-discrepancy point
    set pushed through the family (two dimensions) rather than sampled: a
    random query sample injects its own noise into every normalized
    displacement field, which biases the depth down by a term that does not
    vanish with the population size.
    """
    u = (np.arange(m) + 0.5) / m
    if case == 1:
        return Cloud(-np.log(1.0 - u) / param)
    if case == 2:
        return Cloud((-np.log(1.0 - u)) ** (1.0 / param))
    if case == 3:
        base = ndtri(_unit_square_points(m))
        return Cloud(base + np.asarray(analytic.FOUR_CENTERS[int(param)]))
    return Cloud(param * _unit_square_points(m))


def analytic_value(case: int, param: float) -> float:
    """Closed-form depth for a generating parameter of a consistency case."""
    family: object
    if case == 1:
        family = analytic.Exponential(param)
    elif case == 2:
        family = analytic.Weibull(int(param))
    elif case == 3:
        family = analytic.GaussianIso(analytic.FOUR_CENTERS[int(param)], 1.0)
    else:
        family = analytic.UniformCube(param, 2)
    return analytic.analytic_wsd(family, _ANALYTIC_POPULATIONS[case])


@dataclass(frozen=True)
class ConsistencyRow:
    parameter: float
    analytic: float
    mean_empirical: float
    sd_empirical: float
    repetitions: int


@dataclass(frozen=True)
class ConsistencyResult:
    rows: tuple
    loo_mean_abs_gap: Optional[float]
    config: ExperimentConfig


def run_consistency(
    config: ExperimentConfig,
    query_params: Optional[Sequence[float]] = None,
    include_loo: bool = False,
) -> ConsistencyResult:
    """Depth of fixed-parameter queries against freshly sampled populations.

    Per repetition, a population of ``n`` clouds is drawn and a query cloud
    is sampled at each requested parameter; its empirical depth is compared
    to the closed-form value.  With ``include_loo`` the leave-one-out depths
    of the sampled clouds themselves are also measured against the closed
    form at their generating parameters.
    """
    params = tuple(query_params) if query_params is not None else _DEFAULT_QUERIES[config.case]
    queries = {p: query_cloud(config.case, p, config.m) for p in params}
    depths: dict[float, list[float]] = {p: [] for p in params}
    loo_gaps: list[float] = []
    for rep in range(config.repetitions):
        data = sample_two_stage(config, rep=rep)
        for p in params:
            depths[p].append(
                wsd_empirical(queries[p], data.clouds, threads=config.threads)
            )
        if include_loo:
            report = wsd_all(data.clouds, threads=config.threads)
            for i, value in enumerate(report.values):
                loo_gaps.append(
                    abs(value - analytic_value(config.case, data.params[i]))
                )
    rows = []
    for p in params:
        obs = np.asarray(depths[p])
        sd = float(obs.std(ddof=1)) if obs.size > 1 else 0.0
        rows.append(
            ConsistencyRow(
                parameter=float(p),
                analytic=analytic_value(config.case, p),
                mean_empirical=float(obs.mean()),
                sd_empirical=sd,
                repetitions=obs.size,
            )
        )
    loo_gap = float(np.mean(loo_gaps)) if loo_gaps else None
    return ConsistencyResult(rows=tuple(rows), loo_mean_abs_gap=loo_gap, config=config)


# ---------------------------------------------------------------------------
# location-family equivalence
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LocationEquivalenceResult:
    """Per-cloud depth pairs from the final repetition plus summaries."""

    rows: tuple  # (cloud index, wsd, location spatial depth)
    max_abs_gaps: tuple
    rank_correlations: tuple
    config: ExperimentConfig


def _location_of(param) -> np.ndarray:
    if isinstance(param, tuple) and isinstance(param[0], tuple):
        return np.asarray(param[0])  # (center, scale) pairs
    return np.atleast_1d(np.asarray(param, dtype=np.float64))


def run_location_equivalence(config: ExperimentConfig) -> LocationEquivalenceResult:
    """Compare leave-one-out depth with the spatial depth of the locations."""
    gaps = []
    corrs = []
    rows = ()
    for rep in range(config.repetitions):
        data = sample_two_stage(config, rep=rep)
        report = wsd_all(data.clouds, threads=config.threads)
        locations = np.vstack([_location_of(p) for p in data.params])
        loc_depths = np.array(
            [
                analytic.euclid_spatial_depth(
                    locations[i], np.delete(locations, i, axis=0)
                )
                for i in range(config.n)
            ]
        )
        gaps.append(float(np.abs(report.values - loc_depths).max()))
        corrs.append(float(spearmanr(report.values, loc_depths).statistic))
        rows = tuple(
            (i, float(report.values[i]), float(loc_depths[i]))
            for i in range(config.n)
        )
    return LocationEquivalenceResult(
        rows=rows,
        max_abs_gaps=tuple(gaps),
        rank_correlations=tuple(corrs),
        config=config,
    )


# ---------------------------------------------------------------------------
# outlier detection
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class OutlierRecovery:
    repetition: int
    recovered_bottom_k: int
    flagged_planted: int
    flagged_total: int
    all_recovered: bool


@dataclass(frozen=True)
class OutlierResult:
    report: DepthReport  # final repetition, planted clouds last
    planted_indices: tuple
    recoveries: tuple
    recovery_fraction: float
    config: ExperimentConfig


def run_outlier_experiment(config: ExperimentConfig) -> OutlierResult:
    """Plant six outlier distributions and check they rank shallowest.

    Recovery per repetition counts how many planted clouds land among the
    ``k`` smallest depths (``k`` = number planted); flags follow the
    configured quantile threshold.
    """
    specs = _outlier_specs(config.case, config.resolved_d)
    recoveries = []
    report = None
    planted: tuple = ()
    for rep in range(config.repetitions):
        data = sample_two_stage(config, rep=rep)
        clouds = list(data.clouds) + _sample_planted(specs, config, rep)
        planted = tuple(range(config.n, len(clouds)))
        report = wsd_all(
            clouds, config.threshold_quantile, threads=config.threads
        )
        k = len(planted)
        order = np.argsort(report.values, kind="stable")
        bottom = set(order[:k].tolist())
        recovered = len(bottom.intersection(planted))
        flagged_planted = int(report.outlier_flags[list(planted)].sum())
        recoveries.append(
            OutlierRecovery(
                repetition=rep,
                recovered_bottom_k=recovered,
                flagged_planted=flagged_planted,
                flagged_total=int(report.outlier_flags.sum()),
                all_recovered=recovered == k,
            )
        )
    fraction = float(np.mean([r.all_recovered for r in recoveries]))
    return OutlierResult(
        report=report,
        planted_indices=planted,
        recoveries=tuple(recoveries),
        recovery_fraction=fraction,
        config=config,
    )


# ---------------------------------------------------------------------------
# kernel-embedding comparison
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class KernelComparisonResult:
    rows: tuple  # (cloud index, wsd, kernel depth, is exotic)
    wsd_bottom_fraction: float
    kernel_bottom_fraction: float
    config: ExperimentConfig


def run_kernel_comparison(config: ExperimentConfig) -> KernelComparisonResult:
    """Depth under transport geometry versus depth after kernel embedding.

    Per repetition the four exotic clouds are appended to the regular draw;
    the summary records how often they occupy the four smallest values under
    each depth.
    """
    if config.n < 1:
        raise EmptyPopulation("kernel comparison needs at least one regular cloud")
    specs = _exotic_specs(config.case, config.resolved_d)
    wsd_hits = []
    kernel_hits = []
    rows = ()
    for rep in range(config.repetitions):
        data = sample_two_stage(config, rep=rep)
        clouds = list(data.clouds) + _sample_planted(specs, config, rep)
        exotic = set(range(config.n, len(clouds)))
        k = len(exotic)
        wsd_report = wsd_all(clouds, config.threshold_quantile, threads=config.threads)
        gram = _embedding_gram(clouds, config.bandwidth)
        kernel_values = np.array(
            [
                _kernel_depth_from_gram(
                    gram, qi, [i for i in range(len(clouds)) if i != qi]
                )
                for qi in range(len(clouds))
            ]
        )
        wsd_hits.append(
            set(np.argsort(wsd_report.values, kind="stable")[:k].tolist()) == exotic
        )
        kernel_hits.append(
            set(np.argsort(kernel_values, kind="stable")[:k].tolist()) == exotic
        )
        rows = tuple(
            (
                i,
                float(wsd_report.values[i]),
                float(kernel_values[i]),
                i in exotic,
            )
            for i in range(len(clouds))
        )
    return KernelComparisonResult(
        rows=rows,
        wsd_bottom_fraction=float(np.mean(wsd_hits)),
        kernel_bottom_fraction=float(np.mean(kernel_hits)),
        config=config,
    )
