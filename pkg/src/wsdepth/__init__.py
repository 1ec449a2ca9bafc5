"""Wasserstein spatial depth: ranking and outlier detection for
distribution-valued data.

The package computes depths of probability distributions relative to a
population of distributions, using exact discrete optimal transport,
closed-form parametric oracles, and competitor metric depths.
"""

from .analytic import (
    AnalyticPopulation,
    Exponential,
    FOUR_CENTERS,
    Gaussian,
    GaussianIso,
    GaussianMapParts,
    Laplace,
    UniformCube,
    UniformInterval,
    Weibull,
    analytic_wsd,
    euclid_spatial_depth,
    gaussian_ot,
    quantile_map_1d,
)
from .depth import (
    DEPTH_METHODS,
    DepthReport,
    compute_depths,
    kernel_spatial_depth,
    lens_depth,
    metric_spatial_depth,
    wsd_all,
    wsd_discrete,
    wsd_empirical,
)
from .errors import (
    DimensionMismatch,
    EmptyGroup,
    EmptyPopulation,
    InvalidCloud,
    InvalidParameter,
    LengthMismatch,
    MarginalMismatch,
    NonFiniteValue,
    NonpositiveBandwidth,
    NotSPD,
    NumericalError,
    ParseError,
    TooFewDistributions,
    UnsupportedPairing,
    WsdError,
)
from .ot_core import (
    Cloud,
    Coupling,
    PairwiseTransport,
    TransportMap,
    barycentric_map,
    solve_ot,
    w2,
    w2_matrix,
    w2_squared,
)
from .sim import (
    DataArray,
    ExperimentConfig,
    run_consistency,
    run_kernel_comparison,
    run_location_equivalence,
    run_outlier_experiment,
    sample_two_stage,
    substream,
)
from .cli import IngestManifest, ingest

__version__ = "0.1.0"

__all__ = [
    "AnalyticPopulation",
    "Cloud",
    "Coupling",
    "DataArray",
    "DepthReport",
    "DEPTH_METHODS",
    "DimensionMismatch",
    "EmptyGroup",
    "EmptyPopulation",
    "ExperimentConfig",
    "Exponential",
    "FOUR_CENTERS",
    "Gaussian",
    "GaussianIso",
    "GaussianMapParts",
    "IngestManifest",
    "InvalidCloud",
    "InvalidParameter",
    "Laplace",
    "LengthMismatch",
    "MarginalMismatch",
    "NonFiniteValue",
    "NonpositiveBandwidth",
    "NotSPD",
    "NumericalError",
    "PairwiseTransport",
    "ParseError",
    "TooFewDistributions",
    "TransportMap",
    "UniformCube",
    "UniformInterval",
    "UnsupportedPairing",
    "Weibull",
    "WsdError",
    "analytic_wsd",
    "barycentric_map",
    "compute_depths",
    "euclid_spatial_depth",
    "gaussian_ot",
    "ingest",
    "kernel_spatial_depth",
    "lens_depth",
    "metric_spatial_depth",
    "quantile_map_1d",
    "run_consistency",
    "run_kernel_comparison",
    "run_location_equivalence",
    "run_outlier_experiment",
    "sample_two_stage",
    "solve_ot",
    "substream",
    "w2",
    "w2_matrix",
    "w2_squared",
    "wsd_all",
    "wsd_discrete",
    "wsd_empirical",
]
