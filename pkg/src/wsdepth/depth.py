"""Depth functions for collections of empirical distributions.

The main export is the spatial depth in Wasserstein geometry: one minus the
norm of the average normalized displacement field from the query towards the
population, each field being the barycentric transport displacement divided
by the corresponding transport distance.  Competitor depths (lens, metric
spatial, kernel-embedding spatial) share the same report format.

Determinism contract: population terms are accumulated in ascending index
order with Neumaier compensation, and scalar reductions use ``math.fsum``,
so results do not depend on how many threads solved the transport plans.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from .errors import (
    DimensionMismatch,
    EmptyPopulation,
    InvalidParameter,
    NonpositiveBandwidth,
    NumericalError,
    TooFewDistributions,
)
from .ot_core import (
    Cloud,
    PairwiseTransport,
    barycentric_map,
    plan_cost,
    solve_ot,
)

__all__ = [
    "DepthReport",
    "make_report",
    "wsd_empirical",
    "wsd_all",
    "wsd_discrete",
    "lens_depth",
    "metric_spatial_depth",
    "kernel_spatial_depth",
    "compute_depths",
    "DEPTH_METHODS",
]

DEPTH_METHODS = ("wsd", "wsd_discrete", "lens", "metric_spatial", "kernel_spatial")

# Radicands more negative than this indicate a real defect, not round-off.
_RADICAND_GUARD = -1e-8


@dataclass(frozen=True)
class DepthReport:
    """Per-distribution depth values with ranks and outlier flags.

    ``ranks`` is the 1-based position of each value in ascending order
    (rank 1 is the shallowest distribution; ties resolve by index).  Flags
    mark the ``ceil(threshold * n)`` smallest values.
    """

    values: np.ndarray
    ranks: np.ndarray
    method: str
    excluded_self: bool
    outlier_flags: np.ndarray
    threshold_quantile: float


def make_report(
    values: np.ndarray,
    method: str,
    threshold_quantile: float,
    excluded_self: bool,
) -> DepthReport:
    values = np.asarray(values, dtype=np.float64)
    n = values.shape[0]
    if not 0.0 <= threshold_quantile <= 1.0:
        raise InvalidParameter(
            f"threshold quantile must lie in [0, 1], got {threshold_quantile}"
        )
    order = np.argsort(values, kind="stable")
    ranks = np.empty(n, dtype=np.int64)
    ranks[order] = np.arange(1, n + 1)
    flags = np.zeros(n, dtype=bool)
    k = min(n, math.ceil(threshold_quantile * n))
    flags[order[:k]] = True
    for arr in (values, ranks, flags):
        arr.setflags(write=False)
    return DepthReport(
        values=values,
        ranks=ranks,
        method=method,
        excluded_self=excluded_self,
        outlier_flags=flags,
        threshold_quantile=threshold_quantile,
    )


# ---------------------------------------------------------------------------
# accumulation helpers
# ---------------------------------------------------------------------------


class _NeumaierSum:
    """Elementwise compensated accumulator over a fixed-shape array."""

    __slots__ = ("_sum", "_comp")

    def __init__(self, shape) -> None:
        self._sum = np.zeros(shape)
        self._comp = np.zeros(shape)

    def add(self, x: np.ndarray) -> None:
        t = self._sum + x
        big = np.abs(self._sum) >= np.abs(x)
        self._comp += np.where(big, (self._sum - t) + x, (x - t) + self._sum)
        self._sum = t

    def total(self) -> np.ndarray:
        return self._sum + self._comp


def _radicand(q: Cloud, terms, n_div: int) -> float:
    """Weighted squared norm of the mean normalized displacement field.

    ``terms`` yields ``(w2, images)`` pairs in ascending population order;
    zero-distance terms contribute nothing but still count in ``n_div``.
    """
    acc = _NeumaierSum((q.m, q.d))
    for dist, images in terms:
        if dist == 0.0:
            continue
        acc.add((q.points - images) / dist)
    mean = acc.total() / n_div
    sq = np.zeros(q.m)
    for k in range(q.d):
        sq += mean[:, k] * mean[:, k]
    value = math.fsum((q.weights * sq).tolist())
    if value < _RADICAND_GUARD:
        raise NumericalError(f"depth radicand fell to {value:.3e}")
    return max(value, 0.0)


def _depth_from_radicand(radicand: float) -> float:
    return min(1.0, max(0.0, 1.0 - math.sqrt(radicand)))


def _direct_pair(q: Cloud, p: Cloud) -> tuple[float, np.ndarray]:
    plan = solve_ot(q, p)
    dist = math.sqrt(plan_cost(plan, q, p))
    return dist, barycentric_map(plan, q, p).images


def _collect_pairs(q: Cloud, population: list[Cloud], indices, threads: int):
    if threads > 1 and len(indices) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(lambda i: _direct_pair(q, population[i]), indices))
    return [_direct_pair(q, population[i]) for i in indices]


def _check_population(q: Cloud, population: list[Cloud]) -> None:
    for k, p in enumerate(population):
        if p.d != q.d:
            raise DimensionMismatch(
                f"query has d={q.d} but population member {k} has d={p.d}"
            )


# ---------------------------------------------------------------------------
# Wasserstein spatial depth
# ---------------------------------------------------------------------------


def wsd_empirical(
    q: Cloud,
    population: Sequence[Cloud],
    exclude: Optional[int] = None,
    *,
    threads: int = 1,
) -> float:
    """Spatial depth of one cloud against a population of clouds.

    For each population member the optimal plan from ``q`` is solved, the
    barycentric displacement field is divided by the transport distance, and
    the fields are averaged; the depth is one minus the ``L2(q)`` norm of
    that average.  Members at distance zero contribute a zero field.

    With a single effective member the normalized field is a unit vector,
    so the depth is exactly ``0.0`` (or ``1.0`` at distance zero).

    Args:
        q: query cloud.
        population: clouds sharing ``q``'s dimension.
        exclude: optional index to leave out (for members ranked against
            the rest of their own collection).
        threads: worker threads for the per-member transport solves; the
            result is identical for any value.

    Raises:
        EmptyPopulation: no members remain after exclusion.
        DimensionMismatch: a member lives in a different dimension.
    """
    pop = list(population)
    if not pop:
        raise EmptyPopulation("population is empty")
    indices = [i for i in range(len(pop)) if i != exclude]
    if not indices:
        raise EmptyPopulation("population is empty after exclusion")
    _check_population(q, pop)
    if len(indices) == 1:
        dist, _ = _direct_pair(q, pop[indices[0]])
        return 1.0 if dist == 0.0 else 0.0
    pairs = _collect_pairs(q, pop, indices, threads)
    return _depth_from_radicand(_radicand(q, pairs, len(indices)))


def _wsd_from_cache(cache: PairwiseTransport, qi: int, indices: list[int]) -> float:
    if len(indices) == 1:
        return 1.0 if cache.w2(qi, indices[0]) == 0.0 else 0.0
    terms = ((cache.w2(qi, i), cache.images(qi, i)) for i in indices)
    return _depth_from_radicand(
        _radicand(cache.cloud(qi), terms, len(indices))
    )


def wsd_all(
    data,
    threshold_quantile: float = 0.05,
    *,
    threads: int = 1,
) -> DepthReport:
    """Leave-one-out spatial depth of every cloud in a collection.

    Pairwise plans are solved once per unordered pair and shared; the value
    for each cloud matches an individual :func:`wsd_empirical` call with
    ``exclude`` set.

    Raises:
        EmptyPopulation: fewer than two clouds.
    """
    clouds = list(getattr(data, "clouds", data))
    n = len(clouds)
    if n < 2:
        raise EmptyPopulation(f"need at least 2 clouds, got {n}")
    cache = PairwiseTransport(clouds, threads=threads)
    cache.precompute()
    values = np.empty(n)
    for qi in range(n):
        values[qi] = _wsd_from_cache(
            cache, qi, [i for i in range(n) if i != qi]
        )
    return make_report(values, "wsd", threshold_quantile, excluded_self=True)


def wsd_discrete(
    q: Cloud,
    population: Sequence[Cloud],
    *,
    threads: int = 1,
) -> float:
    """Spatial depth built from transport plans instead of maps.

    Defined through the three-way coupling that glues the plans from ``q``
    to each pair of population members, with the two target legs drawn
    independently given the source atom.  That conditional independence
    factorizes the pair integral into an inner product of per-member
    conditional-mean fields, so the value is computed from the barycentric
    projections; the tests pin this algebra against an exhaustive sum over
    plan entries.  Coincides with :func:`wsd_empirical` whenever every plan
    is a permutation.

    Raises:
        EmptyPopulation: the population is empty.
    """
    pop = list(population)
    if not pop:
        raise EmptyPopulation("population is empty")
    _check_population(q, pop)
    pairs = _collect_pairs(q, pop, list(range(len(pop))), threads)
    return _depth_from_radicand(_radicand(q, pairs, len(pop)))


def _wsd_discrete_from_cache(cache: PairwiseTransport, qi: int, indices) -> float:
    terms = ((cache.w2(qi, i), cache.images(qi, i)) for i in indices)
    return _depth_from_radicand(
        _radicand(cache.cloud(qi), terms, len(indices))
    )


# ---------------------------------------------------------------------------
# competitor depths
# ---------------------------------------------------------------------------


def _query_setup(q, population, cache):
    """Resolve a query given as index or cloud; return (others, dist_fn)."""
    pop = list(population)
    n = len(pop)
    if isinstance(q, (int, np.integer)):
        if not 0 <= q < n:
            raise EmptyPopulation(f"query index {q} outside population of {n}")
        q_idx: Optional[int] = int(q)
        q_cloud = pop[q_idx]
    else:
        q_cloud = q
        q_idx = next((i for i, p in enumerate(pop) if p is q_cloud), None)
    others = [i for i in range(n) if i != q_idx]
    if cache is not None and len(cache) != n:
        raise DimensionMismatch(
            f"cache built over {len(cache)} clouds, population has {n}"
        )

    def dist_to(i: int) -> float:
        if q_idx is not None and cache is not None:
            return cache.w2(q_idx, i)
        plan = solve_ot(q_cloud, pop[i])
        return math.sqrt(plan_cost(plan, q_cloud, pop[i]))

    def dist_between(i: int, j: int) -> float:
        if cache is not None:
            return cache.w2(i, j)
        plan = solve_ot(pop[i], pop[j])
        return math.sqrt(plan_cost(plan, pop[i], pop[j]))

    return pop, others, dist_to, dist_between


def lens_depth(
    q: Union[Cloud, int],
    population: Sequence[Cloud],
    *,
    cache: Optional[PairwiseTransport] = None,
) -> float:
    """Fraction of population pairs whose mutual distance dominates both
    distances to the query (ties count).

    ``q`` may be a population index (that member is left out of the pairs)
    or an external cloud.

    Raises:
        TooFewDistributions: fewer than two members remain.
    """
    pop, others, dist_to, dist_between = _query_setup(q, population, cache)
    if len(others) < 2:
        raise TooFewDistributions(
            f"lens depth needs >= 2 population members, got {len(others)}"
        )
    dq = {i: dist_to(i) for i in others}
    hits = 0
    total = 0
    for a in range(len(others)):
        for b in range(a + 1, len(others)):
            i, j = others[a], others[b]
            total += 1
            if dist_between(i, j) >= max(dq[i], dq[j]):
                hits += 1
    return hits / total


def metric_spatial_depth(
    q: Union[Cloud, int],
    population: Sequence[Cloud],
    *,
    cache: Optional[PairwiseTransport] = None,
) -> float:
    """Metric spatial depth from squared-distance cosines, valued in [0, 2].

    Averages ``(d_i^2 + d_j^2 - d_ij^2) / (d_i d_j)`` over ordered pairs of
    distinct members; pairs touching a zero distance to the query contribute
    zero but stay in the denominator.

    Raises:
        TooFewDistributions: fewer than two members remain.
    """
    pop, others, dist_to, dist_between = _query_setup(q, population, cache)
    k = len(others)
    if k < 2:
        raise TooFewDistributions(
            f"metric spatial depth needs >= 2 population members, got {k}"
        )
    dq = {i: dist_to(i) for i in others}
    summands: list[float] = []
    for a in range(k):
        for b in range(a + 1, k):
            i, j = others[a], others[b]
            if dq[i] == 0.0 or dq[j] == 0.0:
                continue
            dij = dist_between(i, j)
            # each unordered pair stands for two equal ordered terms
            summands.append(
                2.0
                * (dq[i] * dq[i] + dq[j] * dq[j] - dij * dij)
                / (dq[i] * dq[j])
            )
    mean = math.fsum(summands) / (k * (k - 1))
    return min(2.0, max(0.0, 1.0 - 0.5 * mean))


# ---------------------------------------------------------------------------
# kernel-embedding spatial depth
# ---------------------------------------------------------------------------


def _embedding_gram(clouds: Sequence[Cloud], bandwidth: float) -> np.ndarray:
    """Inner products of kernel mean embeddings for every cloud pair."""
    n = len(clouds)
    gram = np.zeros((n, n))
    scale = -0.5 / (bandwidth * bandwidth)
    for i in range(n):
        for j in range(i, n):
            a, b = clouds[i], clouds[j]
            sq = np.zeros((a.m, b.m))
            for k in range(a.d):
                diff = a.points[:, k, None] - b.points[None, :, k]
                sq += diff * diff
            block = np.exp(scale * sq)
            gram[i, j] = gram[j, i] = float(a.weights @ block @ b.weights)
    return gram


def _kernel_depth_from_gram(gram: np.ndarray, qi: int, members) -> float:
    members = list(members)
    n = len(members)
    qq = gram[qi, qi]
    norm_sq = np.array(
        [max(gram[i, i] - 2.0 * gram[i, qi] + qq, 0.0) for i in members]
    )
    norms = np.sqrt(norm_sq)
    terms: list[float] = []
    for a in range(n):
        if norms[a] == 0.0:
            continue
        terms.append(1.0)  # <g_a, g_a> / ||g_a||^2
        for b in range(a + 1, n):
            if norms[b] == 0.0:
                continue
            i, j = members[a], members[b]
            inner = gram[i, j] - gram[i, qi] - gram[j, qi] + qq
            terms.append(2.0 * inner / (norms[a] * norms[b]))
    radicand = max(math.fsum(terms) / (n * n), 0.0)
    return min(1.0, max(0.0, 1.0 - math.sqrt(radicand)))


def kernel_spatial_depth(
    q: Cloud,
    population: Sequence[Cloud],
    bandwidth: float,
) -> float:
    """Spatial depth after embedding every cloud through a Gaussian kernel.

    Embedding inner products are cross-means of ``exp(-||x - y||^2 / 2h^2)``
    over sample pairs; the depth is one minus the norm of the average unit
    displacement in the embedding space, with zero displacements skipped.

    Raises:
        NonpositiveBandwidth: ``bandwidth <= 0``.
        EmptyPopulation: the population is empty.
    """
    if not bandwidth > 0:
        raise NonpositiveBandwidth(f"bandwidth must be > 0, got {bandwidth}")
    pop = list(population)
    if not pop:
        raise EmptyPopulation("population is empty")
    _check_population(q, pop)
    gram = _embedding_gram(pop + [q], bandwidth)
    return _kernel_depth_from_gram(gram, len(pop), range(len(pop)))


# ---------------------------------------------------------------------------
# uniform front end
# ---------------------------------------------------------------------------


def compute_depths(
    clouds: Sequence[Cloud],
    method: str = "wsd",
    *,
    threshold_quantile: float = 0.05,
    bandwidth: float = 1.0,
    threads: int = 1,
) -> DepthReport:
    """Leave-one-out depth report for a collection, under any method tag."""
    if method not in DEPTH_METHODS:
        raise InvalidParameter(f"unknown depth method {method!r}")
    clouds = list(getattr(clouds, "clouds", clouds))
    n = len(clouds)
    if n < 2:
        raise EmptyPopulation(f"need at least 2 clouds, got {n}")
    if method == "wsd":
        report = wsd_all(clouds, threshold_quantile, threads=threads)
        return report
    if method == "kernel_spatial":
        gram = _embedding_gram(clouds, bandwidth)
        values = np.array(
            [
                _kernel_depth_from_gram(
                    gram, qi, [i for i in range(n) if i != qi]
                )
                for qi in range(n)
            ]
        )
        return make_report(values, method, threshold_quantile, excluded_self=True)

    cache = PairwiseTransport(clouds, threads=threads)
    cache.precompute()
    values = np.empty(n)
    for qi in range(n):
        rest = [i for i in range(n) if i != qi]
        if method == "wsd_discrete":
            values[qi] = _wsd_discrete_from_cache(cache, qi, rest)
        elif method == "lens":
            values[qi] = lens_depth(qi, clouds, cache=cache)
        else:
            values[qi] = metric_spatial_depth(qi, clouds, cache=cache)
    return make_report(values, method, threshold_quantile, excluded_self=True)
