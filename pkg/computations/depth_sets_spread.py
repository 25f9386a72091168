"""Conditional maximal depth sets and the spread measures D1 and D2."""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import pdist
from scipy.stats import rankdata, spearmanr

from computations.conditional_estimators import response_depths
from computations.covariance_basis import conditional_basis
from computations.kernel_weights import KernelSpec, WeightVector, compute_weights
from computations.spatial_quantile_solver import QuantileProblem, SolverConfig, TauRule, solve
from models.function_space import Basis, CoefVector, Curve, distance, weighted_values
from models.functional_sample import FunctionalSample
from utils.errors import FunctionalQuantileError, InvalidP
from utils.workers import parallel_map

logger = logging.getLogger(__name__)

# Depths closer than this are ordered by index.
DEPTH_DECIMALS = 12


@dataclass(frozen=True, eq=False)
class DepthSetResult:
    ordered_indices: np.ndarray
    depths: np.ndarray
    cutoff: int
    p: float
    d1: float

    @property
    def selected(self) -> np.ndarray:
        """Sample indices of the maximal depth set."""
        return self.ordered_indices[: self.cutoff]

    def envelope(self, sample: FunctionalSample) -> tuple[Curve, Curve]:
        """Pointwise lower and upper boundaries of the selected responses."""
        members = sample.response_values[self.selected]
        return (
            Curve(sample.response_grid, members.min(axis=0)),
            Curve(sample.response_grid, members.max(axis=0)),
        )


def _order(sample: FunctionalSample, weights: WeightVector) -> tuple[np.ndarray, np.ndarray]:
    indices, depths = response_depths(sample, weights)
    # lexsort: last key is primary
    order = np.lexsort((indices, -np.round(depths, DEPTH_DECIMALS)))
    return indices[order], depths[order]


def order_by_depth(sample: FunctionalSample, x0: Curve, h: float, spec: KernelSpec) -> tuple[np.ndarray, np.ndarray]:
    """Positively weighted responses sorted by conditional depth, deepest first.

    Ties are broken by ascending sample index.
    """
    return _order(sample, compute_weights(x0, sample.covariates, h, spec))


def _max_pairwise_distance(sample: FunctionalSample, indices: np.ndarray) -> float:
    if indices.size < 2:
        return 0.0
    values = weighted_values(sample.response_grid, sample.response_values[indices])
    return float(pdist(values).max())


def maximal_depth_set(sample: FunctionalSample, x0: Curve, p: float, h: float, spec: KernelSpec) -> DepthSetResult:
    """The deepest responses accumulating conditional mass ``p``.

    The cutoff ``i_p`` is the smallest ``k`` such that the normalised kernel
    weights of the ``k`` deepest responses sum to at least ``p``.
    """
    if not 0.0 < p < 1.0:
        raise InvalidP(f"Mass level p must lie in (0, 1), got {p}.")
    weights = compute_weights(x0, sample.covariates, h, spec)
    ordered, depths = _order(sample, weights)

    cumulative = np.cumsum(weights.weights[ordered]) / weights.total
    cutoff = int(np.searchsorted(cumulative, p - 1e-12)) + 1
    cutoff = min(cutoff, ordered.size)

    result = DepthSetResult(ordered, depths, cutoff, float(p), 0.0)
    return DepthSetResult(ordered, depths, cutoff, float(p), d1_spread(result, sample))


def d1_spread(result: DepthSetResult, sample: FunctionalSample) -> float:
    """Diameter of the maximal depth set (0 for a singleton)."""
    return _max_pairwise_distance(sample, result.selected)


def d2_spread(
    sample: FunctionalSample,
    x0: Curve,
    tau: CoefVector,
    basis: Basis,
    h: float,
    spec: KernelSpec,
    config: SolverConfig | None = None,
    center: bool = False,
) -> float:
    """Distance between the conditional quantiles at ``tau`` and ``-tau``.

    Both quantiles share the kernel weights and ``basis``. Centring shifts
    them by the same mean, so it does not change the result.
    """
    weights = compute_weights(x0, sample.covariates, h, spec)
    upper = solve(QuantileProblem.from_sample(sample, x0, tau, basis, h, spec, center, weights), config)
    lower = solve(QuantileProblem.from_sample(sample, x0, -tau, basis, h, spec, center, weights), config)
    return distance(upper.curve, lower.curve)


@dataclass(frozen=True, eq=False)
class SpreadProfile:
    """Spread measures at every covariate curve, ordered by covariate-norm rank.

    Missing points carry NaN and are listed in ``missing`` by sample index.
    """

    sample_indices: np.ndarray
    covariate_ranks: np.ndarray
    d1_values: np.ndarray
    d2_values: np.ndarray
    missing: tuple[int, ...] = ()

    def trend(self) -> dict[str, float]:
        """Spearman correlations of D1 and D2 with the covariate-norm rank."""
        result = {}
        for name, values in (("d1", self.d1_values), ("d2", self.d2_values)):
            keep = np.isfinite(values)
            if keep.sum() < 3 or np.ptp(values[keep]) == 0:
                result[name] = float("nan")
                continue
            result[name] = float(spearmanr(self.covariate_ranks[keep], values[keep])[0])
        return result


def _spread_at(
    sample: FunctionalSample,
    index: int,
    p: float,
    tau_rule: TauRule,
    h: float,
    spec: KernelSpec,
    config: SolverConfig,
    center: bool,
) -> tuple[float, float]:
    x0 = sample.covariates[index]
    basis, _ = conditional_basis(sample, x0, h, spec)
    d1 = maximal_depth_set(sample, x0, p, h, spec).d1
    d2 = d2_spread(sample, x0, tau_rule.coefficients_for(basis.dimension), basis, h, spec, config, center)
    return d1, d2


def spread_profile(
    sample: FunctionalSample,
    p: float,
    h: float,
    spec: KernelSpec,
    config: SolverConfig | None = None,
    tau_rule: TauRule | None = None,
    workers: int | None = None,
    center: bool = False,
) -> SpreadProfile:
    """D1(p | X_i) and D2(tau | X_i) at every covariate curve.

    ``tau_rule`` defaults to ``0.5 u1``: half the first eigenfunction of the
    conditional covariance at each point. Points whose neighborhood cannot
    support the estimators are recorded as missing.

    Args:
        sample: Observations; every covariate is an evaluation point.
        p: Mass level of the depth sets behind D1, in (0, 1).
        h: Bandwidth.
        spec: Kernel.
        config: Solver stopping rules for D2.
        tau_rule: Quantile index of D2.
        workers: Thread count. Results do not depend on it.
        center: Passed to the D2 quantile fits.

    Returns:
        The profile ordered by covariate-norm rank, NaN at missing points.

    Raises:
        InvalidP: if ``p`` is outside (0, 1).
    """
    if not 0.0 < p < 1.0:
        raise InvalidP(f"Mass level p must lie in (0, 1), got {p}.")
    config = config or SolverConfig()
    tau_rule = tau_rule or TauRule("first_component", scale=0.5)

    def evaluate(index: int) -> tuple[float, float] | None:
        try:
            return _spread_at(sample, index, p, tau_rule, h, spec, config, center)
        except FunctionalQuantileError as exc:
            logger.warning("Spread at observation %s is missing: %s", sample.labels[index], exc)
            return None

    results = parallel_map(evaluate, range(sample.n), workers)

    ranks = rankdata(sample.covariate_norms, method="ordinal").astype(int)
    order = np.argsort(ranks, kind="stable")
    d1 = np.array([np.nan if results[i] is None else results[i][0] for i in order])
    d2 = np.array([np.nan if results[i] is None else results[i][1] for i in order])
    missing = tuple(int(i) for i in order if results[i] is None)
    return SpreadProfile(order, ranks[order], d1, d2, missing)


def equidistant_rank_points(sample: FunctionalSample, count: int = 6) -> list[int]:
    """Sample indices of ``count`` covariates with equidistant ranks in the norm ordering."""
    order = np.argsort(sample.covariate_norms, kind="stable")
    count = max(1, min(count, sample.n))
    positions = np.unique(np.round(np.linspace(0, sample.n - 1, count)).astype(int))
    return [int(order[k]) for k in positions]
