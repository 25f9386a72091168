"""Leave-one-out cross-validation of the bandwidth ``h``.

The score of a bandwidth is the mean L2 error of predicting each response by
the conditional spatial median at its own covariate, estimated without that
observation.
"""
from __future__ import annotations

import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass
from enum import Enum

import numpy as np

from computations.covariance_basis import basis_dimension, eigenbasis, weighted_covariance
from computations.kernel_weights import (
    KernelSpec,
    covariate_distance_matrix,
    covariate_distances,
    pairwise_covariate_distances,
    weights_from_distances,
)
from computations.spatial_quantile_solver import QuantileProblem, SolverConfig, solve, weighted_median
from models.function_space import Curve, distance
from models.functional_sample import FunctionalSample
from utils.errors import AllInfeasible, DegenerateNeighborhood, FunctionalQuantileError, InvalidArgument
from utils.workers import parallel_map

logger = logging.getLogger(__name__)

MIN_NEIGHBORS = 3
AUTO_LEVELS = (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0)


class CvPredictor(Enum):
    SpatialMedian = "spatial_median"
    PointwiseMedian = "pointwise_median"
    Mean = "mean"


@dataclass(frozen=True)
class CVResult:
    h_opt: float
    scores: list[tuple[float, float]]
    infeasible: list[float]

    @property
    def best_score(self) -> float:
        return dict(self.scores)[self.h_opt]


def loo_median(
    sample: FunctionalSample,
    i: int,
    x0: Curve,
    h: float,
    spec: KernelSpec,
    config: SolverConfig | None = None,
    predictor: CvPredictor = CvPredictor.SpatialMedian,
    min_neighbors: int = MIN_NEIGHBORS,
    center: bool = False,
    distances: np.ndarray | None = None,
) -> Curve:
    """Conditional median at ``x0`` estimated without observation ``i``.

    Args:
        sample: Full sample.
        i: Observation left out.
        x0: Evaluation covariate, usually ``X_i``.
        h: Bandwidth.
        spec: Kernel.
        config: Solver stopping rules.
        predictor: Spatial median, pointwise median or kernel mean.
        min_neighbors: Smallest neighborhood that still counts as feasible.
        center: Fit the spatial median in ``mean + Z_n`` instead of ``Z_n``.
        distances: Distances from ``x0`` to every covariate of ``sample``,
            computed when omitted.

    Returns:
        The predicted response curve.

    Raises:
        DegenerateNeighborhood: if fewer than ``min_neighbors`` observations keep positive weight.
    """
    if not 0 <= i < sample.n:
        raise InvalidArgument(f"Observation index {i} is outside 0..{sample.n - 1}.")
    if distances is None:
        distances = covariate_distances(x0, sample.covariates)
    keep = np.delete(np.arange(sample.n), i)
    try:
        weights = weights_from_distances(np.asarray(distances)[keep], h, spec)
    except FunctionalQuantileError as exc:
        raise DegenerateNeighborhood(f"Leave-one-out neighborhood of observation {i} is empty.") from exc
    active = weights.active
    if active.size < min_neighbors:
        raise DegenerateNeighborhood(
            f"Leave-one-out neighborhood of observation {i} holds {active.size} < {min_neighbors} points."
        )

    grid = sample.response_grid
    responses = sample.response_values[keep]
    values = responses[active]
    w = weights.weights[active]
    if predictor is CvPredictor.Mean:
        return Curve(grid, (w / w.sum()) @ values)
    if predictor is CvPredictor.PointwiseMedian:
        return Curve(grid, np.array([weighted_median(values[:, k], w) for k in range(grid.count)]))

    cov = weighted_covariance(grid, responses, weights)
    basis = eigenbasis(cov, basis_dimension(cov))
    problem = QuantileProblem.from_values(grid, responses, np.zeros(basis.dimension), basis, weights, center)
    return solve(problem, config).curve


def cv_score(
    sample: FunctionalSample,
    h: float,
    spec: KernelSpec,
    config: SolverConfig | None = None,
    predictor: CvPredictor = CvPredictor.SpatialMedian,
    min_neighbors: int = MIN_NEIGHBORS,
    center: bool = False,
    distances: np.ndarray | None = None,
) -> float:
    """Mean leave-one-out prediction error, or ``inf`` when some observation cannot be predicted.

    ``distances`` is the square covariate distance matrix of ``sample``. It is
    computed when omitted and can be shared across bandwidths.
    """
    if not h > 0:
        raise InvalidArgument(f"Bandwidth must be positive, got {h}.")
    if distances is None:
        distances = covariate_distance_matrix(sample.covariates)
    errors = []
    for i in range(sample.n):
        try:
            fitted = loo_median(
                sample, i, sample.covariates[i], h, spec, config, predictor, min_neighbors, center, distances[i]
            )
        except FunctionalQuantileError as exc:
            logger.debug("Bandwidth %.6g infeasible at observation %d: %s", h, i, exc)
            return math.inf
        errors.append(distance(fitted, sample.responses[i]))
    return float(np.mean(errors))


def auto_candidates(sample: FunctionalSample) -> list[float]:
    """Deciles 0.1..0.9 and the maximum of the pairwise covariate distances."""
    distances = pairwise_covariate_distances(sample.covariates)
    if distances.size == 0 or distances.max() <= 0:
        raise InvalidArgument("Automatic bandwidth candidates need at least two distinct covariates.")
    levels = np.quantile(distances, AUTO_LEVELS)
    return sorted({float(h) for h in levels if h > 0})


def select_bandwidth(
    sample: FunctionalSample,
    candidates: Sequence[float] | str,
    spec: KernelSpec,
    config: SolverConfig | None = None,
    predictor: CvPredictor = CvPredictor.SpatialMedian,
    workers: int | None = None,
    center: bool = False,
) -> CVResult:
    """Choose the candidate bandwidth with the smallest finite CV score.

    Ties go to the smaller bandwidth.

    Args:
        sample: Observations to cross-validate on.
        candidates: Positive bandwidths, or ``"auto"`` for the deciles of the
            pairwise covariate distances.
        spec: Kernel.
        config: Solver stopping rules.
        predictor: Leave-one-out predictor.
        workers: Thread count over candidates. Results do not depend on it.
        center: Passed to the spatial median fits.

    Returns:
        The selected bandwidth with the full score trace.

    Raises:
        AllInfeasible: if no candidate has a finite score.
    """
    if isinstance(candidates, str):
        if candidates != "auto":
            raise InvalidArgument(f"Unknown candidate rule '{candidates}'.")
        grid = auto_candidates(sample)
    else:
        grid = sorted({float(h) for h in candidates})
    if not grid:
        raise InvalidArgument("At least one candidate bandwidth is required.")

    distances = covariate_distance_matrix(sample.covariates)
    scores = parallel_map(
        lambda h: cv_score(sample, h, spec, config, predictor, center=center, distances=distances), grid, workers
    )
    trace = list(zip(grid, scores))
    infeasible = [h for h, score in trace if not math.isfinite(score)]
    for h in infeasible:
        logger.warning("Bandwidth %.6g is infeasible (degenerate leave-one-out neighborhood).", h)

    feasible = [(score, h) for h, score in trace if math.isfinite(score)]
    if not feasible:
        raise AllInfeasible(f"None of the {len(grid)} candidate bandwidths is feasible.")
    best_score, h_opt = min(feasible)
    logger.info("Cross-validated bandwidth h=%.6g (score %.6g)", h_opt, best_score)
    return CVResult(h_opt, trace, infeasible)
