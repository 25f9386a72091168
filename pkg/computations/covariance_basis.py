"""Conditional covariance operator, its eigenbasis and the d_n truncation rule."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigh

from computations.kernel_weights import KernelSpec, WeightVector, compute_weights
from models.function_space import Basis, Curve, Grid, project, reconstruct
from models.functional_sample import FunctionalSample
from utils.errors import DegenerateNeighborhood, DimensionMismatch

logger = logging.getLogger(__name__)

# Eigenvalues below this fraction of the largest one do not define basis directions.
RELATIVE_EIGEN_FLOOR = 1e-12


@dataclass(frozen=True)
class CovarianceEstimate:
    grid: Grid
    matrix: np.ndarray
    mean: Curve
    neighborhood_count: int


def weighted_covariance(grid: Grid, values: np.ndarray, weights: WeightVector) -> CovarianceEstimate:
    """Kernel-weighted mean and covariance of sampled curves."""
    active = weights.active
    if active.size < 2:
        raise DegenerateNeighborhood(
            f"Covariance estimation needs at least 2 weighted observations, found {active.size}."
        )
    w = weights.weights[active] / weights.total
    y = values[active]
    mean = w @ y
    centered = y - mean
    matrix = (centered * w[:, None]).T @ centered
    matrix = 0.5 * (matrix + matrix.T)
    return CovarianceEstimate(grid, matrix, Curve(grid, mean), int(active.size))


def estimate_conditional_covariance(
    sample: FunctionalSample, x0: Curve, h: float, spec: KernelSpec
) -> CovarianceEstimate:
    """Covariance operator of Y given X = x0, weighted by ``K(d(x0, X_i) / h)``."""
    weights = compute_weights(x0, sample.covariates, h, spec)
    return weighted_covariance(sample.response_grid, sample.response_values, weights)


def eigenbasis(cov: CovarianceEstimate, d: int) -> Basis:
    """Leading ``d`` eigenfunctions of the covariance integral operator.

    The operator is discretised as ``W^{1/2} C W^{1/2}`` with trapezoid weights
    ``W``, so the returned functions are orthonormal under the grid inner
    product. Each function is signed so that its largest-magnitude entry is
    positive.
    """
    count = cov.grid.count
    if not 1 <= d <= count:
        raise DimensionMismatch(f"Requested {d} eigenfunctions on a grid of {count} points.")

    root = cov.grid.sqrt_weights
    operator = cov.matrix * np.outer(root, root)
    eigenvalues, vectors = eigh(operator, subset_by_index=[count - d, count - 1])
    eigenvalues = np.maximum(eigenvalues[::-1], 0.0)
    functions = (vectors[:, ::-1] / root[:, None]).T

    pivots = np.argmax(np.abs(functions), axis=1)
    signs = np.sign(functions[np.arange(d), pivots])
    signs[signs == 0] = 1.0
    return Basis(cov.grid, functions * signs[:, None], eigenvalues)


def choose_dn(neighborhood_count: int) -> int:
    """``floor(min(sqrt(m), 2 m^(1/3)))``, at least 1."""
    m = int(neighborhood_count)
    if m < 1:
        return 1
    # floor(2 m^(1/3)) is the integer cube root of 8m
    target = 8 * m
    root = int(round(target ** (1.0 / 3.0)))
    while root**3 > target:
        root -= 1
    while (root + 1) ** 3 <= target:
        root += 1
    return max(1, min(math.isqrt(m), root))


def basis_dimension(cov: CovarianceEstimate) -> int:
    """Dimension ``d`` of ``Z_n``: the d_n rule capped by the grid and the numerical rank."""
    root = cov.grid.sqrt_weights
    spectrum = np.linalg.eigvalsh(cov.matrix * np.outer(root, root))
    top = float(spectrum[-1]) if spectrum.size else 0.0
    rank = int(np.sum(spectrum > RELATIVE_EIGEN_FLOOR * top)) if top > 0 else 0
    return max(1, min(choose_dn(cov.neighborhood_count), cov.grid.count, rank))


def conditional_basis(
    sample: FunctionalSample, x0: Curve, h: float, spec: KernelSpec
) -> tuple[Basis, CovarianceEstimate]:
    """Estimate the conditional covariance at ``x0`` and return its truncated eigenbasis.

    Args:
        sample: Observations.
        x0: Evaluation covariate.
        h: Bandwidth.
        spec: Kernel.

    Returns:
        The leading ``d`` eigenfunctions (``d`` from ``basis_dimension``) and
        the covariance estimate they came from.

    Raises:
        EmptyNeighborhood: if no covariate lies within ``h`` of ``x0``.
        DegenerateNeighborhood: if fewer than two observations carry weight.
    """
    cov = estimate_conditional_covariance(sample, x0, h, spec)
    d = basis_dimension(cov)
    logger.debug("Conditional basis: %d neighbors, d_n=%d", cov.neighborhood_count, d)
    return eigenbasis(cov, d), cov


def truncate_response(y: Curve, basis: Basis) -> Curve:
    """Orthogonal projection of ``y`` onto the span of ``basis``."""
    return reconstruct(project(y, basis), basis)
