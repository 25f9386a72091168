"""Kernel weights ``w_i = K(d(x, X_i) / h)`` and neighborhoods ``C_n(x)``."""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np
from pydantic import BaseModel, Field
from scipy.spatial.distance import cdist, pdist

from models.function_space import Curve, stack_values, weighted_values
from utils.errors import EmptyNeighborhood, GridMismatch, InvalidArgument


class KernelKind(Enum):
    Indicator = "indicator"
    Epanechnikov = "epanechnikov"


class KernelSpec(BaseModel):
    """Kernel supported on [0, 1] and nonincreasing there."""

    kind: KernelKind = Field(
        default=KernelKind.Indicator,
        title="Kernel",
        description="Indicator of [0, 1] (default) or the decreasing half of the Epanechnikov kernel.",
    )


@dataclass(frozen=True)
class WeightVector:
    weights: np.ndarray
    total: float

    @classmethod
    def from_weights(cls, weights: np.ndarray) -> WeightVector:
        weights = np.asarray(weights, dtype=float)
        return cls(weights, float(weights.sum()))

    @property
    def active(self) -> np.ndarray:
        """Indices with positive weight."""
        return np.flatnonzero(self.weights > 0)

    @property
    def normalized(self) -> np.ndarray:
        return self.weights / self.total


def kernel_values(spec: KernelSpec, u: np.ndarray) -> np.ndarray:
    """Vectorised kernel evaluation; ``u`` must be nonnegative."""
    u = np.asarray(u, dtype=float)
    if np.any(u < 0) or np.any(np.isnan(u)):
        raise InvalidArgument("Kernel arguments must be nonnegative.")
    inside = u <= 1.0
    if spec.kind is KernelKind.Indicator:
        return inside.astype(float)
    return np.where(inside, 0.75 * (1.0 - u * u), 0.0)


def evaluate_kernel(spec: KernelSpec, u: float) -> float:
    """Kernel value ``K(u)`` at a single nonnegative argument.

    Args:
        spec: Kernel to evaluate.
        u: Scaled distance ``d / h``.

    Returns:
        ``K(u)``; zero for ``u > 1``.

    Raises:
        InvalidArgument: if ``u`` is negative or NaN.
    """
    return float(kernel_values(spec, np.array([u]))[0])


def covariate_distances(x0: Curve, covariates: list[Curve]) -> np.ndarray:
    """L2 distances ``d(x0, X_i)``."""
    grid, values = stack_values(covariates)
    if x0.grid != grid:
        raise GridMismatch(f"Evaluation point grid {x0.grid} differs from covariate grid {grid}.")
    return cdist(weighted_values(grid, x0.values[None, :]), weighted_values(grid, values))[0]


def covariate_distance_matrix(covariates: list[Curve]) -> np.ndarray:
    """Square matrix of L2 distances; row ``i`` equals ``covariate_distances(X_i, covariates)``."""
    grid, values = stack_values(covariates)
    scaled = weighted_values(grid, values)
    return cdist(scaled, scaled)


def pairwise_covariate_distances(covariates: list[Curve]) -> np.ndarray:
    """Condensed vector of all pairwise L2 distances between covariates."""
    grid, values = stack_values(covariates)
    return pdist(weighted_values(grid, values))


def weights_from_distances(distances: np.ndarray, h: float, spec: KernelSpec) -> WeightVector:
    """Kernel weights ``K(d_i / h)`` from precomputed covariate distances.

    Args:
        distances: Distances from the evaluation point to each covariate.
        h: Positive bandwidth.
        spec: Kernel.

    Returns:
        One weight per distance, with their total.

    Raises:
        InvalidArgument: if ``h`` is not positive.
        EmptyNeighborhood: if every weight is zero.
    """
    if not h > 0:
        raise InvalidArgument(f"Bandwidth must be positive, got {h}.")
    weights = WeightVector.from_weights(kernel_values(spec, np.asarray(distances) / h))
    if weights.total <= 0:
        raise EmptyNeighborhood(f"No covariate lies within bandwidth {h:g} of the evaluation point.")
    return weights


def compute_weights(x0: Curve, covariates: list[Curve], h: float, spec: KernelSpec) -> WeightVector:
    """Kernel weights of every covariate relative to ``x0``.

    Raises:
        EmptyNeighborhood: if every weight is zero.
    """
    return weights_from_distances(covariate_distances(x0, covariates), h, spec)


def neighborhood(x0: Curve, covariates: list[Curve], h: float) -> np.ndarray:
    """Indices ``i`` with ``d(x0, X_i) <= h`` (possibly empty)."""
    if h < 0:
        raise InvalidArgument(f"Bandwidth must be nonnegative, got {h}.")
    return np.flatnonzero(covariate_distances(x0, covariates) <= h)
