"""Kernel estimators of the conditional spatial distribution and spatial depth."""
from __future__ import annotations

import numpy as np

from computations.kernel_weights import KernelSpec, WeightVector, compute_weights
from models.function_space import Curve, Grid, norm
from models.functional_sample import FunctionalSample
from utils.errors import GridMismatch

ZERO_TOLERANCE = 1e-12


def unit_directions(grid: Grid, y: np.ndarray, responses: np.ndarray) -> np.ndarray:
    """Rows ``(y - Y_i) / ||y - Y_i||``, zero where the difference vanishes."""
    diffs = y[None, :] - responses
    lengths = np.sqrt(np.maximum(diffs**2 @ grid.weights, 0.0))
    scale = ZERO_TOLERANCE * (1.0 + float(np.sqrt(np.dot(grid.weights, y * y))))
    keep = lengths > scale
    units = np.zeros_like(diffs)
    units[keep] = diffs[keep] / lengths[keep, None]
    return units


def unit_direction(y: Curve, yi: Curve) -> Curve:
    """``(y - yi) / ||y - yi||`` with the convention that the zero vector maps to zero."""
    if y.grid != yi.grid:
        raise GridMismatch(f"Curves live on different grids: {y.grid} and {yi.grid}.")
    return Curve(y.grid, unit_directions(y.grid, y.values, yi.values[None, :])[0])


def weighted_spatial_distribution(grid: Grid, y: np.ndarray, responses: np.ndarray, weights: WeightVector) -> np.ndarray:
    active = weights.active
    units = unit_directions(grid, y, responses[active])
    return weights.weights[active] @ units / weights.total


def spatial_distribution_hat(y: Curve, x0: Curve, sample: FunctionalSample, h: float, spec: KernelSpec) -> Curve:
    """Kernel estimate of ``S(y | x0)``, the weighted mean of unit directions from each ``Y_i`` to ``y``."""
    if y.grid != sample.response_grid:
        raise GridMismatch(f"Response grid {sample.response_grid} differs from {y.grid}.")
    weights = compute_weights(x0, sample.covariates, h, spec)
    return Curve(y.grid, weighted_spatial_distribution(y.grid, y.values, sample.response_values, weights))


def spatial_depth_hat(y: Curve, x0: Curve, sample: FunctionalSample, h: float, spec: KernelSpec) -> float:
    """Kernel estimate of the conditional spatial depth ``1 - ||S(y | x0)||``."""
    return 1.0 - norm(spatial_distribution_hat(y, x0, sample, h, spec))


def response_depths(sample: FunctionalSample, weights: WeightVector) -> tuple[np.ndarray, np.ndarray]:
    """Depths of every positively weighted response under the given weights.

    Returns:
        tuple: indices of the positively weighted responses and their depths.
    """
    grid = sample.response_grid
    active = weights.active
    values = sample.response_values
    depths = np.empty(active.size)
    for position, i in enumerate(active):
        s = weighted_spatial_distribution(grid, values[i], values, weights)
        depths[position] = 1.0 - float(np.sqrt(max(np.dot(grid.weights, s * s), 0.0)))
    return active, depths
