"""Kernels, covariate weights and neighborhoods."""

import numpy as np
import pytest

from computations.kernel_weights import (
    KernelKind,
    KernelSpec,
    compute_weights,
    covariate_distance_matrix,
    covariate_distances,
    evaluate_kernel,
    neighborhood,
)
from models.function_space import Curve, Grid
from utils.errors import EmptyNeighborhood, InvalidArgument

INDICATOR = KernelSpec()
EPANECHNIKOV = KernelSpec(kind=KernelKind.Epanechnikov)


def _constant_covariates(levels):
    """Constant curves on [0, 1]; their L2 distance to zero is the level."""
    grid = Grid(0.0, 1.0, 11)
    return grid.zeros(), [Curve(grid, np.full(grid.count, level)) for level in levels]


def test_kernel_values():
    assert evaluate_kernel(INDICATOR, 0.5) == 1.0
    assert evaluate_kernel(INDICATOR, 1.0) == 1.0
    assert evaluate_kernel(INDICATOR, 2.0) == 0.0
    assert evaluate_kernel(EPANECHNIKOV, 2.0) == 0.0
    assert evaluate_kernel(EPANECHNIKOV, 0.0) == 0.75
    with pytest.raises(InvalidArgument):
        evaluate_kernel(INDICATOR, -0.1)


def test_kernels_are_nonincreasing():
    u = np.linspace(0.0, 1.5, 301)
    for spec in (INDICATOR, EPANECHNIKOV):
        values = [evaluate_kernel(spec, x) for x in u]
        assert all(a >= b for a, b in zip(values, values[1:]))


def test_weights_for_three_distances():
    x0, covariates = _constant_covariates([0.1, 0.5, 2.0])
    weights = compute_weights(x0, covariates, 1.0, INDICATOR)
    assert weights.weights.tolist() == [1.0, 1.0, 0.0]
    assert weights.total == 2.0
    assert neighborhood(x0, covariates, 1.0).tolist() == [0, 1]


def test_large_bandwidth_weights_everything():
    x0, covariates = _constant_covariates([0.1, 0.5, 2.0, 3.0])
    weights = compute_weights(x0, covariates, 100.0, INDICATOR)
    assert weights.total == 4.0
    assert neighborhood(x0, covariates, 1e9).tolist() == [0, 1, 2, 3]


def test_empty_neighborhood():
    x0, covariates = _constant_covariates([0.5, 0.7])
    with pytest.raises(EmptyNeighborhood):
        compute_weights(x0, covariates, 0.1, INDICATOR)


def test_zero_bandwidth_neighborhood_is_identical_covariates():
    x0, covariates = _constant_covariates([0.0, 0.3, 0.0])
    assert neighborhood(x0, covariates, 0.0).tolist() == [0, 2]
    with pytest.raises(InvalidArgument):
        compute_weights(x0, covariates, 0.0, INDICATOR)


def test_indicator_weights_match_neighborhood(rng):
    x0, covariates = _constant_covariates(rng.uniform(0.0, 2.0, 30))
    for h in (0.2, 0.7, 1.3):
        weights = compute_weights(x0, covariates, h, INDICATOR)
        members = set(neighborhood(x0, covariates, h).tolist())
        assert set(np.flatnonzero(weights.weights == 1.0).tolist()) == members
        assert weights.total == len(members)


def test_doubling_bandwidth_never_decreases_weights(rng):
    x0, covariates = _constant_covariates(rng.uniform(0.0, 2.0, 30))
    for spec in (INDICATOR, EPANECHNIKOV):
        narrow = compute_weights(x0, covariates, 0.8, spec).weights
        wide = compute_weights(x0, covariates, 1.6, spec).weights
        assert np.all(wide >= narrow)


def test_distance_matrix_rows_match_single_point_distances(rng):
    grid = Grid(0.0, 1.0, 11)
    covariates = [Curve(grid, rng.standard_normal(grid.count)) for _ in range(6)]
    matrix = covariate_distance_matrix(covariates)
    assert matrix.shape == (6, 6)
    for i, x in enumerate(covariates):
        assert np.array_equal(matrix[i], covariate_distances(x, covariates))
    assert np.all(np.diag(matrix) == 0.0)
