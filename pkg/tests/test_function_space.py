"""Curves, grids, inner products and projections."""

import math

import numpy as np
import pytest

from computations.covariance_basis import CovarianceEstimate, eigenbasis
from models.function_space import (
    Basis,
    CoefVector,
    Curve,
    Grid,
    distance,
    inner_product,
    norm,
    project,
    reconstruct,
)
from utils.errors import DimensionMismatch, GridMismatch, InvalidArgument

from tests.conftest import random_curves


def test_trapezoid_weights_sum_to_domain_length():
    grid = Grid(2.0, 5.0, 31)
    assert grid.weights.sum() == pytest.approx(3.0, abs=1e-12)
    assert grid.weights[0] == pytest.approx(0.5 * grid.spacing)


def test_scalar_grid_has_unit_weight():
    grid = Grid.scalar()
    assert grid.count == 1
    assert grid.weights.tolist() == [1.0]
    assert norm(Curve(grid, [-3.0])) == 3.0


def test_grid_rejects_bad_shapes():
    with pytest.raises(InvalidArgument):
        Grid(0.0, 1.0, 0)
    with pytest.raises(InvalidArgument):
        Grid(1.0, 1.0, 5)


def test_distance_examples():
    grid = Grid(0.0, 1.0, 1001)
    f = grid.evaluate(lambda t: t)
    g = grid.evaluate(lambda t: -t)
    assert distance(f, f) == 0.0
    assert distance(grid.evaluate(lambda t: np.ones_like(t)), grid.zeros()) == pytest.approx(1.0, abs=1e-12)
    assert distance(f, g) == pytest.approx(2.0 / math.sqrt(3.0), abs=1e-6)


def test_grid_mismatch_is_rejected():
    f = Grid(0.0, 1.0, 11).zeros()
    g = Grid(0.0, 1.0, 12).zeros()
    with pytest.raises(GridMismatch):
        inner_product(f, g)
    with pytest.raises(GridMismatch):
        f + g


def test_curve_rejects_non_finite_values():
    with pytest.raises(InvalidArgument):
        Curve(Grid(0.0, 1.0, 3), [0.0, np.nan, 1.0])


def test_inner_product_properties(rng, unit_grid):
    for _ in range(20):
        f, g, h = random_curves(rng, unit_grid, 3)
        a = rng.normal()
        lhs = inner_product(f * a + g, h)
        rhs = a * inner_product(f, h) + inner_product(g, h)
        assert lhs == pytest.approx(rhs, abs=1e-10)
        assert abs(inner_product(f, g)) <= norm(f) * norm(g) + 1e-12
        assert distance(f, h) <= distance(f, g) + distance(g, h) + 1e-12


def _orthonormal_basis(rng, grid, d):
    values = np.vstack([c.values for c in random_curves(rng, grid, 8)])
    matrix = values.T @ values / 8
    cov = CovarianceEstimate(grid, matrix, grid.zeros(), 8)
    return eigenbasis(cov, d)


def test_projection_and_reconstruction(rng, unit_grid):
    basis = _orthonormal_basis(rng, unit_grid, 4)
    assert np.allclose(basis.gram(), np.eye(4), atol=1e-10)

    first = basis.functions[0]
    assert np.allclose(project(first, basis).coefficients, [1.0, 0.0, 0.0, 0.0], atol=1e-8)
    assert np.allclose(project(unit_grid.zeros(), basis).coefficients, 0.0)

    f = random_curves(rng, unit_grid, 1)[0]
    once = project(f, basis)
    twice = project(reconstruct(once, basis), basis)
    assert np.allclose(once.coefficients, twice.coefficients, atol=1e-10)

    c = CoefVector(rng.standard_normal(4))
    assert norm(reconstruct(c, basis)) == pytest.approx(c.norm(), abs=1e-8)
    assert reconstruct(CoefVector.unit(4, 2), basis) == Curve(unit_grid, basis.values[2])


def test_reconstruct_checks_dimension(rng, unit_grid):
    basis = _orthonormal_basis(rng, unit_grid, 2)
    with pytest.raises(DimensionMismatch):
        reconstruct(CoefVector([1.0, 2.0, 3.0]), basis)


def test_basis_needs_matching_grid():
    with pytest.raises(DimensionMismatch):
        Basis(Grid(0.0, 1.0, 5), np.ones((2, 4)))


def test_unit_points_rescale_the_grid():
    years = Grid(1985.0, 2010.0, 26)
    assert years.unit_points[0] == 0.0 and years.unit_points[-1] == 1.0
    assert np.allclose(years.unit_points * 25.0 + 1985.0, years.points)
    assert Grid.scalar().unit_points.tolist() == [0.0]
