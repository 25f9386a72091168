"""Shared fixtures and sample builders."""

import numpy as np
import pytest

from models.function_space import Curve, Grid
from models.functional_sample import FunctionalSample


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


@pytest.fixture
def unit_grid():
    return Grid(0.0, 1.0, 101)


def scalar_sample(responses, covariates=None):
    """Sample with real-valued covariates and responses (count-1 grids)."""
    grid = Grid.scalar()
    responses = np.asarray(responses, dtype=float)
    covariates = np.zeros_like(responses) if covariates is None else np.asarray(covariates, dtype=float)
    return FunctionalSample.from_arrays(grid, covariates[:, None], grid, responses[:, None])


def random_curves(rng, grid, n, scale=1.0):
    return [Curve(grid, scale * rng.standard_normal(grid.count)) for _ in range(n)]
