import math

import numpy as np
import pytest
from pydantic import ValidationError

from computations.simulation import (
    SimConfig,
    SimModel,
    brownian_path,
    gen_heteroscedastic,
    gen_location_scale,
    observation_streams,
    simulate,
)
from models.function_space import Curve, Grid, norm


def test_brownian_path_starts_at_zero(rng, unit_grid):
    path = brownian_path(unit_grid, rng)
    assert path.values[0] == 0.0
    assert path.grid == unit_grid


def test_brownian_covariance_structure():
    grid = Grid(0.0, 1.0, 3)
    paths = np.array([brownian_path(grid, rng).values for rng in observation_streams(7, 10000)])
    assert np.var(paths[:, 2]) == pytest.approx(1.0, abs=0.05)
    assert np.cov(paths[:, 1], paths[:, 2])[0, 1] == pytest.approx(0.5, abs=0.05)


def test_heteroscedastic_norm_ratio():
    grid = Grid(0.0, 1.0, 1001)
    sample = gen_heteroscedastic(SimConfig(n=20, grid=grid, seed=3))
    expected = math.sqrt((math.e**2 - 1.0) / 2.0)
    for x in sample.covariates:
        u = x.values[0]
        assert norm(x) / u == pytest.approx(expected, rel=1e-4)
        assert np.allclose(x.values, u * np.exp(grid.points))


def test_seed_determinism():
    config = SimConfig(n=15, grid=Grid(0.0, 1.0, 21), seed=42)
    first, second = simulate(config), simulate(config)
    assert np.array_equal(first.covariate_values, second.covariate_values)
    assert np.array_equal(first.response_values, second.response_values)

    other = simulate(config.model_copy(update={"seed": 43}))
    assert not np.array_equal(first.response_values, other.response_values)


def test_prefix_stability():
    grid = Grid(0.0, 1.0, 21)
    small = simulate(SimConfig(n=5, grid=grid, seed=1))
    large = simulate(SimConfig(n=10, grid=grid, seed=1))
    assert np.array_equal(small.response_values, large.response_values[:5])


def test_location_scale_without_noise():
    grid = Grid(0.0, 1.0, 21)
    config = SimConfig(
        n=10,
        grid=grid,
        seed=4,
        model=SimModel.LocationScale,
        location=lambda x: x * 2.0,
        scale=0.0,
    )
    sample = gen_location_scale(config)
    assert np.allclose(sample.response_values, 2.0 * sample.covariate_values)


def test_location_scale_with_covariate_dependent_scale():
    grid = Grid(0.0, 1.0, 21)
    unit = SimConfig(n=200, grid=grid, seed=8, model=SimModel.LocationScale)
    scaled = unit.model_copy(update={"scale": lambda x: 3.0 * norm(x)})
    base, sample = simulate(unit), simulate(scaled)

    residuals = sample.response_values - sample.covariate_values
    noise = base.response_values - base.covariate_values
    norms = sample.covariate_norms
    assert np.all(residuals[:, 0] == 0.0)
    # same streams, so the noise paths match and only their scale changes
    assert np.allclose(residuals, 3.0 * norms[:, None] * noise, atol=1e-12)
    assert np.var(residuals[:, -1] / (3.0 * norms)) == pytest.approx(1.0, abs=0.35)

    high = norms > np.median(norms)
    spread = np.linalg.norm(residuals, axis=1)
    assert spread[high].mean() > spread[~high].mean()


def test_zero_covariate_gives_zero_response():
    config = SimConfig(n=5, grid=Grid(0.0, 1.0, 21), seed=6, u_bounds=(0.0, 0.0))
    sample = gen_heteroscedastic(config)
    assert np.all(sample.covariate_values == 0.0)
    assert np.all(sample.response_values == 0.0)


def test_u_bounds_must_be_ordered():
    with pytest.raises(ValidationError):
        SimConfig(u_bounds=(1.0, 0.0))


def test_pure_brownian_responses_have_zero_mean():
    grid = Grid(0.0, 1.0, 21)
    config = SimConfig(
        n=10000,
        grid=grid,
        seed=12,
        model=SimModel.LocationScale,
        location=lambda x: x.grid.zeros(),
        scale=1.0,
    )
    sample = gen_location_scale(config)
    assert np.max(np.abs(sample.response_values.mean(axis=0))) <= 0.05


@pytest.mark.parametrize("model", list(SimModel))
def test_calendar_grid_matches_the_unit_grid(model):
    years = Grid(1985.0, 2010.0, 26)
    unit = Grid(0.0, 1.0, 26)
    on_years = simulate(SimConfig(n=30, grid=years, seed=21, model=model))
    on_unit = simulate(SimConfig(n=30, grid=unit, seed=21, model=model))

    assert np.all(np.isfinite(on_years.response_values))
    assert np.allclose(on_years.covariate_values, on_unit.covariate_values, rtol=1e-14, atol=0.0)
    # the year grid is 25 times longer, so norms grow by a factor 5
    factor = 5.0 if model is SimModel.Heteroscedastic else 1.0
    assert np.allclose(on_years.response_values, factor * on_unit.response_values, rtol=1e-12, atol=1e-12)


def test_workers_do_not_change_the_sample():
    config = SimConfig(n=40, grid=Grid(0.0, 1.0, 51), seed=99)
    serial = gen_heteroscedastic(config, workers=1)
    threaded = gen_heteroscedastic(config, workers=4)
    assert np.array_equal(serial.response_values, threaded.response_values)
    assert np.array_equal(serial.covariate_values, threaded.covariate_values)


def test_scalar_grid_gives_zero_responses():
    sample = simulate(SimConfig(n=3, grid=Grid.scalar(), seed=0))
    assert np.all(sample.response_values == 0.0)
    assert isinstance(sample.covariates[0], Curve)
