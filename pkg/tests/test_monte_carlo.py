"""Monte-Carlo trend and consistency checks (``pytest -m slow``)."""

import numpy as np
import pytest

from computations.bandwidth_cv import select_bandwidth
from computations.depth_sets_spread import spread_profile
from computations.kernel_weights import KernelSpec
from computations.simulation import SimConfig, SimModel, simulate
from computations.spatial_quantile_solver import TauRule, conditional_quantile
from models.function_space import Curve, Grid, distance, norm

pytestmark = pytest.mark.slow

SPEC = KernelSpec()
GRID = Grid(0.0, 1.0, 26)
SEEDS = range(20)


def _trend(model, seed):
    sample = simulate(SimConfig(n=100, grid=GRID, seed=seed, model=model))
    cv = select_bandwidth(sample, "auto", SPEC, workers=4)
    return cv, spread_profile(sample, 0.5, cv.h_opt, SPEC, workers=4).trend()


def test_heteroscedastic_spread_increases_with_covariate_norm():
    trends = [_trend(SimModel.Heteroscedastic, seed)[1] for seed in SEEDS]
    assert np.nanmean([t["d2"] for t in trends]) >= 0.5
    assert np.nanmean([t["d1"] for t in trends]) >= 0.3


def test_homoscedastic_spread_has_no_trend_and_an_interior_bandwidth():
    runs = [_trend(SimModel.LocationScale, seed) for seed in SEEDS]
    assert abs(np.nanmean([trend["d2"] for _, trend in runs])) <= 0.3

    interior = 0
    for cv, _ in runs:
        scores = dict(cv.scores)
        first, last = cv.scores[0][0], cv.scores[-1][0]
        assert cv.best_score <= scores[first] and cv.best_score <= scores[last]
        interior += cv.h_opt < last
    assert interior > len(runs) / 2


def _fit_at_half(model, n, seed, center=False):
    sample = simulate(SimConfig(n=n, grid=GRID, seed=seed, model=model))
    x = Curve(GRID, 0.5 * np.exp(GRID.points))
    h = 1.79 * 0.5 * n ** (-1.0 / 3.0)
    return x, conditional_quantile(sample, x, TauRule.parse("0"), h, SPEC, center=center).curve


def _median_error(n, seed):
    # the location curve is not in the span of the Brownian eigenfunctions
    x, fitted = _fit_at_half(SimModel.LocationScale, n, seed, center=True)
    return distance(fitted, x)


def test_conditional_median_error_shrinks_with_sample_size():
    small = np.median([_median_error(200, seed) for seed in SEEDS])
    large = np.median([_median_error(2000, seed + 100) for seed in SEEDS])
    assert large <= 0.8 * small


def _median_norm(n, seed):
    return norm(_fit_at_half(SimModel.Heteroscedastic, n, seed)[1])


def test_heteroscedastic_median_norm_shrinks_with_sample_size():
    # zero is the conditional spatial median of ||x|| B
    small = np.median([_median_norm(200, seed) for seed in SEEDS])
    large = np.median([_median_norm(2000, seed + 100) for seed in SEEDS])
    assert large < small
