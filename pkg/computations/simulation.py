"""Seeded generators for heteroscedastic and location-scale functional regression models.

Curves are generated in rescaled time ``s = (t - start) / (end - start)``, so
a grid over calendar years gives the same shapes as the unit grid. Norms are
still taken on the grid itself.

Every observation draws from its own child stream of
``numpy.random.SeedSequence(seed)``, so a sample is reproducible from
``(seed, n)`` and generation order does not matter.
"""
from __future__ import annotations

import math
from collections.abc import Callable
from enum import Enum

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator

from models.function_space import Curve, Grid, norm
from models.functional_sample import FunctionalSample
from utils.workers import parallel_map


class SimModel(Enum):
    Heteroscedastic = "hetero"
    LocationScale = "locscale"


def identity_location(x: Curve) -> Curve:
    return x


class SimConfig(BaseModel):
    """Parameters of a simulated functional sample."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    n: int = Field(default=100, ge=1, title="Sample size")
    grid: Grid = Field(default_factory=lambda: Grid(0.0, 1.0, 101), title="Grid shared by all curves")
    seed: int = Field(default=0, ge=0, title="Seed")
    model: SimModel = Field(default=SimModel.Heteroscedastic, title="Model")
    u_bounds: tuple[float, float] = Field(
        default=(0.0, 1.0),
        title="Range of U",
        description="U in X(t) = U exp(s) is uniform on this interval. Equal bounds fix U.",
    )
    location: Callable[[Curve], Curve] = Field(
        default=identity_location,
        title="Location m(x)",
        description="Conditional location of the location-scale model.",
    )
    scale: Callable[[Curve], float] | float = Field(
        default=1.0,
        title="Scale f(x)",
        description="Noise scale of the location-scale model: a constant or a function of the covariate.",
    )

    @field_validator("u_bounds")
    @classmethod
    def _ordered(cls, value: tuple[float, float]) -> tuple[float, float]:
        low, high = value
        if not (math.isfinite(low) and math.isfinite(high) and low <= high):
            raise ValueError(f"U bounds must be finite with low <= high, got {value}.")
        return value

    def scale_at(self, x: Curve) -> float:
        return float(self.scale(x)) if callable(self.scale) else float(self.scale)


def observation_streams(seed: int, n: int) -> list[np.random.Generator]:
    """Independent PCG64 generators, one per observation."""
    return [np.random.default_rng(child) for child in np.random.SeedSequence(seed).spawn(n)]


def brownian_path(grid: Grid, rng: np.random.Generator) -> Curve:
    """Standard Brownian motion in rescaled time, started at 0 at the first grid point.

    Args:
        grid: Grid to sample on. Its span is mapped onto [0, 1].
        rng: Stream the increments are drawn from.

    Returns:
        The path, with ``Var B(t_k) = k / (count - 1)``.
    """
    if grid.count == 1:
        return grid.zeros()
    increments = rng.standard_normal(grid.count - 1) * math.sqrt(1.0 / (grid.count - 1))
    return Curve(grid, np.concatenate(([0.0], np.cumsum(increments))))


def _covariate(grid: Grid, rng: np.random.Generator, bounds: tuple[float, float]) -> Curve:
    u = rng.uniform(*bounds)
    return Curve(grid, u * np.exp(grid.unit_points))


def gen_heteroscedastic(config: SimConfig, workers: int | None = 1) -> FunctionalSample:
    """``X(t) = U exp(s)`` and ``Y(t) = ||X|| B(s)``.

    U is uniform on [0, 1], B is a Brownian motion and ``s`` is rescaled time.

    Args:
        config: Sample size, grid and seed.
        workers: Thread count for drawing observations. Results do not depend on it.

    Returns:
        The simulated sample, labelled ``0..n-1``.
    """
    grid = config.grid

    def draw(rng: np.random.Generator) -> tuple[Curve, Curve]:
        x = _covariate(grid, rng, config.u_bounds)
        return x, brownian_path(grid, rng) * norm(x)

    pairs = parallel_map(draw, observation_streams(config.seed, config.n), workers)
    return FunctionalSample([x for x, _ in pairs], [y for _, y in pairs])


def gen_location_scale(config: SimConfig, workers: int | None = 1) -> FunctionalSample:
    """``Y = m(X) + f(X) G`` with Brownian noise ``G`` and covariates as in the heteroscedastic model.

    Args:
        config: Sample size, grid, seed, location ``m`` and scale ``f``.
        workers: Thread count for drawing observations. Results do not depend on it.

    Returns:
        The simulated sample, labelled ``0..n-1``.
    """
    grid = config.grid

    def draw(rng: np.random.Generator) -> tuple[Curve, Curve]:
        x = _covariate(grid, rng, config.u_bounds)
        noise = brownian_path(grid, rng)
        return x, config.location(x) + noise * config.scale_at(x)

    pairs = parallel_map(draw, observation_streams(config.seed, config.n), workers)
    return FunctionalSample([x for x, _ in pairs], [y for _, y in pairs])


def simulate(config: SimConfig, workers: int | None = 1) -> FunctionalSample:
    """Draw a sample from the model named by ``config.model``."""
    if config.model is SimModel.Heteroscedastic:
        return gen_heteroscedastic(config, workers)
    return gen_location_scale(config, workers)
