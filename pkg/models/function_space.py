"""Discretised L2 function space: curves on a shared uniform grid.

Inner products use the trapezoid rule on the grid, so every L2 quantity in
the package (norms, distances, projections) is a weighted Euclidean quantity
on the sampled values.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from utils.errors import DimensionMismatch, GridMismatch, InvalidArgument


@dataclass(frozen=True)
class Grid:
    """Uniform grid ``t_k = start + k * (end - start) / (count - 1)``.

    A grid with ``count == 1`` is the scalar grid: curves on it are real
    numbers and the quadrature weight is 1.
    """

    start: float
    end: float
    count: int

    def __post_init__(self):
        if self.count < 1:
            raise InvalidArgument(f"Grid needs at least one point, got count={self.count}.")
        if self.count >= 2 and not self.end > self.start:
            raise InvalidArgument(f"Grid end ({self.end}) must exceed start ({self.start}).")
        if not (np.isfinite(self.start) and np.isfinite(self.end)):
            raise InvalidArgument("Grid endpoints must be finite.")

    @classmethod
    def scalar(cls) -> Grid:
        """Single-point grid on which curves are real numbers."""
        return cls(0.0, 0.0, 1)

    @cached_property
    def points(self) -> np.ndarray:
        if self.count == 1:
            return np.array([float(self.start)])
        return np.linspace(self.start, self.end, self.count)

    @property
    def spacing(self) -> float:
        if self.count == 1:
            return 1.0
        return (self.end - self.start) / (self.count - 1)

    @cached_property
    def weights(self) -> np.ndarray:
        """Trapezoid quadrature weights."""
        if self.count == 1:
            return np.ones(1)
        w = np.full(self.count, self.spacing)
        w[0] *= 0.5
        w[-1] *= 0.5
        return w

    @cached_property
    def sqrt_weights(self) -> np.ndarray:
        return np.sqrt(self.weights)

    @cached_property
    def unit_points(self) -> np.ndarray:
        """Grid points rescaled to [0, 1]; the scalar grid maps to 0."""
        if self.count == 1:
            return np.zeros(1)
        return np.linspace(0.0, 1.0, self.count)

    def zeros(self) -> Curve:
        return Curve(self, np.zeros(self.count))

    def evaluate(self, func) -> Curve:
        """Sample a vectorised callable ``func(t)`` on the grid."""
        return Curve(self, np.broadcast_to(func(self.points), (self.count,)))


@dataclass(frozen=True, eq=False)
class Curve:
    """A function sampled on a :class:`Grid`."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=float).reshape(-1)
        if values.shape[0] != self.grid.count:
            raise DimensionMismatch(
                f"Curve has {values.shape[0]} values but its grid has {self.grid.count} points."
            )
        if not np.all(np.isfinite(values)):
            raise InvalidArgument("Curve values must be finite.")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def _check(self, other: Curve) -> None:
        if self.grid != other.grid:
            raise GridMismatch(f"Curves live on different grids: {self.grid} and {other.grid}.")

    def __add__(self, other: Curve) -> Curve:
        self._check(other)
        return Curve(self.grid, self.values + other.values)

    def __sub__(self, other: Curve) -> Curve:
        self._check(other)
        return Curve(self.grid, self.values - other.values)

    def __mul__(self, scalar: float) -> Curve:
        return Curve(self.grid, self.values * float(scalar))

    __rmul__ = __mul__

    def __truediv__(self, scalar: float) -> Curve:
        return Curve(self.grid, self.values / float(scalar))

    def __neg__(self) -> Curve:
        return Curve(self.grid, -self.values)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Curve):
            return NotImplemented
        return self.grid == other.grid and np.array_equal(self.values, other.values)

    __hash__ = None  # type: ignore[assignment]


@dataclass(frozen=True, eq=False)
class CoefVector:
    """Coordinates of an element of a finite-dimensional subspace in a :class:`Basis`."""

    coefficients: np.ndarray

    def __post_init__(self):
        coefficients = np.array(self.coefficients, dtype=float).reshape(-1)
        if not np.all(np.isfinite(coefficients)):
            raise InvalidArgument("Coefficient vectors must be finite.")
        coefficients.setflags(write=False)
        object.__setattr__(self, "coefficients", coefficients)

    def __len__(self) -> int:
        return self.coefficients.shape[0]

    def norm(self) -> float:
        return float(np.linalg.norm(self.coefficients))

    def __neg__(self) -> CoefVector:
        return CoefVector(-self.coefficients)

    @classmethod
    def unit(cls, dimension: int, k: int, scale: float = 1.0) -> CoefVector:
        c = np.zeros(dimension)
        c[k] = scale
        return cls(c)


@dataclass(frozen=True, eq=False)
class Basis:
    """Orthonormal functions ``e_1..e_d`` with their eigenvalues.

    ``values`` holds the functions as rows of a ``d x grid.count`` matrix.
    """

    grid: Grid
    values: np.ndarray
    eigenvalues: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        values = np.atleast_2d(np.array(self.values, dtype=float))
        if values.shape[1] != self.grid.count:
            raise DimensionMismatch(
                f"Basis functions have {values.shape[1]} values but the grid has {self.grid.count} points."
            )
        eigenvalues = (
            np.zeros(values.shape[0]) if self.eigenvalues is None else np.array(self.eigenvalues, dtype=float)
        )
        if eigenvalues.shape[0] != values.shape[0]:
            raise DimensionMismatch("Basis needs one eigenvalue per function.")
        values.setflags(write=False)
        eigenvalues.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "eigenvalues", eigenvalues)

    @property
    def dimension(self) -> int:
        return self.values.shape[0]

    @property
    def functions(self) -> list[Curve]:
        return [Curve(self.grid, row) for row in self.values]

    @cached_property
    def projector(self) -> np.ndarray:
        """Matrix ``P`` with ``coefficients = P @ values`` for any curve values."""
        return self.values * self.grid.weights

    def gram(self) -> np.ndarray:
        """Matrix of pairwise inner products of the basis functions."""
        return self.projector @ self.values.T


def _shared_grid(f: Curve, g: Curve) -> Grid:
    if f.grid != g.grid:
        raise GridMismatch(f"Curves live on different grids: {f.grid} and {g.grid}.")
    return f.grid


def inner_product(f: Curve, g: Curve) -> float:
    """Trapezoid approximation of the integral of ``f * g``."""
    grid = _shared_grid(f, g)
    return float(np.dot(grid.weights, f.values * g.values))


def norm(f: Curve) -> float:
    """L2 norm of ``f`` under the trapezoid rule.

    Args:
        f: Curve to measure.

    Returns:
        ``sqrt(<f, f>)``. On the scalar grid this is ``|f|``.
    """
    return float(np.sqrt(max(np.dot(f.grid.weights, f.values * f.values), 0.0)))


def distance(f: Curve, g: Curve) -> float:
    """L2 metric ``norm(f - g)``."""
    _shared_grid(f, g)
    return float(np.sqrt(np.dot(f.grid.weights, (f.values - g.values) ** 2)))


def project(f: Curve, basis: Basis) -> CoefVector:
    """Coordinates ``<f, e_k>`` of ``f`` in ``basis``."""
    if f.grid != basis.grid:
        raise GridMismatch(f"Curve grid {f.grid} differs from basis grid {basis.grid}.")
    return CoefVector(basis.projector @ f.values)


def reconstruct(c: CoefVector, basis: Basis) -> Curve:
    """The curve ``sum_k c_k e_k``."""
    if len(c) != basis.dimension:
        raise DimensionMismatch(f"{len(c)} coefficients given for a basis of dimension {basis.dimension}.")
    return Curve(basis.grid, c.coefficients @ basis.values)


def stack_values(curves: list[Curve]) -> tuple[Grid, np.ndarray]:
    """Stack curves sharing one grid into an ``n x count`` matrix."""
    if not curves:
        raise InvalidArgument("At least one curve is required.")
    grid = curves[0].grid
    for curve in curves[1:]:
        if curve.grid != grid:
            raise GridMismatch(f"Curves live on different grids: {grid} and {curve.grid}.")
    return grid, np.vstack([curve.values for curve in curves])


def weighted_values(grid: Grid, values: np.ndarray) -> np.ndarray:
    """Scale sampled values by the square-root quadrature weights.

    Euclidean distances between rows of the result are L2 distances between
    the original curves, which lets scipy's distance routines do the work.
    """
    return np.asarray(values, dtype=float) * grid.sqrt_weights
