from __future__ import annotations

from collections.abc import Sequence
from functools import cached_property

import numpy as np

from models.function_space import Curve, Grid, norm, stack_values
from utils.errors import DimensionMismatch, InvalidArgument


class FunctionalSample:
    """Paired covariate and response curves ``(X_i, Y_i)``, i = 0..n-1."""

    def __init__(self, covariates: Sequence[Curve], responses: Sequence[Curve], labels: Sequence[str] | None = None):
        if len(covariates) != len(responses):
            raise DimensionMismatch(
                f"{len(covariates)} covariates but {len(responses)} responses were given."
            )
        if not covariates:
            raise InvalidArgument("A functional sample needs at least one observation.")

        self.covariates = list(covariates)
        self.responses = list(responses)
        self.covariate_grid, self.covariate_values = stack_values(self.covariates)
        self.response_grid, self.response_values = stack_values(self.responses)

        if labels is None:
            labels = [str(i) for i in range(len(self.covariates))]
        if len(labels) != len(self.covariates):
            raise DimensionMismatch("One label per observation is required.")
        self.labels = [str(label) for label in labels]

    @classmethod
    def from_arrays(
        cls,
        covariate_grid: Grid,
        covariate_values: np.ndarray,
        response_grid: Grid,
        response_values: np.ndarray,
        labels: Sequence[str] | None = None,
    ) -> FunctionalSample:
        """Sample from ``n x count`` value matrices, one row per observation."""
        covariate_values = np.atleast_2d(np.asarray(covariate_values, dtype=float))
        response_values = np.atleast_2d(np.asarray(response_values, dtype=float))
        return cls(
            [Curve(covariate_grid, row) for row in covariate_values],
            [Curve(response_grid, row) for row in response_values],
            labels,
        )

    def __len__(self) -> int:
        return len(self.covariates)

    @property
    def n(self) -> int:
        return len(self.covariates)

    @cached_property
    def covariate_norms(self) -> np.ndarray:
        return np.array([norm(x) for x in self.covariates])

    def subset(self, indices: Sequence[int] | np.ndarray) -> FunctionalSample:
        """Observations at ``indices``, in that order, with their labels."""
        indices = [int(i) for i in indices]
        return FunctionalSample(
            [self.covariates[i] for i in indices],
            [self.responses[i] for i in indices],
            [self.labels[i] for i in indices],
        )

    def index_of(self, label: str) -> int:
        try:
            return self.labels.index(str(label))
        except ValueError as exc:
            raise LookupError(f"No observation is labelled '{label}'.") from exc
