"""Conditional sample spatial quantiles in a finite-dimensional span ``Z_n``.

The quantile minimises::

    g(Q) = sum_i w_i ||Q - Y_i|| / sum_i w_i - <tau, Q>

over coordinates in an orthonormal basis. The objective is not differentiable
at the data points, so every distinct response is first checked as a
candidate minimiser. Only if none qualifies is the stationarity equation
solved with a damped Newton-Raphson iteration.
"""
from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from numpy.linalg import LinAlgError
from pydantic import BaseModel, Field
from scipy.linalg import cho_factor, cho_solve

from computations.covariance_basis import conditional_basis
from computations.kernel_weights import KernelSpec, WeightVector, compute_weights
from models.function_space import Basis, CoefVector, Curve, Grid, reconstruct
from models.functional_sample import FunctionalSample
from utils.errors import DimensionMismatch, InvalidArgument, NotDifferentiable, SingularHessian

logger = logging.getLogger(__name__)

# Objectives closer than this (relative) are treated as ties.
TIE_TOLERANCE = 1e-12
# Slack on both sides of the subgradient inequalities.
CERTIFICATE_SLACK = 1e-12
# Objective values within this (relative) margin of the record count as no increase.
OBJECTIVE_SLACK = 1e-13
MAX_HALVINGS = 60
# Candidate rows tested together; bounds the rows x responses x d work array.
CANDIDATE_BLOCK = 128
RIDGE_DOUBLINGS = 20


class FitStatus(Enum):
    CandidatePoint = "candidate_point"
    NewtonConverged = "newton_converged"
    MaxIterations = "max_iterations"


class SolverConfig(BaseModel):
    """Stopping rules of the quantile solver."""

    max_iterations: int = Field(default=200, ge=1, title="Maximum Newton iterations")
    step_tol: float = Field(
        default=1e-8,
        gt=0,
        title="Step tolerance",
        description="Stop when an undamped step is shorter than step_tol * (1 + ||Q||).",
    )
    grad_tol: float = Field(default=1e-8, gt=0, title="Gradient tolerance")
    coincidence_tol: float = Field(
        default=1e-10,
        gt=0,
        title="Coincidence tolerance",
        description="Points closer than this are treated as the same point.",
    )


def as_coefficients(q: CoefVector | np.ndarray) -> np.ndarray:
    """Flat float array of basis coordinates."""
    if isinstance(q, CoefVector):
        return q.coefficients
    return np.asarray(q, dtype=float).reshape(-1)


@dataclass(frozen=True, eq=False)
class QuantileProblem:
    """Working state of one quantile computation.

    ``responses`` holds the coordinates of the truncated responses, one row per
    observation. ``indices`` maps rows back to the observations of the sample
    they were built from. ``offset`` is added back to the fitted curve when the
    responses were centred before projection.
    """

    tau: np.ndarray
    responses: np.ndarray
    weights: WeightVector
    basis: Basis | None = None
    offset: Curve | None = None
    indices: np.ndarray | None = field(default=None)

    def __post_init__(self):
        tau = as_coefficients(self.tau)
        responses = np.atleast_2d(np.asarray(self.responses, dtype=float))
        if responses.ndim != 2 or responses.shape[1] != tau.shape[0]:
            raise DimensionMismatch(
                f"tau has dimension {tau.shape[0]} but responses have shape {responses.shape}."
            )
        if self.weights.weights.shape[0] != responses.shape[0]:
            raise DimensionMismatch("One weight per response row is required.")
        if not np.linalg.norm(tau) < 1.0:
            raise InvalidArgument(f"The quantile index must satisfy ||tau|| < 1, got {np.linalg.norm(tau):.6g}.")
        if not self.weights.total > 0:
            raise InvalidArgument("Quantile problems need a positive total weight.")
        if self.basis is not None and self.basis.dimension != tau.shape[0]:
            raise DimensionMismatch(
                f"Basis dimension {self.basis.dimension} differs from tau dimension {tau.shape[0]}."
            )
        indices = np.arange(responses.shape[0]) if self.indices is None else np.asarray(self.indices, dtype=int)
        object.__setattr__(self, "tau", tau)
        object.__setattr__(self, "responses", responses)
        object.__setattr__(self, "indices", indices)

    @property
    def dimension(self) -> int:
        return self.tau.shape[0]

    @property
    def normalized_weights(self) -> np.ndarray:
        return self.weights.normalized

    @classmethod
    def from_sample(
        cls,
        sample: FunctionalSample,
        x0: Curve,
        tau: CoefVector | np.ndarray,
        basis: Basis,
        h: float,
        spec: KernelSpec,
        center: bool = False,
        weights: WeightVector | None = None,
    ) -> QuantileProblem:
        """Build the problem for ``Q(tau | x0)`` from the positively weighted observations.

        By default the rows are the coordinates of the responses in ``basis``,
        so the fitted quantile lies in the span of ``basis``.

        Args:
            sample: Observations to weight.
            x0: Evaluation covariate.
            tau: Quantile index in basis coordinates.
            basis: Orthonormal basis of the quantile space.
            h: Bandwidth.
            spec: Kernel.
            center: Centre the responses at their kernel-weighted mean before
                projection and carry the mean as ``offset``. The quantile then
                lies in ``mean + span(basis)``.
            weights: Precomputed kernel weights of ``sample`` at ``x0``.

        Returns:
            The problem over the positively weighted observations.
        """
        if weights is None:
            weights = compute_weights(x0, sample.covariates, h, spec)
        return cls.from_values(sample.response_grid, sample.response_values, tau, basis, weights, center)

    @classmethod
    def from_values(
        cls,
        grid: Grid,
        responses: np.ndarray,
        tau: CoefVector | np.ndarray,
        basis: Basis,
        weights: WeightVector,
        center: bool = False,
    ) -> QuantileProblem:
        """Problem over the rows of ``responses`` that carry positive weight."""
        active = weights.active
        w = weights.weights[active]
        values = responses[active]
        offset = None
        if center:
            mean = (w / w.sum()) @ values
            offset = Curve(grid, mean)
            values = values - mean
        coordinates = values @ basis.projector.T
        return cls(as_coefficients(tau), coordinates, WeightVector.from_weights(w), basis, offset, active)

    def curve(self, q: CoefVector | np.ndarray) -> Curve | None:
        """Function-space curve of coordinates ``q`` (``None`` without a basis)."""
        if self.basis is None:
            return None
        curve = reconstruct(CoefVector(as_coefficients(q)), self.basis)
        return curve if self.offset is None else curve + self.offset


@dataclass(frozen=True, eq=False)
class QuantileFit:
    point: CoefVector
    curve: Curve | None
    status: FitStatus
    iterations: int
    final_gradient_norm: float
    objective: float
    candidate_index: int | None = None
    sample_index: int | None = None


def _distances(problem: QuantileProblem, q: np.ndarray) -> np.ndarray:
    return np.linalg.norm(q[None, :] - problem.responses, axis=1)


def _coincident(problem: QuantileProblem, q: np.ndarray, config: SolverConfig) -> int | None:
    """Index of the weighted response closest to ``q`` if within tolerance."""
    dists = _distances(problem, q)
    dists[problem.weights.weights <= 0] = np.inf
    nearest = int(np.argmin(dists))
    return nearest if dists[nearest] <= config.coincidence_tol else None


def objective(problem: QuantileProblem, q: CoefVector | np.ndarray) -> float:
    """The quantile objective ``g(q)``."""
    q = as_coefficients(q)
    if q.shape[0] != problem.dimension:
        raise DimensionMismatch(f"Point has dimension {q.shape[0]}, problem has {problem.dimension}.")
    return float(problem.normalized_weights @ _distances(problem, q) - problem.tau @ q)


def _gradient(problem: QuantileProblem, q: np.ndarray, config: SolverConfig) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    hit = _coincident(problem, q, config)
    if hit is not None:
        raise NotDifferentiable(hit)
    diffs = q[None, :] - problem.responses
    radii = np.linalg.norm(diffs, axis=1)
    w = problem.normalized_weights
    return w @ (diffs / radii[:, None]) - problem.tau, diffs, radii


def gradient(problem: QuantileProblem, q: CoefVector | np.ndarray, config: SolverConfig | None = None) -> CoefVector:
    """Frechet derivative of the objective at a non-data point ``q``.

    Raises:
        NotDifferentiable: if ``q`` coincides with a weighted response.
    """
    config = config or SolverConfig()
    return CoefVector(_gradient(problem, as_coefficients(q), config)[0])


def _partition(problem: QuantileProblem, i: int, config: SolverConfig) -> tuple[np.ndarray, np.ndarray]:
    """Unit directions from every response to ``Y_i`` and the mask of ``J_i``."""
    diffs = problem.responses[i][None, :] - problem.responses
    radii = np.linalg.norm(diffs, axis=1)
    same = radii <= config.coincidence_tol
    units = np.zeros_like(diffs)
    units[~same] = diffs[~same] / radii[~same, None]
    return units, same


def candidate_check(problem: QuantileProblem, i: int, config: SolverConfig | None = None) -> bool:
    """Per-point inequality for ``Y_i`` to be the sample quantile.

    True iff ``||sum_{j not in J_i} w_j (u_ij - tau)|| <= (1 + ||tau||) sum_{j in J_i} w_j``.
    """
    config = config or SolverConfig()
    units, same = _partition(problem, i, config)
    w = problem.normalized_weights
    outside = ~same
    lhs = np.linalg.norm(w[outside] @ (units[outside] - problem.tau[None, :]))
    rhs = (1.0 + np.linalg.norm(problem.tau)) * w[same].sum()
    return bool(lhs <= rhs + CERTIFICATE_SLACK)


def _subgradient_residual(problem: QuantileProblem, i: int, config: SolverConfig) -> float:
    units, same = _partition(problem, i, config)
    w = problem.normalized_weights
    outside = ~same
    pull = np.linalg.norm(w[outside] @ units[outside] - problem.tau)
    return float(max(pull - w[same].sum(), 0.0))


def subgradient_certificate(problem: QuantileProblem, i: int, config: SolverConfig | None = None) -> bool:
    """Exact optimality of ``Y_i``: zero lies in the subdifferential of the objective there."""
    return _subgradient_residual(problem, i, config or SolverConfig()) <= CERTIFICATE_SLACK


def _hessian(problem: QuantileProblem, diffs: np.ndarray, radii: np.ndarray) -> np.ndarray:
    w = problem.normalized_weights
    identity_part = float(np.sum(w / radii)) * np.eye(problem.dimension)
    scaled = diffs * (w / radii**3)[:, None]
    return identity_part - scaled.T @ diffs


def _factor(matrix: np.ndarray):
    factor = cho_factor(matrix, lower=True, check_finite=False)
    pivots = np.abs(np.diag(factor[0]))
    if not np.all(np.isfinite(pivots)) or pivots.min() <= 1e-8 * pivots.max():
        raise LinAlgError("Newton operator is numerically singular.")
    return factor


def _solve_newton_system(matrix: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    try:
        return cho_solve(_factor(matrix), rhs, check_finite=False)
    except LinAlgError:
        pass

    dimension = matrix.shape[0]
    trace = float(np.trace(matrix))
    ridge = 1e-10 * trace / dimension if trace > 0 else 1e-10
    for _ in range(RIDGE_DOUBLINGS + 1):
        try:
            step = cho_solve(_factor(matrix + ridge * np.eye(dimension)), rhs, check_finite=False)
        except LinAlgError:
            ridge *= 2.0
            continue
        logger.warning("Newton operator regularised with ridge %.3g", ridge)
        return step
    raise SingularHessian("Newton operator is singular even after ridge regularisation.")


def newton_step(problem: QuantileProblem, q: CoefVector | np.ndarray, config: SolverConfig | None = None) -> CoefVector:
    """One Newton-Raphson update ``q - A^{-1} V``.

    Raises:
        NotDifferentiable: if ``q`` coincides with a weighted response.
        SingularHessian: if ``A`` cannot be factorised.
    """
    config = config or SolverConfig()
    q = as_coefficients(q)
    v, diffs, radii = _gradient(problem, q, config)
    return CoefVector(q - _solve_newton_system(_hessian(problem, diffs, radii), v))


def weighted_median(values: np.ndarray, weights: np.ndarray) -> float:
    """Lower weighted median: the smallest value holding at least half the weight."""
    order = np.argsort(values, kind="stable")
    cumulative = np.cumsum(weights[order])
    position = int(np.searchsorted(cumulative, 0.5 * cumulative[-1] * (1.0 - 1e-12)))
    return float(values[order][min(position, order.size - 1)])


def coordinatewise_median(problem: QuantileProblem) -> np.ndarray:
    """Weighted coordinatewise median of the response rows."""
    w = problem.weights.weights
    return np.array([weighted_median(problem.responses[:, k], w) for k in range(problem.dimension)])


def _descent_direction(problem: QuantileProblem, q: np.ndarray, config: SolverConfig) -> np.ndarray:
    """Direction ``-V`` with the rows coinciding with ``q`` left out."""
    diffs = q[None, :] - problem.responses
    radii = np.linalg.norm(diffs, axis=1)
    keep = radii > config.coincidence_tol
    w = problem.normalized_weights
    v = w[keep] @ (diffs[keep] / radii[keep, None]) - problem.tau
    length = np.linalg.norm(v)
    if length == 0:
        v = np.zeros(problem.dimension)
        v[0] = 1.0
        return v
    return -v / length


def _candidate_fit(problem: QuantileProblem, i: int, config: SolverConfig, iterations: int) -> QuantileFit:
    point = problem.responses[i].copy()
    return QuantileFit(
        point=CoefVector(point),
        curve=problem.curve(point),
        status=FitStatus.CandidatePoint,
        iterations=iterations,
        final_gradient_norm=_subgradient_residual(problem, i, config),
        objective=objective(problem, point),
        candidate_index=i,
        sample_index=int(problem.indices[i]),
    )


def _candidate_block(problem: QuantileProblem, rows: np.ndarray, config: SolverConfig) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Coincidence mask, passing mask and objective for the candidate ``rows`` at once."""
    w = problem.normalized_weights
    tau = problem.tau
    diffs = problem.responses[rows][:, None, :] - problem.responses[None, :, :]
    radii = np.linalg.norm(diffs, axis=2)
    same = radii <= config.coincidence_tol
    safe = np.where(same, 1.0, radii)
    pull = np.einsum("j,rjk->rk", w, np.where(same[:, :, None], 0.0, diffs / safe[:, :, None]))
    same_mass = same.astype(float) @ w
    outside_mass = (~same).astype(float) @ w
    check = np.linalg.norm(pull - outside_mass[:, None] * tau[None, :], axis=1) <= (
        (1.0 + np.linalg.norm(tau)) * same_mass + CERTIFICATE_SLACK
    )
    certificate = np.maximum(np.linalg.norm(pull - tau[None, :], axis=1) - same_mass, 0.0) <= CERTIFICATE_SLACK
    values = radii @ w - problem.responses[rows] @ tau
    return same, check & certificate, values


def _search_candidates(problem: QuantileProblem, config: SolverConfig) -> int | None:
    """Index of the best data point that minimises the objective, if any."""
    covered = np.zeros(problem.responses.shape[0], dtype=bool)
    passing: list[tuple[float, int]] = []
    rows = np.flatnonzero(problem.weights.weights > 0)
    for start in range(0, rows.size, CANDIDATE_BLOCK):
        block = rows[start : start + CANDIDATE_BLOCK]
        same, passes, values = _candidate_block(problem, block, config)
        for k, i in enumerate(block):
            if covered[i]:
                continue
            covered |= same[k]
            if passes[k]:
                passing.append((float(values[k]), int(i)))
    if not passing:
        return None

    best_value = min(value for value, _ in passing)
    tolerance = TIE_TOLERANCE * (1.0 + abs(best_value))
    return min(i for value, i in passing if value <= best_value + tolerance)


def _not_worse(value: float, record: float) -> bool:
    return value <= record + OBJECTIVE_SLACK * (1.0 + abs(record))


def _damped_point(problem: QuantileProblem, q: np.ndarray, trial: np.ndarray, trial_value: float, record: float) -> np.ndarray | None:
    """Convex combination ``f q + (1 - f) trial`` that does not exceed the record objective."""
    if trial_value > 0 and record > 0:
        f = trial_value / (trial_value + record)
    else:
        f = 0.5
    for _ in range(MAX_HALVINGS):
        candidate = f * q + (1.0 - f) * trial
        if _not_worse(objective(problem, candidate), record):
            return candidate
        f = 0.5 * (1.0 + f)
    return None


def solve(problem: QuantileProblem, config: SolverConfig | None = None, initial: CoefVector | np.ndarray | None = None) -> QuantileFit:
    """Minimise the quantile objective.

    Every distinct weighted response is first tested as a minimiser. Failing
    that, damped Newton-Raphson iterations start from ``initial`` (default: the
    weighted coordinatewise median) until the gradient vanishes or an undamped
    step becomes negligible.
    """
    config = config or SolverConfig()

    hit = _search_candidates(problem, config)
    if hit is not None:
        return _candidate_fit(problem, hit, config, iterations=0)

    q = coordinatewise_median(problem) if initial is None else as_coefficients(initial).copy()
    if q.shape[0] != problem.dimension:
        raise DimensionMismatch(f"Initial point has dimension {q.shape[0]}, problem has {problem.dimension}.")
    if _coincident(problem, q, config) is not None:
        q = q + 10.0 * config.coincidence_tol * _descent_direction(problem, q, config)

    value = objective(problem, q)
    record, best = value, q
    gradient_norm = float(np.linalg.norm(_gradient(problem, q, config)[0]))

    for iteration in range(1, config.max_iterations + 1):
        if gradient_norm <= config.grad_tol:
            return _newton_fit(problem, q, FitStatus.NewtonConverged, iteration - 1, gradient_norm)

        trial = as_coefficients(newton_step(problem, q, config))
        trial_value = objective(problem, trial)
        undamped = _not_worse(trial_value, record)
        if undamped:
            new_q = trial
        else:
            new_q = _damped_point(problem, q, trial, trial_value, record)
            if new_q is None or np.array_equal(new_q, q):
                # gradient_norm > grad_tol here
                logger.warning("Line search stalled at iteration %d (gradient %.3g)", iteration, gradient_norm)
                return _newton_fit(problem, best, FitStatus.MaxIterations, iteration, gradient_norm)

        hit = _coincident(problem, new_q, config)
        if hit is not None:
            if candidate_check(problem, hit, config) and subgradient_certificate(problem, hit, config):
                return _candidate_fit(problem, hit, config, iterations=iteration)
            new_q = new_q + 10.0 * config.coincidence_tol * _descent_direction(problem, new_q, config)

        step = float(np.linalg.norm(new_q - q))
        scale = 1.0 + float(np.linalg.norm(q))
        q = new_q
        value = objective(problem, q)
        if value < record:
            record, best = value, q
        gradient_norm = float(np.linalg.norm(_gradient(problem, q, config)[0]))
        logger.debug("Iteration %d: objective %.12g, gradient %.3g, step %.3g", iteration, value, gradient_norm, step)

        if gradient_norm <= config.grad_tol or (undamped and step <= config.step_tol * scale):
            return _newton_fit(problem, q, FitStatus.NewtonConverged, iteration, gradient_norm)

    logger.warning("Quantile solver hit the iteration limit (%d); returning the best iterate.", config.max_iterations)
    best_gradient = float(np.linalg.norm(_gradient(problem, best, config)[0]))
    return _newton_fit(problem, best, FitStatus.MaxIterations, config.max_iterations, best_gradient)


def _newton_fit(problem: QuantileProblem, q: np.ndarray, status: FitStatus, iterations: int, gradient_norm: float) -> QuantileFit:
    return QuantileFit(
        point=CoefVector(q),
        curve=problem.curve(q),
        status=status,
        iterations=iterations,
        final_gradient_norm=gradient_norm,
        objective=objective(problem, q),
    )


@dataclass(frozen=True)
class TauRule:
    """Quantile index in basis coordinates.

    ``zero`` is the spatial median, ``first_component`` is ``scale * e_1`` of
    the conditional eigenbasis and ``custom`` gives explicit coordinates.
    """

    kind: str
    scale: float = 0.0
    coefficients: tuple[float, ...] = ()

    _COMPONENT = re.compile(r"^\s*([+-]?(?:\d+\.?\d*|\.\d+))\s*\*?\s*u1\s*$")

    @classmethod
    def parse(cls, text: str) -> TauRule:
        """Read ``"0"``, ``"c*u1"`` (or ``"cu1"``) or a comma list of coefficients.

        Raises:
            InvalidArgument: if ``text`` matches none of these forms.
        """
        text = str(text).strip()
        match = cls._COMPONENT.match(text)
        if match:
            return cls("first_component", scale=float(match.group(1)))
        try:
            values = tuple(float(part) for part in text.split(","))
        except ValueError as exc:
            raise InvalidArgument(f"Cannot read quantile index '{text}'.") from exc
        if all(v == 0.0 for v in values):
            return cls("zero")
        return cls("custom", coefficients=values)

    @property
    def label(self) -> str:
        if self.kind == "zero":
            return "0"
        if self.kind == "first_component":
            return f"{self.scale:g}u1"
        return ",".join(f"{c:g}" for c in self.coefficients)

    def negated(self) -> TauRule:
        return TauRule(self.kind, -self.scale, tuple(-c for c in self.coefficients))

    def coefficients_for(self, dimension: int) -> CoefVector:
        """Resolve the rule to coordinates in a basis of ``dimension`` functions.

        Custom coefficients are padded with zeros.

        Raises:
            DimensionMismatch: if more custom coefficients are given than ``dimension``.
        """
        if self.kind == "zero":
            return CoefVector(np.zeros(dimension))
        if self.kind == "first_component":
            return CoefVector.unit(dimension, 0, self.scale)
        if len(self.coefficients) > dimension:
            raise DimensionMismatch(
                f"{len(self.coefficients)} tau coefficients given for a basis of dimension {dimension}."
            )
        padded = np.zeros(dimension)
        padded[: len(self.coefficients)] = self.coefficients
        return CoefVector(padded)


def conditional_quantile(
    sample: FunctionalSample,
    x0: Curve,
    tau: TauRule | CoefVector,
    h: float,
    spec: KernelSpec,
    config: SolverConfig | None = None,
    basis: Basis | None = None,
    center: bool = False,
) -> QuantileFit:
    """Estimate ``Q(tau | x0)`` on the conditional eigenbasis at ``x0``.

    Args:
        sample: Observations.
        x0: Evaluation covariate.
        tau: A rule resolved against the basis dimension, or explicit coordinates.
        h: Bandwidth.
        spec: Kernel.
        config: Solver stopping rules.
        basis: Eigenbasis to reuse. Estimated at ``x0`` when omitted.
        center: Fit in ``mean + span(basis)`` instead of ``span(basis)``.

    Returns:
        The fit, with its curve and solver diagnostics.
    """
    if basis is None:
        basis, _ = conditional_basis(sample, x0, h, spec)
    coefficients = tau.coefficients_for(basis.dimension) if isinstance(tau, TauRule) else tau
    problem = QuantileProblem.from_sample(sample, x0, coefficients, basis, h, spec, center=center)
    return solve(problem, config)
