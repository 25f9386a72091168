"""Command-line entry point for functional spatial quantile regression.

Every subcommand validates its flags into a pydantic input model, runs the
library and writes a result bundle whose metadata records the effective
configuration. Exit codes: 0 success, 1 runtime or data failure, 2 usage.
"""
from __future__ import annotations

import argparse
import logging
import math
import sys
from collections.abc import Callable
from pathlib import Path
from typing import Literal

import numpy as np
from pydantic import BaseModel, Field, ValidationError, field_validator

from computations.bandwidth_cv import CvPredictor, select_bandwidth
from computations.covariance_basis import conditional_basis
from computations.depth_sets_spread import equidistant_rank_points, maximal_depth_set, spread_profile
from computations.kernel_weights import KernelKind, KernelSpec
from computations.simulation import SimConfig, SimModel, simulate
from computations.spatial_quantile_solver import QuantileFit, SolverConfig, TauRule, conditional_quantile
from models.function_space import Grid
from models.functional_sample import FunctionalSample
from models.panel_model import PanelSchema, read_panel, write_panel
from models.result_bundle import BundleKind, OutputFormat, ResultBundle, write_results
from utils.errors import EvaluationPointError, FunctionalQuantileError
from utils.results_analyzer import analyze_fits, summary_message
from utils.settings import RuntimeSettings
from utils.workers import parallel_map

logger = logging.getLogger(__name__)


class SimulateInputs(BaseModel):
    """Flags of ``simulate``."""

    model: SimModel = Field(default=SimModel.Heteroscedastic, title="Data-generating model")
    n: int = Field(default=100, ge=1, title="Sample size")
    grid_count: int = Field(default=101, ge=2, title="Grid points on [0, 1]")
    seed: int = Field(default=0, ge=0, title="Seed")
    noise_scale: float = Field(
        default=1.0,
        gt=0,
        title="Noise scale",
        description="Constant f(x) of the location-scale model. Ignored by the heteroscedastic model.",
    )
    out: Path = Field(..., title="Panel CSV to write")


class PanelInputs(BaseModel):
    """Flags shared by every subcommand that reads a panel."""

    input: Path = Field(..., title="Panel CSV")
    panel_schema: str = Field(
        default="unit,time,covariate,response",
        title="Panel columns",
        description="Comma-separated unit, time, covariate and response column names.",
    )
    kernel: KernelKind = Field(default=KernelKind.Indicator, title="Kernel")
    center: bool = Field(
        default=False,
        title="Centre quantile spaces",
        description="Fit quantiles in mean + span(basis), centred at the kernel-weighted conditional mean.",
    )
    out: Path = Field(..., title="Result file")
    format: OutputFormat | None = Field(default=None, title="Result format (default: from the file suffix)")

    @field_validator("panel_schema")
    @classmethod
    def _schema_parses(cls, value: str) -> str:
        PanelSchema.parse(value)
        return value

    @property
    def schema_model(self) -> PanelSchema:
        return PanelSchema.parse(self.panel_schema)

    @property
    def kernel_spec(self) -> KernelSpec:
        return KernelSpec(kind=self.kernel)


class BandwidthInputs(PanelInputs):
    """Panel flags plus the bandwidth, fixed or cross-validated."""

    h: float | Literal["cv"] = Field(
        default="cv",
        title="Bandwidth",
        description="A positive bandwidth, or 'cv' to select it by leave-one-out cross-validation.",
    )
    cv_grid: str = Field(default="auto", title="Candidate bandwidths used when h is 'cv'")
    predictor: CvPredictor = Field(default=CvPredictor.SpatialMedian, title="Cross-validation predictor")
    max_iterations: int = Field(default=200, ge=1, title="Maximum Newton iterations")

    @field_validator("h", mode="before")
    @classmethod
    def _bandwidth(cls, value):
        if isinstance(value, str) and value.strip().lower() == "cv":
            return "cv"
        value = float(value)
        if not (math.isfinite(value) and value > 0):
            raise ValueError(f"The bandwidth must be positive, got {value}.")
        return value

    @field_validator("cv_grid")
    @classmethod
    def _grid(cls, value: str) -> str:
        _candidates(value)
        return value

    @property
    def solver_config(self) -> SolverConfig:
        return SolverConfig(max_iterations=self.max_iterations)


class FitQuantilesInputs(BandwidthInputs):
    x: list[str] = Field(default_factory=list, title="Evaluation points (unit labels or sample indices)")
    tau: str = Field(default="0.5u1", title="Quantile index: 0, c*u1 or coefficient list")
    p: float = Field(default=0.5, gt=0, lt=1, title="Mass of the depth-set envelope")

    @field_validator("tau")
    @classmethod
    def _tau_parses(cls, value: str) -> str:
        TauRule.parse(value)
        return value


class DepthSetInputs(BandwidthInputs):
    x: list[str] = Field(default_factory=list, title="Evaluation points (unit labels or sample indices)")
    p: float = Field(default=0.5, gt=0, lt=1, title="Conditional probability mass of the set")


class SpreadProfileInputs(BandwidthInputs):
    p: float = Field(default=0.5, gt=0, lt=1, title="Mass level of D1")
    tau: str = Field(default="0.5u1", title="Quantile index of D2")

    @field_validator("tau")
    @classmethod
    def _tau_parses(cls, value: str) -> str:
        TauRule.parse(value)
        return value


class CrossValidationInputs(PanelInputs):
    grid: str = Field(default="auto", title="Candidate bandwidths: 'auto' or a comma list")
    predictor: CvPredictor = Field(default=CvPredictor.SpatialMedian, title="Cross-validation predictor")
    max_iterations: int = Field(default=200, ge=1, title="Maximum Newton iterations")

    @field_validator("grid")
    @classmethod
    def _grid(cls, value: str) -> str:
        _candidates(value)
        return value


def _candidates(text: str) -> list[float] | str:
    if text.strip().lower() == "auto":
        return "auto"
    values = [float(part) for part in text.split(",") if part.strip()]
    if not values or any(not (math.isfinite(v) and v > 0) for v in values):
        raise ValueError(f"Candidate bandwidths must be positive numbers, got '{text}'.")
    return values


def _effective_config(inputs: BaseModel) -> dict:
    return inputs.model_dump(mode="json")


def _load(inputs: PanelInputs) -> FunctionalSample:
    sample = read_panel(inputs.input, inputs.schema_model)
    logger.info("Loaded %d observations from %s", sample.n, inputs.input)
    return sample


def _resolve_bandwidth(sample: FunctionalSample, inputs: BandwidthInputs, workers: int, metadata: dict) -> float:
    if inputs.h != "cv":
        metadata["h_used"] = float(inputs.h)
        return float(inputs.h)
    result = select_bandwidth(
        sample,
        _candidates(inputs.cv_grid),
        inputs.kernel_spec,
        inputs.solver_config,
        inputs.predictor,
        workers,
        center=inputs.center,
    )
    metadata["h_used"] = result.h_opt
    metadata["h_cv_score"] = result.best_score
    logger.info("Selected bandwidth h=%.6g by cross-validation", result.h_opt)
    return result.h_opt


def _resolve_points(sample: FunctionalSample, requested: list[str]) -> list[int]:
    """Sample indices of the requested evaluation points; labels win over indices."""
    if not requested:
        return equidistant_rank_points(sample)
    indices = []
    for item in requested:
        if item in sample.labels:
            indices.append(sample.index_of(item))
            continue
        try:
            index = int(item)
        except ValueError:
            index = -1
        if not 0 <= index < sample.n:
            raise EvaluationPointError(item, LookupError("no such unit label or sample index"))
        indices.append(index)
    return indices


def _at_point(label: str, func: Callable[[], object]):
    try:
        return func()
    except FunctionalQuantileError as exc:
        raise EvaluationPointError(label, exc) from exc


def _diagnostics(fit: QuantileFit) -> dict:
    return {
        "status": fit.status.value,
        "iterations": fit.iterations,
        "gradient_norm": fit.final_gradient_norm,
        "objective": fit.objective,
    }


def _write(bundle: ResultBundle, inputs: PanelInputs) -> None:
    path = write_results(bundle, inputs.out, inputs.format)
    logger.info("Wrote %s", path)


def cmd_simulate(inputs: SimulateInputs, settings: RuntimeSettings) -> None:
    """Simulate a functional sample and write it as a panel CSV."""
    config = SimConfig(
        n=inputs.n,
        grid=Grid(0.0, 1.0, inputs.grid_count),
        seed=inputs.seed,
        model=inputs.model,
        scale=inputs.noise_scale,
    )
    sample = simulate(config, settings.worker_count())
    metadata = {"command": "simulate", **_effective_config(inputs)}
    write_panel(sample, inputs.out, metadata=metadata)
    logger.info("Simulated %d observations (%s) to %s", sample.n, inputs.model.value, inputs.out)


def cmd_fit_quantiles(inputs: FitQuantilesInputs, settings: RuntimeSettings) -> None:
    """Q(tau | x), Q(0 | x) and Q(-tau | x) with the depth-set envelope at every evaluation point."""
    workers = settings.worker_count()
    sample = _load(inputs)
    metadata: dict = {"command": "fit-quantiles", **_effective_config(inputs)}
    h = _resolve_bandwidth(sample, inputs, workers, metadata)
    spec, config = inputs.kernel_spec, inputs.solver_config
    rule = TauRule.parse(inputs.tau)
    directions = {"Q(tau)": rule, "Q(0)": TauRule("zero"), "Q(-tau)": rule.negated()}

    def fit_point(index: int):
        label = sample.labels[index]
        x0 = sample.covariates[index]

        def run():
            basis, covariance = conditional_basis(sample, x0, h, spec)
            fits = {
                name: conditional_quantile(sample, x0, direction, h, spec, config, basis=basis, center=inputs.center)
                for name, direction in directions.items()
            }
            return basis, covariance, fits, maximal_depth_set(sample, x0, inputs.p, h, spec)

        return label, _at_point(label, run)

    results = parallel_map(fit_point, _resolve_points(sample, inputs.x), workers)

    bundle = ResultBundle(BundleKind.QuantileCurves, metadata)
    points, statuses = {}, {}
    for label, (basis, covariance, fits, depth_set) in results:
        for name, fit in fits.items():
            bundle.add_curve(f"{label}/{name}", fit.curve)
            statuses[f"{label}/{name}"] = fit.status
        lower, upper = depth_set.envelope(sample)
        bundle.add_curve(f"{label}/envelope_lower", lower)
        bundle.add_curve(f"{label}/envelope_upper", upper)
        points[label] = {
            "dimension": basis.dimension,
            "neighbors": covariance.neighborhood_count,
            "tau": rule.coefficients_for(basis.dimension).coefficients.tolist(),
            "fits": {name: _diagnostics(fit) for name, fit in fits.items()},
            "i_p": depth_set.cutoff,
            "d1": depth_set.d1,
        }
    summary = analyze_fits(statuses)
    metadata["points"] = points
    metadata["fit_summary"] = {name: entry["count"] for name, entry in summary.items()}
    logger.info("Quantile fits:%s", summary_message(summary, len(statuses)))
    for key in summary["max_iterations"]["keys"]:
        logger.warning("Fit %s stopped before convergence", key)
    _write(bundle, inputs)


def cmd_depth_set(inputs: DepthSetInputs, settings: RuntimeSettings) -> None:
    """Conditional maximal depth sets, their depths and diameters."""
    workers = settings.worker_count()
    sample = _load(inputs)
    metadata: dict = {"command": "depth-set", **_effective_config(inputs)}
    h = _resolve_bandwidth(sample, inputs, workers, metadata)
    spec = inputs.kernel_spec

    def depth_point(index: int):
        label = sample.labels[index]
        return label, _at_point(label, lambda: maximal_depth_set(sample, sample.covariates[index], inputs.p, h, spec))

    results = parallel_map(depth_point, _resolve_points(sample, inputs.x), workers)

    bundle = ResultBundle(BundleKind.DepthSet, metadata)
    points = {}
    for label, result in results:
        members = [sample.labels[i] for i in result.selected]
        for i in result.selected:
            bundle.add_curve(f"{label}/member/{sample.labels[i]}", sample.responses[i])
        bundle.add(f"{label}/depths", result.ordered_indices, result.depths)
        points[label] = {"i_p": result.cutoff, "d1": result.d1, "members": members}
    metadata["points"] = points
    _write(bundle, inputs)


def cmd_spread_profile(inputs: SpreadProfileInputs, settings: RuntimeSettings) -> None:
    """D1 and D2 at every covariate curve, ordered by covariate-norm rank."""
    workers = settings.worker_count()
    sample = _load(inputs)
    metadata: dict = {"command": "spread-profile", **_effective_config(inputs)}
    h = _resolve_bandwidth(sample, inputs, workers, metadata)

    profile = spread_profile(
        sample,
        inputs.p,
        h,
        inputs.kernel_spec,
        inputs.solver_config,
        TauRule.parse(inputs.tau),
        workers,
        center=inputs.center,
    )
    keep = np.isfinite(profile.d1_values) & np.isfinite(profile.d2_values)
    bundle = ResultBundle(BundleKind.SpreadProfile, metadata)
    bundle.add("d1", profile.covariate_ranks[keep], profile.d1_values[keep])
    bundle.add("d2", profile.covariate_ranks[keep], profile.d2_values[keep])
    metadata["units"] = [sample.labels[i] for i in profile.sample_indices[keep]]
    metadata["missing"] = [sample.labels[i] for i in profile.missing]
    metadata["trend"] = profile.trend()
    if profile.missing:
        logger.warning("%d of %d evaluation points are missing", len(profile.missing), sample.n)
    _write(bundle, inputs)


def cmd_cv(inputs: CrossValidationInputs, settings: RuntimeSettings) -> None:
    """Leave-one-out cross-validation trace over candidate bandwidths."""
    sample = _load(inputs)
    result = select_bandwidth(
        sample,
        _candidates(inputs.grid),
        inputs.kernel_spec,
        SolverConfig(max_iterations=inputs.max_iterations),
        inputs.predictor,
        settings.worker_count(),
        center=inputs.center,
    )
    metadata = {
        "command": "cv",
        **_effective_config(inputs),
        "h_opt": result.h_opt,
        "best_score": result.best_score,
        "infeasible": result.infeasible,
    }
    bundle = ResultBundle(BundleKind.CVTrace, metadata)
    bundle.add("score", [h for h, _ in result.scores], [score for _, score in result.scores])
    _write(bundle, inputs)


def _add_panel_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--input", required=True, help="Long-format panel CSV.")
    parser.add_argument("--schema", dest="panel_schema", help="Column names: unit,time,covariate,response.")
    parser.add_argument("--kernel", choices=[k.value for k in KernelKind])
    parser.add_argument(
        "--center", action="store_true", default=None, help="Centre quantile spaces at the conditional mean."
    )
    parser.add_argument("--out", required=True, help="Result file (.csv or .json).")
    parser.add_argument("--format", choices=[f.value for f in OutputFormat])


def _add_bandwidth_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--h", help="Bandwidth value, or 'cv' (default).")
    parser.add_argument("--cv-grid", dest="cv_grid", help="Candidates when --h cv: 'auto' or a comma list.")
    parser.add_argument("--predictor", choices=[p.value for p in CvPredictor])
    parser.add_argument("--max-iterations", dest="max_iterations", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="functional-quantiles",
        description="Conditional spatial quantiles and depth for functional data.",
    )
    commands = parser.add_subparsers(dest="command", required=True)

    simulate_parser = commands.add_parser("simulate", help="Write a simulated panel.")
    simulate_parser.add_argument("--model", choices=[m.value for m in SimModel])
    simulate_parser.add_argument("--n", type=int)
    simulate_parser.add_argument("--grid-count", dest="grid_count", type=int)
    simulate_parser.add_argument("--seed", type=int)
    simulate_parser.add_argument("--noise-scale", dest="noise_scale", type=float)
    simulate_parser.add_argument("--out", required=True)
    simulate_parser.set_defaults(handler=cmd_simulate, inputs_model=SimulateInputs)

    fit_parser = commands.add_parser("fit-quantiles", help="Conditional quantile curves at evaluation points.")
    _add_panel_flags(fit_parser)
    _add_bandwidth_flags(fit_parser)
    fit_parser.add_argument("--x", action="append", help="Unit label or sample index (repeatable).")
    fit_parser.add_argument("--tau", help="0, c*u1 (default 0.5u1) or coefficients a,b,...")
    fit_parser.add_argument("--p", type=float, help="Mass of the depth-set envelope.")
    fit_parser.set_defaults(handler=cmd_fit_quantiles, inputs_model=FitQuantilesInputs)

    depth_parser = commands.add_parser("depth-set", help="Conditional maximal depth sets.")
    _add_panel_flags(depth_parser)
    _add_bandwidth_flags(depth_parser)
    depth_parser.add_argument("--x", action="append", help="Unit label or sample index (repeatable).")
    depth_parser.add_argument("--p", type=float)
    depth_parser.set_defaults(handler=cmd_depth_set, inputs_model=DepthSetInputs)

    spread_parser = commands.add_parser("spread-profile", help="D1 and D2 against covariate-norm rank.")
    _add_panel_flags(spread_parser)
    _add_bandwidth_flags(spread_parser)
    spread_parser.add_argument("--p", type=float)
    spread_parser.add_argument("--tau", help="Quantile index of D2 (default 0.5u1).")
    spread_parser.set_defaults(handler=cmd_spread_profile, inputs_model=SpreadProfileInputs)

    cv_parser = commands.add_parser("cv", help="Leave-one-out bandwidth cross-validation.")
    _add_panel_flags(cv_parser)
    cv_parser.add_argument("--grid", help="'auto' (default) or a comma list of bandwidths.")
    cv_parser.add_argument("--predictor", choices=[p.value for p in CvPredictor])
    cv_parser.add_argument("--max-iterations", dest="max_iterations", type=int)
    cv_parser.set_defaults(handler=cmd_cv, inputs_model=CrossValidationInputs)
    return parser


def main(argv: list[str] | None = None) -> int:
    """Run one subcommand.

    Args:
        argv: Command-line arguments without the program name. Defaults to ``sys.argv[1:]``.

    Returns:
        0 on success, 1 when the run fails on data or at runtime, 2 for invalid arguments.
    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)

    flags = {
        key: value
        for key, value in vars(args).items()
        if key not in ("command", "handler", "inputs_model") and value is not None
    }
    try:
        settings = RuntimeSettings()
        settings.configure_logging()
        inputs = args.inputs_model(**flags)
    except ValidationError as exc:
        print(f"{args.command}: invalid arguments\n{exc}", file=sys.stderr)
        return 2

    try:
        args.handler(inputs, settings)
    except (FunctionalQuantileError, OSError) as exc:
        logger.error("%s failed: %s", args.command, exc)
        print(f"{args.command}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
