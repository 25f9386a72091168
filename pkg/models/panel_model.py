"""Long-format panel CSV <-> FunctionalSample.

A panel file has one row per (unit, time) pair with a covariate and a
response column. Every unit must cover the same complete, sorted and equally
spaced time grid. Lines starting with ``#`` are metadata comments.
"""
from __future__ import annotations

import json
import logging
import re
from pathlib import Path

import numpy as np
import pandas as pd
from pydantic import BaseModel, Field, model_validator

from models.function_space import Grid
from models.functional_sample import FunctionalSample
from utils.errors import MissingCell, PanelParseError, RaggedPanel

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.17g"


class PanelSchema(BaseModel):
    """Column names of a long-format panel."""

    unit_column: str = Field(default="unit", title="Unit column")
    time_column: str = Field(default="time", title="Time column")
    covariate_column: str = Field(default="covariate", title="Covariate column")
    response_column: str = Field(default="response", title="Response column")

    @model_validator(mode="after")
    def _distinct(self) -> PanelSchema:
        if len(set(self.columns)) != 4:
            raise ValueError(f"Panel columns must be four distinct names, got {self.columns}.")
        return self

    @property
    def columns(self) -> list[str]:
        return [self.unit_column, self.time_column, self.covariate_column, self.response_column]

    @classmethod
    def parse(cls, text: str) -> PanelSchema:
        """Schema from ``"unit,time,covariate,response"``."""
        names = [part.strip() for part in text.split(",")]
        if len(names) != 4:
            raise ValueError(f"A panel schema lists four column names, got '{text}'.")
        return cls(unit_column=names[0], time_column=names[1], covariate_column=names[2], response_column=names[3])


class PanelProcessor:
    """Validates a panel file and extracts the functional sample it describes."""

    def __init__(self, path: str | Path, schema: PanelSchema | None = None):
        self.path = Path(path)
        self.schema = schema or PanelSchema()
        self.frame: pd.DataFrame | None = None

    def load(self) -> pd.DataFrame:
        try:
            self.frame = pd.read_csv(
                self.path,
                comment="#",
                dtype={self.schema.unit_column: str},
                float_precision="round_trip",
                skip_blank_lines=True,
            )
        except pd.errors.EmptyDataError as exc:
            raise PanelParseError(None, "file has no header or rows") from exc
        except pd.errors.ParserError as exc:
            match = re.search(r"line (\d+)", str(exc))
            raise PanelParseError(int(match.group(1)) if match else None, str(exc)) from exc
        return self.frame

    def validate_source(self) -> None:
        """Check columns, numeric content, missing cells and duplicates."""
        frame = self.frame
        schema = self.schema
        missing_columns = [c for c in schema.columns if c not in frame.columns]
        if missing_columns:
            raise PanelParseError(1, f"missing columns {missing_columns}")

        # line numbers count the header as line 1 and skip comment lines
        for column in (schema.unit_column, schema.time_column):
            empty = frame[column].isna().to_numpy()
            if empty.any():
                raise PanelParseError(int(np.argmax(empty)) + 2, f"empty '{column}' cell")

        for column in (schema.time_column, schema.covariate_column, schema.response_column):
            numeric = pd.to_numeric(frame[column], errors="coerce")
            bad = numeric.isna().to_numpy() & frame[column].notna().to_numpy()
            if bad.any():
                raise PanelParseError(int(np.argmax(bad)) + 2, f"non-numeric value in '{column}'")
            frame[column] = numeric.astype(float)

        for column in (schema.covariate_column, schema.response_column):
            empty = frame[column].isna().to_numpy()
            if empty.any():
                row = frame.iloc[int(np.argmax(empty))]
                raise MissingCell(str(row[schema.unit_column]), float(row[schema.time_column]))

        duplicated = frame.duplicated(subset=[schema.unit_column, schema.time_column]).to_numpy()
        if duplicated.any():
            row = frame.iloc[int(np.argmax(duplicated))]
            raise RaggedPanel(str(row[schema.unit_column]), f"time {row[schema.time_column]!r} appears twice")

    def extract_sample(self) -> FunctionalSample:
        frame = self.frame
        schema = self.schema
        units = list(pd.unique(frame[schema.unit_column]))

        groups = {unit: group for unit, group in frame.groupby(schema.unit_column, sort=False)}
        reference = groups[units[0]][schema.time_column].to_numpy()
        if reference.size > 1 and not np.all(np.diff(reference) > 0):
            raise RaggedPanel(str(units[0]), "time points are not strictly increasing")

        covariates, responses = [], []
        for unit in units:
            group = groups[unit]
            times = group[schema.time_column].to_numpy()
            if times.shape != reference.shape or not np.array_equal(times, reference):
                raise RaggedPanel(str(unit))
            covariates.append(group[schema.covariate_column].to_numpy())
            responses.append(group[schema.response_column].to_numpy())

        grid = _grid_from_times(reference)
        logger.info("Read panel %s: %d units x %d time points", self.path, len(units), grid.count)
        return FunctionalSample.from_arrays(grid, np.vstack(covariates), grid, np.vstack(responses), units)

    def process(self) -> FunctionalSample:
        self.load()
        self.validate_source()
        return self.extract_sample()


def _grid_from_times(times: np.ndarray) -> Grid:
    if times.size == 1:
        return Grid(float(times[0]), float(times[0]), 1)
    grid = Grid(float(times[0]), float(times[-1]), int(times.size))
    tolerance = 1e-9 * (grid.end - grid.start)
    if not np.allclose(grid.points, times, rtol=0.0, atol=tolerance):
        raise PanelParseError(None, "time points are not equally spaced")
    return grid


def read_panel(path: str | Path, schema: PanelSchema | None = None) -> FunctionalSample:
    """Read a long-format panel CSV into a functional sample, units in order of first appearance."""
    return PanelProcessor(path, schema).process()


def write_panel(
    sample: FunctionalSample,
    path: str | Path,
    schema: PanelSchema | None = None,
    metadata: dict | None = None,
) -> Path:
    """Write a sample whose covariates and responses share one grid as a long-format panel."""
    schema = schema or PanelSchema()
    if sample.covariate_grid != sample.response_grid:
        raise RaggedPanel("*", "covariates and responses must share one time grid")
    times = sample.response_grid.points
    frame = pd.DataFrame(
        {
            schema.unit_column: np.repeat(sample.labels, times.size),
            schema.time_column: np.tile(times, sample.n),
            schema.covariate_column: sample.covariate_values.reshape(-1),
            schema.response_column: sample.response_values.reshape(-1),
        }
    )
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="") as handle:
        for key, value in (metadata or {}).items():
            handle.write(f"# {key}={json.dumps(value)}\n")
        frame.to_csv(handle, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    return path
