"""Result bundles: named (t, value) series plus metadata, stored as CSV or JSON."""
from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

from models.function_space import Curve
from utils.errors import PanelParseError

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.17g"
HEADER = ["series", "t", "value"]


class BundleKind(Enum):
    QuantileCurves = "quantile_curves"
    DepthSet = "depth_set"
    SpreadProfile = "spread_profile"
    CVTrace = "cv_trace"


class OutputFormat(Enum):
    CSV = "csv"
    JSON = "json"

    @classmethod
    def for_path(cls, path: str | Path) -> OutputFormat:
        return cls.JSON if Path(path).suffix.lower() == ".json" else cls.CSV


@dataclass(frozen=True, eq=False)
class ResultSeries:
    name: str
    t: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.t, dtype=float).reshape(-1)
        v = np.asarray(self.v, dtype=float).reshape(-1)
        if t.shape != v.shape:
            raise ValueError(f"Series '{self.name}' has {t.size} abscissae but {v.size} values.")
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "v", v)

    @classmethod
    def from_curve(cls, name: str, curve: Curve) -> ResultSeries:
        return cls(name, curve.grid.points, curve.values)


@dataclass
class ResultBundle:
    kind: BundleKind
    metadata: dict = field(default_factory=dict)
    series: list[ResultSeries] = field(default_factory=list)

    def add(self, name: str, t, v) -> ResultSeries:
        entry = ResultSeries(name, t, v)
        self.series.append(entry)
        return entry

    def add_curve(self, name: str, curve: Curve) -> ResultSeries:
        entry = ResultSeries.from_curve(name, curve)
        self.series.append(entry)
        return entry

    def get(self, name: str) -> ResultSeries:
        for entry in self.series:
            if entry.name == name:
                return entry
        raise LookupError(f"No series named '{name}' in the {self.kind.value} bundle.")

    @property
    def names(self) -> list[str]:
        return [entry.name for entry in self.series]


def _jsonable(value):
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, Enum):
        return value.value
    if isinstance(value, Path):
        return str(value)
    raise TypeError(f"Metadata value of type {type(value).__name__} is not serialisable.")


def _header_metadata(bundle: ResultBundle) -> dict:
    return {"kind": bundle.kind.value, **bundle.metadata}


def write_results(bundle: ResultBundle, path: str | Path, fmt: OutputFormat | str | None = None) -> Path:
    """Write ``bundle`` to ``path``; the format defaults to the file suffix."""
    path = Path(path)
    fmt = OutputFormat.for_path(path) if fmt is None else OutputFormat(fmt)
    metadata = _header_metadata(bundle)

    if fmt is OutputFormat.JSON:
        payload = {
            "metadata": metadata,
            "series": [{"name": s.name, "t": s.t.tolist(), "v": s.v.tolist()} for s in bundle.series],
        }
        path.write_text(json.dumps(payload, default=_jsonable, indent=2) + "\n", encoding="utf-8")
    else:
        with path.open("w", encoding="utf-8", newline="") as handle:
            for key, value in metadata.items():
                handle.write(f"# {key}={json.dumps(value, default=_jsonable)}\n")
            writer = csv.writer(handle, lineterminator="\n")
            writer.writerow(HEADER)
            for entry in bundle.series:
                for t, v in zip(entry.t, entry.v):
                    writer.writerow([entry.name, FLOAT_FORMAT % t, FLOAT_FORMAT % v])

    logger.info("Wrote %s bundle with %d series to %s", bundle.kind.value, len(bundle.series), path)
    return path


def _bundle(metadata: dict, series: list[ResultSeries]) -> ResultBundle:
    metadata = dict(metadata)
    try:
        kind = BundleKind(metadata.pop("kind"))
    except (KeyError, ValueError) as exc:
        raise PanelParseError(None, "result file does not name a known bundle kind") from exc
    return ResultBundle(kind, metadata, series)


def read_results(path: str | Path, fmt: OutputFormat | str | None = None) -> ResultBundle:
    """Read a bundle written by :func:`write_results`."""
    path = Path(path)
    fmt = OutputFormat.for_path(path) if fmt is None else OutputFormat(fmt)

    if fmt is OutputFormat.JSON:
        payload = json.loads(path.read_text(encoding="utf-8"))
        series = [ResultSeries(s["name"], s["t"], s["v"]) for s in payload.get("series", [])]
        return _bundle(payload.get("metadata", {}), series)

    metadata: dict = {}
    columns: dict[str, tuple[list[float], list[float]]] = {}
    with path.open(encoding="utf-8", newline="") as handle:
        lines = handle.read().splitlines()

    body = []
    for number, line in enumerate(lines, start=1):
        if line.startswith("#"):
            key, sep, value = line[1:].strip().partition("=")
            if not sep:
                raise PanelParseError(number, f"metadata line without '=': {line!r}")
            metadata[key] = json.loads(value)
        elif line.strip():
            body.append((number, line))

    if not body or next(csv.reader([body[0][1]])) != HEADER:
        raise PanelParseError(body[0][0] if body else None, f"expected header {','.join(HEADER)}")
    for number, line in body[1:]:
        row = next(csv.reader([line]))
        if len(row) != 3:
            raise PanelParseError(number, f"expected 3 fields, got {len(row)}")
        try:
            t, v = float(row[1]), float(row[2])
        except ValueError as exc:
            raise PanelParseError(number, "non-numeric t or value") from exc
        ts, vs = columns.setdefault(row[0], ([], []))
        ts.append(t)
        vs.append(v)

    series = [ResultSeries(name, ts, vs) for name, (ts, vs) in columns.items()]
    return _bundle(metadata, series)
