"""Panel CSV reading and writing, and result bundles."""

import numpy as np
import pytest

from computations.simulation import SimConfig, simulate
from models.function_space import Grid
from models.panel_model import PanelSchema, read_panel, write_panel
from models.result_bundle import BundleKind, OutputFormat, ResultBundle, read_results, write_results
from utils.errors import MissingCell, PanelParseError, RaggedPanel

PANEL = """unit,time,covariate,response
a,0,1.0,2.0
a,0.5,1.5,2.5
a,1,2.0,3.0
b,0,0.0,-1.0
b,0.5,0.5,-0.5
b,1,1.0,0.0
"""


def _write(tmp_path, text, name="panel.csv"):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return path


def test_read_two_unit_panel(tmp_path):
    sample = read_panel(_write(tmp_path, PANEL))
    assert sample.labels == ["a", "b"]
    assert sample.response_grid == Grid(0.0, 1.0, 3)
    assert sample.covariate_values.tolist() == [[1.0, 1.5, 2.0], [0.0, 0.5, 1.0]]
    assert sample.response_values.tolist() == [[2.0, 2.5, 3.0], [-1.0, -0.5, 0.0]]


def test_units_keep_order_of_first_appearance(tmp_path):
    lines = PANEL.splitlines()
    reordered = "\n".join([lines[0]] + lines[4:] + lines[1:4]) + "\n"
    assert read_panel(_write(tmp_path, reordered)).labels == ["b", "a"]


def test_comment_lines_are_skipped(tmp_path):
    sample = read_panel(_write(tmp_path, '# source="unit test"\n' + PANEL))
    assert sample.n == 2


def test_missing_row_is_ragged(tmp_path):
    text = "\n".join(line for line in PANEL.splitlines() if line != "b,0.5,0.5,-0.5") + "\n"
    with pytest.raises(RaggedPanel) as excinfo:
        read_panel(_write(tmp_path, text))
    assert excinfo.value.unit == "b"


def test_duplicate_time_is_ragged(tmp_path):
    with pytest.raises(RaggedPanel):
        read_panel(_write(tmp_path, PANEL + "a,1,2.0,3.0\n"))


def test_empty_cell_is_missing(tmp_path):
    with pytest.raises(MissingCell) as excinfo:
        read_panel(_write(tmp_path, PANEL.replace("a,0.5,1.5,2.5", "a,0.5,1.5,")))
    assert excinfo.value.unit == "a"
    assert excinfo.value.time == 0.5


def test_too_many_fields(tmp_path):
    with pytest.raises(PanelParseError) as excinfo:
        read_panel(_write(tmp_path, PANEL.replace("a,0.5,1.5,2.5", "a,0.5,1.5,2.5,9")))
    assert excinfo.value.line == 3


def test_non_numeric_value(tmp_path):
    with pytest.raises(PanelParseError) as excinfo:
        read_panel(_write(tmp_path, PANEL.replace("b,0,0.0,-1.0", "b,0,zero,-1.0")))
    assert excinfo.value.line == 5


def test_missing_column_and_empty_file(tmp_path):
    with pytest.raises(PanelParseError):
        read_panel(_write(tmp_path, PANEL.replace("response", "answer")))
    with pytest.raises(PanelParseError):
        read_panel(_write(tmp_path, ""))


def test_unequal_spacing(tmp_path):
    with pytest.raises(PanelParseError):
        read_panel(_write(tmp_path, PANEL.replace("a,0.5,", "a,0.4,").replace("b,0.5,", "b,0.4,")))


def test_custom_schema(tmp_path):
    text = PANEL.replace("unit,time,covariate,response", "id,year,x,y")
    schema = PanelSchema.parse("id, year, x, y")
    assert read_panel(_write(tmp_path, text), schema).labels == ["a", "b"]
    with pytest.raises(ValueError):
        PanelSchema.parse("id,year,x")
    with pytest.raises(ValueError):
        PanelSchema.parse("id,id,x,y")


def test_penn_shaped_panel_round_trips_bit_identically(tmp_path):
    sample = simulate(SimConfig(n=125, grid=Grid(1985.0, 2010.0, 26), seed=17))
    first = write_panel(sample, tmp_path / "first.csv", metadata={"seed": 17})
    restored = read_panel(first)
    assert restored.labels == sample.labels
    assert np.array_equal(restored.covariate_values, sample.covariate_values)
    assert np.array_equal(restored.response_values, sample.response_values)

    second = write_panel(restored, tmp_path / "second.csv", metadata={"seed": 17})
    assert first.read_bytes() == second.read_bytes()


def _bundle():
    bundle = ResultBundle(BundleKind.QuantileCurves, {"h_used": 0.25, "points": {"3": {"d1": 1.5}}})
    grid = Grid(0.0, 1.0, 26)
    for k in range(3):
        bundle.add(f"3/Q{k}", grid.points, np.sin(grid.points + k) / 3.0)
    return bundle


def test_empty_bundle_has_header_only(tmp_path):
    path = write_results(ResultBundle(BundleKind.CVTrace), tmp_path / "empty.csv")
    assert path.read_text(encoding="utf-8").splitlines() == ['# kind="cv_trace"', "series,t,value"]
    restored = read_results(path)
    assert restored.kind is BundleKind.CVTrace
    assert restored.series == []


def test_csv_bundle_layout(tmp_path):
    path = write_results(_bundle(), tmp_path / "curves.csv")
    rows = [line for line in path.read_text(encoding="utf-8").splitlines() if not line.startswith("#")]
    assert rows[0] == "series,t,value"
    assert len(rows) == 1 + 78


@pytest.mark.parametrize("fmt", [OutputFormat.CSV, OutputFormat.JSON])
def test_bundle_round_trip(tmp_path, fmt):
    suffix = f".{fmt.value}"
    first = write_results(_bundle(), tmp_path / f"first{suffix}")
    restored = read_results(first)
    assert restored.kind is BundleKind.QuantileCurves
    assert restored.metadata == _bundle().metadata
    assert restored.names == ["3/Q0", "3/Q1", "3/Q2"]
    assert np.array_equal(restored.get("3/Q1").v, _bundle().get("3/Q1").v)

    second = write_results(restored, tmp_path / f"second{suffix}")
    assert first.read_bytes() == second.read_bytes()


def test_bundle_lookup_and_format_detection(tmp_path):
    with pytest.raises(LookupError):
        _bundle().get("missing")
    assert OutputFormat.for_path(tmp_path / "x.JSON") is OutputFormat.JSON
    assert OutputFormat.for_path(tmp_path / "x.txt") is OutputFormat.CSV
    with pytest.raises(ValueError):
        _bundle().add("bad", [0.0, 1.0], [1.0])
