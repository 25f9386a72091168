from computations.spatial_quantile_solver import FitStatus
from utils.results_analyzer import analyze_fits, summary_message


def test_analyze_fits():
    results = analyze_fits(
        {
            "a/Q(0)": FitStatus.CandidatePoint,
            "a/Q(tau)": FitStatus.NewtonConverged,
            "b/Q(0)": FitStatus.MaxIterations,
            "d/Q(0)": FitStatus.CandidatePoint,
        }
    )
    assert results["candidate_points"] == {"count": 2, "keys": ["a/Q(0)", "d/Q(0)"]}
    assert results["newton_converged"]["keys"] == ["a/Q(tau)"]
    assert results["max_iterations"]["keys"] == ["b/Q(0)"]
    assert set(results) == {"candidate_points", "newton_converged", "max_iterations"}


def test_summary_message():
    message = summary_message(analyze_fits({"x": FitStatus.NewtonConverged}), 1)
    assert "Newton converged: 1 / 1." in message
    assert "Max iterations: 0 / 1." in message
