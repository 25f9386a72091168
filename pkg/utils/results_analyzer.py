from computations.spatial_quantile_solver import FitStatus


def analyze_fits(fits):
    """
    Analyzes a dictionary of quantile fit outcomes, keyed by evaluation point,
    and categorizes them by how the solver finished. It counts occurrences for
    three categories:
    - Fits whose minimiser is one of the data points.
    - Fits where the Newton iteration converged.
    - Fits that stopped at the iteration limit or a stalled line search.

    Args:
        fits (dict): A dictionary mapping evaluation point labels to a FitStatus.

    Returns:
        dict: A dictionary containing the counts and associated keys for each category:
            - 'candidate_points', 'newton_converged' and 'max_iterations'.
    """

    results = {
        'candidate_points': {'count': 0, 'keys': []},
        'newton_converged': {'count': 0, 'keys': []},
        'max_iterations': {'count': 0, 'keys': []},
    }

    for key, status in fits.items():
        if status is FitStatus.CandidatePoint:
            category = 'candidate_points'
        elif status is FitStatus.NewtonConverged:
            category = 'newton_converged'
        else:
            category = 'max_iterations'
        results[category]['count'] += 1
        results[category]['keys'].append(key)

    return results


def summary_message(results, total):
    """One line per category, in the form ``name: count / total``.

    Args:
        results (dict): Output of ``analyze_fits``.
        total (int): Number of fits analysed.

    Returns:
        str: The message, one tab-indented line per category.
    """
    return "".join(
        f"\n\t{name.replace('_', ' ').capitalize()}: {entry['count']} / {total}."
        for name, entry in results.items()
    )
