"""Exceptions raised by the functional quantile regression library."""


class FunctionalQuantileError(Exception):
    """Base class for every error raised by this package."""


class GridMismatch(FunctionalQuantileError, ValueError):
    """Two curves that must share a grid do not."""


class DimensionMismatch(FunctionalQuantileError, ValueError):
    """Coefficient vectors, bases or matrices have incompatible sizes."""


class InvalidArgument(FunctionalQuantileError, ValueError):
    """A numeric argument lies outside its admissible range."""


class InvalidP(InvalidArgument):
    """The mass level p of a maximal depth set is not in (0, 1)."""


class EmptyNeighborhood(FunctionalQuantileError, LookupError):
    """No covariate lies within the bandwidth of the evaluation point."""


class DegenerateNeighborhood(FunctionalQuantileError, LookupError):
    """The neighborhood holds too few observations for the estimator."""


class AllInfeasible(FunctionalQuantileError, LookupError):
    """No candidate bandwidth produced a finite cross-validation score."""


class NotDifferentiable(FunctionalQuantileError, ArithmeticError):
    """The quantile objective is evaluated at (or next to) a data point."""

    def __init__(self, index: int):
        super().__init__(f"Objective is not differentiable at response {index}.")
        self.index = index


class SingularHessian(FunctionalQuantileError, ArithmeticError):
    """The Newton operator could not be factorised even after ridge regularisation."""


class PanelError(FunctionalQuantileError, ValueError):
    """A panel CSV file does not describe a complete functional sample."""


class MissingCell(PanelError):
    def __init__(self, unit: str, time: float):
        super().__init__(f"Missing value for unit '{unit}' at time {time!r}.")
        self.unit = unit
        self.time = time


class RaggedPanel(PanelError):
    def __init__(self, unit: str, reason: str = "time points differ from the shared grid"):
        super().__init__(f"Unit '{unit}' is ragged: {reason}.")
        self.unit = unit


class PanelParseError(PanelError):
    def __init__(self, line: int | None, reason: str):
        where = f"line {line}" if line is not None else "input"
        super().__init__(f"Could not parse panel ({where}): {reason}")
        self.line = line


class EvaluationPointError(FunctionalQuantileError):
    """An estimator failed at one evaluation point of a command-line run."""

    def __init__(self, label: str, cause: Exception):
        super().__init__(f"Evaluation point '{label}': {cause}")
        self.label = label
        self.cause = cause
