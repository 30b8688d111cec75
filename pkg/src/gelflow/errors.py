"""Exception hierarchy. The CLI maps each family to its own exit code."""


class GelflowError(Exception):
    """Base class for all library errors."""


class InvalidParameterError(GelflowError, ValueError):
    """A material parameter or numerical argument violates its invariant."""


class ConfigError(GelflowError):
    """Malformed or invalid run configuration.

    Parameters
    ----------
    message : str
        What went wrong.
    path : str, optional
        Dotted key path into the JSON document, e.g. ``"material.K"``.
    """

    def __init__(self, message, path=None):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)


class MeshError(GelflowError):
    """Base class for mesh problems."""


class MeshParseError(MeshError):
    def __init__(self, message, line=None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


class MeshValidationError(MeshError):
    """A mesh invariant does not hold; ``invariant`` names it."""

    def __init__(self, invariant, detail=""):
        self.invariant = invariant
        super().__init__(f"{invariant}: {detail}" if detail else invariant)


class SolverError(GelflowError):
    """Base class for linear-solve and time-stepping failures."""


class SingularMatrixError(SolverError):
    def __init__(self, message, location=None):
        self.location = location
        super().__init__(message)


class RankDeficiencyError(SolverError):
    """The constrained (augmented) system is singular."""


class IncompatibilityError(SolverError):
    """Prescribed data violate a compatibility condition."""


class StepError(SolverError):
    """A time step failed; wraps the underlying error with the step index."""

    def __init__(self, step, cause):
        self.step = step
        self.cause = cause
        super().__init__(f"step {step}: {cause}")
