"""Exception hierarchy shared by all beamfsi modules.

Every error carries a category used by the command line front end to
choose a process exit code.
"""


class BeamFsiError(Exception):
    """Base class for all package errors."""

    exit_code = 1


class ValidationError(BeamFsiError, ValueError):
    """A parameter violates a documented precondition."""

    exit_code = 2


class ParseError(BeamFsiError, ValueError):
    """A configuration document is malformed."""

    exit_code = 2

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class InvalidLoad(ValidationError):
    """A beam load contains non-finite entries."""


class GridMismatch(ValidationError):
    """Arrays defined on different grids were combined."""


class ConfigNotSymmetric(ValidationError):
    """A symmetry check was requested on a configuration lacking z-parity."""


class ParityUndefined(ValidationError):
    """The grid has no z-mirror structure, so parity defects are undefined."""


class SolverError(BeamFsiError, RuntimeError):
    """Base class for numerical solver failures."""

    exit_code = 3


class NonConvergence(SolverError):
    """An iteration exceeded its cap without meeting its tolerance."""


class LinearSolveFailure(SolverError):
    """A linear solver stagnated or broke down."""


class SingularOperator(SolverError):
    """A discrete operator that should be invertible is singular."""


class GeometryError(BeamFsiError):
    """Invalid geometric configuration."""

    exit_code = 4


class ObstacleOutOfBounds(GeometryError, ValidationError):
    """Obstacle extents leave the channel."""

    exit_code = 4


class DegenerateJacobian(GeometryError):
    """The displacement map folds over (det J <= 0 somewhere)."""


class InadmissibleProfile(GeometryError):
    """A beam displacement violates the clearance bound."""


class InterpolationOutOfDomain(GeometryError):
    """A surface probe left the fluid region of the grid."""


class IoError(BeamFsiError, OSError):
    """Output could not be written."""

    exit_code = 5
