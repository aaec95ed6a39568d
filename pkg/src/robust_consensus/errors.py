"""Exception hierarchy shared by the solver, geometry, and CLI layers."""

from pathlib import Path


class ConsensusError(Exception):
    """Base class for every error raised by robust_consensus."""


class MalformedProblem(ConsensusError, ValueError):
    """A LinearProgram whose shapes or bounds are inconsistent."""


class NumericalFailure(ConsensusError):
    """Factorization breakdown or an Optimal report that fails its certificate."""


class SolverFailure(ConsensusError):
    """A consensus solver received a status it cannot act on."""


class DimensionMismatch(ConsensusError, ValueError):
    """Measurements or vectors disagree on the variable dimension."""


class NonpositiveDelta(ConsensusError, ValueError):
    """Inlier threshold delta must be strictly positive."""


class MixedResidualArity(ConsensusError, ValueError):
    """Residuals mix norms or depth-bound presence, so blocks differ in size."""


class NonpositiveDepth(ConsensusError, ValueError):
    """The projective denominator is not positive at the evaluated point."""


class DegenerateSample(ConsensusError):
    """A minimal sample produced a singular linear system."""


class TooLarge(ConsensusError, ValueError):
    """Exhaustive enumeration requested above its size guard."""


class UnknownId(ConsensusError, KeyError):
    """An observation references a camera or point that does not exist."""

    def __str__(self) -> str:
        # KeyError quotes its argument; keep the plain message.
        return str(self.args[0]) if self.args else ""


class UnderconstrainedPoint(ConsensusError, ValueError):
    """A 3D point seen by fewer than two cameras."""


class DegenerateGeometry(ConsensusError):
    """Scene generation could not place a point in front of every camera."""


class DatasetError(ConsensusError):
    """A malformed line in a dataset file."""

    def __init__(self, path: Path | str, line_number: int, message: str):
        self.path = Path(path)
        self.line_number = line_number
        self.message = message
        super().__init__(f"{self.path}:{line_number}: {message}")


class ConfigError(ConsensusError, ValueError):
    """An invalid run configuration value, naming the offending field."""

    def __init__(self, field: str, message: str):
        self.field = field
        self.message = message
        super().__init__(f"{field}: {message}")
