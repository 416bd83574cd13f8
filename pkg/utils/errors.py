"""Exception hierarchy shared by the solvers and the CLI.

Each error carries the process exit code the CLI reports for it.
"""

from typing import Any, Dict, Optional


class BeamformingError(Exception):
    """Base class for all solver errors."""

    exit_code = 5

    def to_dict(self) -> Dict[str, Any]:
        """Structured form printed by the CLI."""
        return {'error': type(self).__name__, 'message': str(self)}


class InstanceParseError(BeamformingError):
    """Instance, solution or config file is malformed."""

    exit_code = 2

    def __init__(self, message: str, field: Optional[str] = None, line: Optional[int] = None):
        location = []
        if line is not None:
            location.append(f"line {line}")
        if field is not None:
            location.append(f"field '{field}'")
        prefix = f"{', '.join(location)}: " if location else ""
        super().__init__(prefix + message)
        self.field = field
        self.line = line

    def to_dict(self) -> Dict[str, Any]:
        data = super().to_dict()
        data.update({'field': self.field, 'line': self.line})
        return data


class DegenerateChannels(BeamformingError):
    """Channel Gram matrix is singular to working precision."""

    exit_code = 3

    def __init__(self, message: str, condition: float):
        super().__init__(message)
        self.condition = condition

    def to_dict(self) -> Dict[str, Any]:
        data = super().to_dict()
        data['condition'] = self.condition
        return data


class InfeasibleInstance(BeamformingError):
    """No beamformer can meet the SINR targets."""

    exit_code = 4


class NoFeasibleBranch(BeamformingError):
    """Both continuation branches failed.

    The report holds the branch diagnostics and the oracle fallback answer.
    """

    exit_code = 4

    def __init__(self, message: str, report: Any = None):
        super().__init__(message)
        self.report = report


class SingularTangentSystem(BeamformingError):
    """The 2x2 tangency system of the exact d=0 solution is singular."""


class SingularSystem(BeamformingError):
    """A KKT linear system is singular beyond the pivot threshold."""

    def __init__(self, message: str, w: float, pivot: float, scale: float):
        super().__init__(f"{message} (w={w:.6g}, |pivot|={pivot:.3e}, max-norm={scale:.3e})")
        self.w = w
        self.pivot = pivot
        self.scale = scale


class CorrectionDiverged(BeamformingError):
    """Newton correction did not reach the tolerance."""

    def __init__(self, message: str, residual: float):
        super().__init__(message)
        self.residual = residual


class BranchFailed(BeamformingError):
    """A continuation branch could not be followed to w=1."""

    def __init__(self, message: str, w: float, reason: str, last_state: Any = None):
        super().__init__(message)
        self.w = w
        self.reason = reason
        self.last_state = last_state


class NotOnConstraintSurface(BeamformingError):
    """Candidate does not satisfy the constraints the procedure assumes."""


class NoIntersectionFound(BeamformingError):
    """Root finding failed although existence is guaranteed; treat as a bug."""


class OracleNoFeasiblePoint(BeamformingError):
    """No start of the reference optimizer ended feasible."""

    exit_code = 4
