"""Exception hierarchy.

The CLI maps these onto exit codes: validation problems exit with 2,
I/O problems (``OSError``) with 3, and numerical failures with 4.
"""


class VAMorphError(Exception):
    """Base class for all toolkit errors."""


class ValidationError(VAMorphError, ValueError):
    """Input violates a documented precondition."""


class TemplateError(ValidationError):
    pass


class PlanningError(ValidationError):
    pass


class LandmarkError(ValidationError):
    pass


class ManifestError(ValidationError):
    pass


class ComputationError(VAMorphError, ArithmeticError):
    """A numerical routine could not produce a result."""


class TriangulationError(ComputationError):
    pass


class DegenerateTriangleError(ComputationError):
    pass


class SingularSystemError(ComputationError):
    pass


class MetricError(ComputationError):
    pass


class MorphRejected(ComputationError):
    """A morph was refused by the misalignment check."""

    def __init__(self, reason: str, detail: str = ""):
        self.reason = reason
        self.detail = detail
        super().__init__(f"{reason}: {detail}" if detail else reason)
