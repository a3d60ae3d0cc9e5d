"""
Error hierarchy for the bound and inference engine
"""

from typing import Any, Dict, Optional


class QteBoundsError(Exception):
    """Base class for all structured engine errors"""

    def __init__(self, message: str, context: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.message = message
        self.context = context or {}

    def to_dict(self) -> Dict[str, Any]:
        return {
            'error': type(self).__name__,
            'message': self.message,
            'context': self.context,
        }


class DatasetValidationError(QteBoundsError):
    """Input data violates a structural requirement (names the row or column)"""


class EmptyCellError(QteBoundsError):
    """A (d, z) cell needed for estimation has no observations"""

    def __init__(self, d: int, z_index: int, z_value: Optional[float] = None):
        super().__init__(
            f"empty cell (d={d}, z={z_value if z_value is not None else z_index})",
            {'d': d, 'z_index': z_index, 'z_value': z_value},
        )
        self.d = d
        self.z_index = z_index


class ZeroKernelWeightError(QteBoundsError):
    """All kernel weights vanish at the evaluation point"""


class SilpError(QteBoundsError):
    """Failure inside the semi-infinite program solver"""


class InfeasibleProblemError(SilpError):
    """The discretized program has no feasible point (corrupted inputs)"""


class AssumptionViolation(QteBoundsError):
    """A regularity precondition (ball inactive, regular active set, tangency) does not hold"""


class NotSmoothError(QteBoundsError):
    """An operation needing smoothed estimators received step estimators"""


class QuadratureError(QteBoundsError):
    """Adaptive quadrature did not reach the requested tolerance"""


class EmptySolutionBankError(QteBoundsError):
    """Fallback evaluation requested with no banked solutions"""
