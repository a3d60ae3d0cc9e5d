"""
Dataset and regularity checks
"""

from .dataset_validator import ValidationIssue, ValidationReport, ValidationSeverity, validate_dataset
from .regularity_checker import RegularityChecker, RegularityReport, require_regular_active_set

__all__ = [
    'ValidationIssue', 'ValidationReport', 'ValidationSeverity', 'validate_dataset',
    'RegularityChecker', 'RegularityReport', 'require_regular_active_set',
]
