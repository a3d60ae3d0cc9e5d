"""
Dataset Validation
Checks instrument cells and covariates before estimation and collects issues into a report
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List

import numpy as np
from loguru import logger

from ..config import config
from ..exceptions import DatasetValidationError
from ..models.dataset_models import Dataset, tabulate_cells


class ValidationSeverity(Enum):
    """Severity levels for validation issues"""
    ERROR = "error"
    WARNING = "warning"
    INFO = "info"


@dataclass
class ValidationIssue:
    """Represents one finding of a validation rule"""
    rule_id: str
    severity: ValidationSeverity
    message: str
    context: Dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'rule_id': self.rule_id,
            'severity': self.severity.value,
            'message': self.message,
            'context': self.context,
        }


@dataclass
class ValidationReport:
    """Issues found in one dataset"""
    issues: List[ValidationIssue] = field(default_factory=list)
    summary: Dict[str, Any] = field(default_factory=dict)

    @property
    def errors(self) -> List[ValidationIssue]:
        return [i for i in self.issues if i.severity == ValidationSeverity.ERROR]

    @property
    def is_valid(self) -> bool:
        return not self.errors

    def raise_for_errors(self) -> None:
        if self.errors:
            first = self.errors[0]
            raise DatasetValidationError(first.message, dict(first.context, rule_id=first.rule_id))

    def to_dict(self) -> Dict[str, Any]:
        return {
            'is_valid': self.is_valid,
            'summary': self.summary,
            'issues': [i.to_dict() for i in self.issues],
        }


def validate_dataset(dataset: Dataset, min_cell: int = config.MIN_CELL_SIZE) -> ValidationReport:
    """Flag empty or undersized (d, z) cells, constant covariates and one-sided instruments"""
    report = ValidationReport()
    counts = tabulate_cells(dataset)
    support = dataset.support
    report.summary = {
        'n': dataset.n,
        'x_dim': dataset.x_dim,
        'instrument_values': list(support.values),
        'reference_value': support.reference_value,
        'cell_counts': counts.to_dict(),
    }

    for d, k in counts.cells_below(min_cell):
        n_cell = counts.count(d, k)
        report.issues.append(ValidationIssue(
            rule_id="CELL001" if n_cell == 0 else "CELL002",
            severity=ValidationSeverity.ERROR,
            message=(f"{'empty' if n_cell == 0 else 'undersized'} cell (d={d}, z={support.values[k]}) "
                     f"has {n_cell} observations, need {min_cell}"),
            context={'d': d, 'z': support.values[k], 'z_index': k, 'count': n_cell},
        ))

    for j in range(dataset.x_dim):
        if np.ptp(dataset.x[:, j]) == 0:
            report.issues.append(ValidationIssue(
                rule_id="COV001",
                severity=ValidationSeverity.WARNING,
                message=f"covariate {j} is constant",
                context={'column': j},
            ))

    p = [float(np.mean(dataset.d[dataset.z_index == k])) if np.any(dataset.z_index == k) else float('nan')
         for k in range(support.size)]
    report.summary['treated_share_by_z'] = p
    finite = [v for v in p if np.isfinite(v)]
    if finite and max(finite) - min(finite) == 0:
        report.issues.append(ValidationIssue(
            rule_id="INS001",
            severity=ValidationSeverity.WARNING,
            message="treated share does not vary with the instrument",
            context={'treated_share_by_z': p},
        ))

    report.issues.append(ValidationIssue(
        rule_id="INS002",
        severity=ValidationSeverity.INFO,
        message=f"reference instrument value {support.reference_value}",
        context={'reference_index': support.reference_index},
    ))

    if report.errors:
        logger.warning(f"Dataset validation found {len(report.errors)} error(s)")
    return report
