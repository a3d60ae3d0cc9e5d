"""
Data models for the system
"""

from .dataset_models import CellCounts, Dataset, InstrumentSupport, Observation, tabulate_cells
from .estimate_models import (
    Bandwidths, CdfEstimate, CdfKind, CoefficientTriple, EvalGrid, PerturbationDirection, make_triple
)
from .silp_models import (
    ActiveSet, DualMeasure, LPSolution, Sense, SilpProblem, SolutionSets, SolverStatus, ToleranceSet
)
from .bound_models import BoundCurve, BoundsConfig, QteBounds, SolutionBank
from .inference_models import (
    CiResult, EnvelopeGradient, EnvelopeHessian, InnerOuterSplit, LimitTermsReport, SaddleReport,
    SaddleState, SmoothnessInputs
)
from .sim_models import SampleSizeSummary, SimParams, SimResult, TightenReport

__all__ = [
    'CellCounts', 'Dataset', 'InstrumentSupport', 'Observation', 'tabulate_cells',
    'Bandwidths', 'CdfEstimate', 'CdfKind', 'CoefficientTriple', 'EvalGrid', 'PerturbationDirection', 'make_triple',
    'ActiveSet', 'DualMeasure', 'LPSolution', 'Sense', 'SilpProblem', 'SolutionSets', 'SolverStatus',
    'ToleranceSet',
    'BoundCurve', 'BoundsConfig', 'QteBounds', 'SolutionBank',
    'CiResult', 'EnvelopeGradient', 'EnvelopeHessian', 'InnerOuterSplit', 'LimitTermsReport',
    'SaddleReport', 'SaddleState', 'SmoothnessInputs',
    'SampleSizeSummary', 'SimParams', 'SimResult', 'TightenReport',
]
