"""
Core estimation and optimization: sample loading, coefficient estimation, the simplex engine,
the bound programs and the bound curves built from them
"""

from .data_loader import cell_counts, dump_csv, load_csv
from .estimators import CoefficientEstimator, coefficient_triple, default_bandwidths, default_grid
from .simplex import RevisedSimplex
from .silp import SilpSolver, build_lower, build_upper, extract_dual, recession_margin, solve
# bounds pulls in verification, which needs the modules above
from .bounds import bound_curve, qte_bounds

__all__ = [
    'cell_counts', 'dump_csv', 'load_csv',
    'CoefficientEstimator', 'coefficient_triple', 'default_bandwidths', 'default_grid',
    'RevisedSimplex',
    'SilpSolver', 'build_lower', 'build_upper', 'extract_dual', 'recession_margin', 'solve',
    'bound_curve', 'qte_bounds',
]
