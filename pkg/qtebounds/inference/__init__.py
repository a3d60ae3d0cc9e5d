"""
Inference for the bound values: saddle-point checks, envelope derivatives and numerical delta intervals
"""

from .saddle import hadamard_derivative, lagrangian, saddle_check, saddle_state
from .envelope import (
    envelope_gradient, envelope_hessian, inner_value, smoothness_inputs, split_inner_outer, theta_limit_terms
)
from .numerical_delta import numerical_delta_ci, replication_ci, resampled_directions

__all__ = [
    'hadamard_derivative', 'lagrangian', 'saddle_check', 'saddle_state',
    'envelope_gradient', 'envelope_hessian', 'inner_value', 'smoothness_inputs', 'split_inner_outer',
    'theta_limit_terms',
    'numerical_delta_ci', 'replication_ci', 'resampled_directions',
]
