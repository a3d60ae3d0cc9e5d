"""
Monte Carlo design, quadrature truth oracle and replication studies
"""

from .dgp import LatentDraws, dgp_latent, dgp_sample
from .oracle import truth_cdf, truth_cdf_treated, truth_qte, truth_quantile
from .study import (
    PROFILES, oracle_trusted_interval, reference_curve, replicate, study_bounds_config, tighten_report
)

__all__ = [
    'LatentDraws', 'dgp_latent', 'dgp_sample',
    'truth_cdf', 'truth_cdf_treated', 'truth_qte', 'truth_quantile',
    'PROFILES', 'oracle_trusted_interval', 'reference_curve', 'replicate', 'study_bounds_config',
    'tighten_report',
]
