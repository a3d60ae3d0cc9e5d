"""
Truth Oracle
Population CDFs, quantiles and the QTE on the treated of the simulated design by one-dimensional
quadrature over the selection index, independent of the sampling code
"""

import math
import warnings
from typing import Callable

import numpy as np
from loguru import logger
from scipy import integrate, optimize
from scipy.special import ndtr
from scipy.stats import binom, norm

from ..exceptions import QuadratureError
from ..models.sim_models import SimParams

QUAD_EPSABS = 1e-12
QUAD_EPSREL = 1e-10
BRACKET = 40.0


def _instrument_weights(params: SimParams) -> np.ndarray:
    steps = params.n_instruments - 1
    return binom.pmf(np.arange(steps + 1), steps, params.binomial_p)


def _thresholds(params: SimParams) -> np.ndarray:
    return params.pi0 + params.pi1 * params.support


def _integrate(func: Callable[[float], float], upper: float) -> float:
    with warnings.catch_warnings():
        warnings.simplefilter('error', integrate.IntegrationWarning)
        try:
            value, _ = integrate.quad(func, -np.inf, upper, epsabs=QUAD_EPSABS, epsrel=QUAD_EPSREL, limit=200)
        except integrate.IntegrationWarning as e:
            raise QuadratureError(f"quadrature did not converge: {e}", {'upper': upper}) from e
    return float(value)


def _treated_mixture(conditional: Callable[[float], float], params: SimParams) -> float:
    """Σ_z w_z ∫_{η ≤ c_z} P(· | η = e) φ(e) de / Σ_z w_z Φ(c_z)"""
    weights = _instrument_weights(params)
    cutoffs = _thresholds(params)
    numerator = sum(
        w * _integrate(lambda e: conditional(e) * norm.pdf(e), c)
        for w, c in zip(weights, cutoffs)
    )
    denominator = float(np.sum(weights * ndtr(cutoffs)))
    return float(min(1.0, max(0.0, numerator / denominator)))


def truth_cdf(y0: float, params: SimParams) -> float:
    """F_{Y₀|D=1}(y₀) = P(1 + U₀ ≤ y₀ | D = 1)"""
    scale = math.sqrt(1.0 - params.rho ** 2 + params.sigma_xi1 ** 2 + params.sigma_nu ** 2)
    return _treated_mixture(lambda e: float(ndtr((y0 - 1.0 - params.rho * e) / scale)), params)


def truth_cdf_treated(y: float, params: SimParams) -> float:
    """F_{Y₁|D=1}(y) = P(2U₁ ≤ y | D = 1)"""
    scale = math.sqrt(1.0 - params.rho ** 2 + params.sigma_xi1 ** 2)
    return _treated_mixture(lambda e: float(ndtr((y / 2.0 - params.rho * e) / scale)), params)


def truth_quantile(tau_q: float, params: SimParams, arm: int = 0) -> float:
    """Oracle τ-quantile of Y₀ (arm 0) or Y₁ (arm 1) among the treated"""
    if not 0 < tau_q < 1:
        raise ValueError("quantile level must lie in (0, 1)")
    cdf = truth_cdf if arm == 0 else truth_cdf_treated
    root = optimize.brentq(lambda y: cdf(y, params) - tau_q, -BRACKET, BRACKET, xtol=1e-10)
    logger.debug(f"Oracle quantile arm={arm} tau={tau_q}: {root:.6f}")
    return float(root)


def truth_qte(tau_q: float, params: SimParams) -> float:
    """Q_{Y₁|D=1}(τ) − Q_{Y₀|D=1}(τ)"""
    return truth_quantile(tau_q, params, arm=1) - truth_quantile(tau_q, params, arm=0)
