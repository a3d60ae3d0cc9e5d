"""
Data Generating Process
Latent-index selection model with a binomial instrument on {0, 1/(L-1), ..., 1}

    U ~ N(0, 1),  η = ρU + √(1 − ρ²) e
    U₁ = U + ξ₁,  U₀ = U₁ + ν
    D = 1(η ≤ π₀ + π₁Z),  Y = D·2U₁ + (1 − D)(1 + U₀)
"""

from dataclasses import dataclass

import numpy as np
from loguru import logger

from ..models.dataset_models import Dataset, InstrumentSupport
from ..models.sim_models import SimParams
from ..utils.seeding import task_rng


@dataclass(frozen=True)
class LatentDraws:
    """Every latent and observed variable of one draw, aligned by row"""
    u: np.ndarray
    eta: np.ndarray
    xi1: np.ndarray
    nu: np.ndarray
    u1: np.ndarray
    u0: np.ndarray
    z_index: np.ndarray
    z: np.ndarray
    d: np.ndarray
    y: np.ndarray


def dgp_latent(params: SimParams) -> LatentDraws:
    """Draw the full latent vector; identical params give bit-identical draws"""
    rng = task_rng(params.seed, params.n, params.n_instruments)
    n = params.n
    steps = params.n_instruments - 1

    z_index = rng.binomial(steps, params.binomial_p, size=n)
    u = rng.standard_normal(n)
    eta = params.rho * u + np.sqrt(1.0 - params.rho ** 2) * rng.standard_normal(n)
    xi1 = params.sigma_xi1 * rng.standard_normal(n)
    nu = params.sigma_nu * rng.standard_normal(n)

    u1 = u + xi1
    u0 = u1 + nu
    z = z_index / steps
    d = (eta <= params.pi0 + params.pi1 * z).astype(int)
    y = np.where(d == 1, 2.0 * u1, 1.0 + u0)
    return LatentDraws(u=u, eta=eta, xi1=xi1, nu=nu, u1=u1, u0=u0, z_index=z_index, z=z, d=d, y=y)


def dgp_sample(params: SimParams) -> Dataset:
    """Observed (Y, D, Z) sample without covariates"""
    draws = dgp_latent(params)
    support = InstrumentSupport(tuple(float(v) for v in params.support))
    dataset = Dataset(y=draws.y, d=draws.d, z_index=draws.z_index, support=support)
    logger.debug(f"Simulated n={params.n}, L={params.n_instruments}, treated share {draws.d.mean():.3f}")
    return dataset
