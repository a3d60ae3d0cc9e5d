"""
Numerical Delta Method
Resamples the dataset, turns each resampled coefficient triple into a scaled perturbation direction
and propagates it through the directional derivative of the bound value
"""

import functools
import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
from loguru import logger

from ..config import config
from ..core.estimators import CoefficientEstimator
from ..core.silp import SilpSolver, build_lower, build_upper, solution_sets
from ..exceptions import QteBoundsError, SilpError
from ..models.bound_models import BoundsConfig
from ..models.dataset_models import Dataset
from ..models.estimate_models import Bandwidths, CoefficientTriple, EvalGrid, PerturbationDirection
from ..models.inference_models import CiResult
from ..models.silp_models import LPSolution, Sense, SolutionSets, SolverStatus, ToleranceSet
from ..utils.parallel import ordered_map
from ..utils.seeding import task_rng
from .saddle import hadamard_derivative


@dataclass
class ResampledDirections:
    """Base triple, the scaled directions n^κ(ξ*_b − ξ̂) and the draws that failed"""
    base: CoefficientTriple
    directions: List[Optional[PerturbationDirection]]
    scale: float

    @property
    def valid(self) -> List[PerturbationDirection]:
        return [d for d in self.directions if d is not None]

    @property
    def n_failed(self) -> int:
        return sum(d is None for d in self.directions)


def bound_value(triple: CoefficientTriple, sense: Sense, tau: float,
                tolerances: Optional[ToleranceSet] = None) -> LPSolution:
    build = build_upper if sense == Sense.UPPER else build_lower
    return SilpSolver(tolerances).solve(build(triple, tau))


def _resampled_triple(b: int, dataset: Dataset, y0: float, x: Optional[Sequence[float]],
                      bandwidths: Bandwidths, grid: EvalGrid, smoothed: bool,
                      seed: int) -> Optional[CoefficientTriple]:
    """Worker: pairs resample b evaluated on the base grid with the base bandwidths"""
    rng = task_rng(seed, b)
    sample = dataset.subset(rng.integers(0, dataset.n, size=dataset.n))
    try:
        estimator = CoefficientEstimator(sample, bandwidths=bandwidths, grid=grid, x=x, smoothed=smoothed)
        return estimator.triple(y0)
    except QteBoundsError as e:
        logger.debug(f"Resample {b} dropped: {e.message}")
        return None


def resampled_directions(dataset: Dataset, y0: float, x: Optional[Sequence[float]] = None,
                         cfg: Optional[BoundsConfig] = None, n_boot: int = 200, seed: int = 0,
                         kappa: float = config.KAPPA, n_workers: int = 1) -> ResampledDirections:
    """n^κ(ξ*_b − ξ̂) for b = 0..n_boot−1; draw b uses SeedSequence([seed, b])"""
    cfg = cfg or BoundsConfig()
    grid = EvalGrid(cfg.grid_points) if cfg.grid_points is not None else None
    estimator = CoefficientEstimator(dataset, bandwidths=cfg.bandwidths, grid=grid, x=x,
                                     smoothed=cfg.smoothed, grid_cap=cfg.grid_cap)
    base = estimator.triple(y0)
    worker = functools.partial(
        _resampled_triple, dataset=dataset, y0=float(y0), x=x, bandwidths=estimator.bandwidths,
        grid=estimator.grid, smoothed=cfg.smoothed, seed=seed,
    )
    triples = ordered_map(worker, list(range(n_boot)), n_workers)
    scale = dataset.n ** kappa
    directions = [None if t is None else t.difference(base, scale=scale) for t in triples]
    result = ResampledDirections(base=base, directions=directions, scale=scale)
    if result.n_failed:
        logger.warning(f"{result.n_failed} of {n_boot} resamples dropped (empty cells or zero weights)")
    return result


def _derivative_draws(base: CoefficientTriple, directions: Sequence[PerturbationDirection], sense: Sense,
                      sets: Optional[SolutionSets], point: float, step: float, resolve: bool, tau: float,
                      tolerances: ToleranceSet) -> np.ndarray:
    if not resolve and sets is not None:
        return np.array([hadamard_derivative(sets.gammas, sets.lambdas, d, sense) for d in directions])
    draws = np.full(len(directions), np.nan)
    for b, d in enumerate(directions):
        shifted = bound_value(base.shifted(d, step), sense, tau, tolerances)
        if shifted.status.is_solved:
            draws[b] = (shifted.value - point) / step
    return draws


def delta_interval(point: float, draws: np.ndarray, level: float, n: int,
                   kappa: float) -> Tuple[float, float]:
    """[φ̂ − n^{−κ} q_{1−α/2}, φ̂ − n^{−κ} q_{α/2}]"""
    alpha = 1.0 - level
    q_lo, q_hi = np.quantile(draws, [alpha / 2, 1 - alpha / 2])
    shrink = n ** (-kappa)
    return float(point - shrink * q_hi), float(point - shrink * q_lo)


def numerical_delta_ci(dataset: Dataset, y0: float, x: Optional[Sequence[float]] = None,
                       level: float = 0.95, n_boot: int = 200, step: Optional[float] = None,
                       seed: int = 0, kappa: float = config.KAPPA, sense: Sense = Sense.UPPER,
                       cfg: Optional[BoundsConfig] = None, resolve: bool = False,
                       n_workers: int = 1) -> CiResult:
    """Confidence interval for the upper (or lower) bound at y0

    Derivative draws reuse the base solution sets; `resolve=True` replaces them with exact
    re-solves [φ(ξ̂ + t_n δ_b) − φ(ξ̂)] / t_n.
    """
    if n_boot < 100:
        raise ValueError("numerical delta intervals need at least 100 resamples")
    if not 0 < level < 1:
        raise ValueError("level must lie in (0, 1)")
    cfg = cfg or BoundsConfig()
    n = dataset.n
    t_n = n ** (-kappa / 2) if step is None else float(step)
    if not t_n > 0:
        raise ValueError("step must be positive")

    resampled = resampled_directions(dataset, y0, x=x, cfg=cfg, n_boot=n_boot, seed=seed,
                                     kappa=kappa, n_workers=n_workers)
    base_solution = bound_value(resampled.base, sense, cfg.tau, cfg.tolerances)
    if not base_solution.status.is_solved:
        raise SilpError(f"base {sense.value} program not solved at y0={y0}",
                        {'status': base_solution.status.value, 'y0': y0})
    ball_active = base_solution.status == SolverStatus.BALL_ACTIVE
    if ball_active and not resolve:
        # grid multipliers alone do not give the derivative once cuts carry mass
        logger.info(f"Ball constraint binds at y0={y0}; derivative draws use exact re-solves")
        resolve = True
    sets = None if ball_active else solution_sets(base_solution, value_tol=config.VALUE_TOL,
                                                  cap=config.SOLUTION_SET_CAP, tolerances=cfg.tolerances)

    point = base_solution.value
    draws = _derivative_draws(resampled.base, resampled.valid, sense, sets, point, t_n, resolve,
                              cfg.tau, cfg.tolerances)
    draws = draws[np.isfinite(draws)]
    if draws.size == 0:
        raise SilpError("every derivative draw failed", {'y0': y0})
    lo, hi = delta_interval(point, draws, level, n, kappa)

    metadata = {
        'sense': sense.value,
        'kappa': kappa,
        'step': t_n,
        'n': n,
        'n_boot': n_boot,
        'n_failed': n_boot - int(draws.size),
        'resolve': resolve,
        'ball_active': ball_active,
        'unique_solution': None if sets is None else sets.is_singleton,
        'solution_set_truncated': False if sets is None else sets.truncated,
        'seed': seed,
    }
    if sets is not None and not sets.is_singleton:
        # non-unique solution sets make the derivative nonlinear in δ
        metadata['bootstrap_validity_caveat'] = True
        logger.warning(f"Solution set at y0={y0} is not a singleton; interval may under-cover")
    result = CiResult(lo=lo, hi=hi, level=level, method='numerical_delta', point=point, y0=float(y0),
                      draws=draws, metadata=metadata)
    if not result.contains_point:
        logger.warning(f"Point estimate {point:.6g} outside its interval [{lo:.6g}, {hi:.6g}]")
    return result


def replication_ci(values: Sequence[float], point: float, level: float = 0.95,
                   y0: float = math.nan) -> CiResult:
    """Percentile interval from independent replications of a bound value"""
    arr = np.asarray(values, dtype=float)
    arr = arr[np.isfinite(arr)]
    if arr.size < 2:
        raise ValueError("replication interval needs at least two finite values")
    alpha = 1.0 - level
    lo, hi = np.quantile(arr, [alpha / 2, 1 - alpha / 2])
    return CiResult(lo=float(lo), hi=float(hi), level=level, method='replication', point=point,
                    y0=float(y0), draws=arr)
