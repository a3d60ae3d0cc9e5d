"""
Simulation Studies
Replicated bound curves across sample sizes, large-n tightening across instrument support sizes
and the named study profiles
"""

import dataclasses
import functools
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from loguru import logger

from ..core.bounds import bound_curve
from ..exceptions import QteBoundsError
from ..models.bound_models import BoundCurve, BoundsConfig
from ..models.sim_models import SampleSizeSummary, SimParams, SimResult, TightenReport
from ..utils.parallel import ordered_map
from ..utils.seeding import derive_seed
from .dgp import dgp_sample
from .oracle import truth_cdf, truth_quantile

PROFILES: Dict[str, Dict[str, Any]] = {
    'smoke': {
        'n_reps': 2,
        'n_list': [200],
        'l_list': [2],
        'grid': {'lo': -6.0, 'hi': 6.0, 'size': 13},
        'n_large': 2000,
    },
    'study': {
        'n_reps': 200,
        'n_list': [1000, 2000, 4000],
        'l_list': [2, 3, 4, 5],
        'grid': {'lo': -6.0, 'hi': 6.0, 'size': 49},
        'n_large': 100_000,
    },
}
FIGURE_MODE_N_LARGE = 10_000_000


def oracle_trusted_interval(params: SimParams) -> Tuple[float, float]:
    """Interquartile range of the true F_{Y₀|D=1}"""
    return truth_quantile(0.25, params), truth_quantile(0.75, params)


def study_bounds_config(params: SimParams, cfg: Optional[BoundsConfig] = None,
                        trusted_from_oracle: bool = False) -> BoundsConfig:
    """Bounds settings for one design; the trusted set is the oracle interquartile range when requested"""
    cfg = cfg or BoundsConfig()
    if trusted_from_oracle:
        cfg = dataclasses.replace(cfg, trusted_interval=oracle_trusted_interval(params))
    return cfg


def _replication(task: Tuple[int, int], params: SimParams, y0_grid: np.ndarray,
                 cfg: BoundsConfig) -> Optional[Tuple[np.ndarray, np.ndarray]]:
    """Worker: one (N, r) replication with seed derived from (seed, N, r)"""
    n, r = task
    draw = params.with_overrides(n=n, seed=derive_seed(params.seed, n, r))
    try:
        curve = bound_curve(dgp_sample(draw), y0_grid=y0_grid, cfg=cfg)
    except QteBoundsError as e:
        logger.warning(f"Replication N={n} r={r} failed: {e.message}")
        return None
    return curve.lower, curve.upper


def reference_curve(params: SimParams, n_large: int, y0_grid: Sequence[float],
                    cfg: Optional[BoundsConfig] = None) -> BoundCurve:
    """Single large-n bound curve standing in for the population bounds"""
    draw = params.with_overrides(n=n_large)
    logger.info(f"Reference bound curve at n={n_large}, L={params.n_instruments}")
    return bound_curve(dgp_sample(draw), y0_grid=y0_grid, cfg=cfg)


def replicate(params: SimParams, n_reps: int, n_list: Sequence[int], y0_grid: Sequence[float],
              level: float = 0.95, cfg: Optional[BoundsConfig] = None, n_workers: int = 1,
              n_large: Optional[int] = None, reference: Optional[BoundCurve] = None,
              trusted_from_oracle: bool = False) -> SimResult:
    """Bound curves over n_reps fresh samples for every N; failed replications are recorded and skipped

    The large-n reference comes from `reference` when given, else from a fresh draw of size n_large.
    """
    if n_reps < 2:
        raise ValueError("a replication study needs at least two replications")
    grid = np.asarray(y0_grid, dtype=float)
    cfg = dataclasses.replace(study_bounds_config(params, cfg, trusted_from_oracle), n_workers=1)
    tasks = [(int(n), r) for n in n_list for r in range(n_reps)]
    logger.info(f"Replicating {n_reps} draws for N in {list(n_list)} (L={params.n_instruments})")
    worker = functools.partial(_replication, params=params, y0_grid=grid, cfg=cfg)
    outcomes = ordered_map(worker, tasks, n_workers)

    by_n: List[SampleSizeSummary] = []
    for n in n_list:
        lower, upper, failed = [], [], []
        for (task_n, r), out in zip(tasks, outcomes):
            if task_n != n:
                continue
            if out is None:
                failed.append(r)
                lower.append(np.full(grid.size, np.nan))
                upper.append(np.full(grid.size, np.nan))
            else:
                lower.append(out[0])
                upper.append(out[1])
        by_n.append(SampleSizeSummary(n=int(n), lower_curves=np.vstack(lower),
                                      upper_curves=np.vstack(upper), failed=failed))
        if failed:
            logger.warning(f"N={n}: {len(failed)} of {n_reps} replications failed")

    result = SimResult(
        params=params,
        y0_grid=grid,
        truth=np.array([truth_cdf(y, params) for y in grid]),
        level=level,
        by_n=by_n,
    )
    ref = reference
    if ref is None and n_large:
        ref = reference_curve(params, n_large, grid, cfg)
    if ref is not None:
        result.reference_lower = ref.lower
        result.reference_upper = ref.upper
        result.trusted_mask = np.asarray(ref.trusted_mask, dtype=bool)
    elif cfg.trusted_interval is not None:
        lo, hi = cfg.trusted_interval
        result.trusted_mask = (grid >= lo) & (grid <= hi)
    return result


def tighten_report(params_base: SimParams, l_list: Sequence[int], n_large: int, y0_grid: Sequence[float],
                   cfg: Optional[BoundsConfig] = None, slack: float = 0.005,
                   trusted_from_oracle: bool = False) -> TightenReport:
    """Large-n bound widths for each instrument support size, with the weak-decrease check"""
    if list(l_list) != sorted(set(l_list)):
        raise ValueError("support sizes must be strictly increasing")
    grid = np.asarray(y0_grid, dtype=float)
    rows = []
    curves: Dict[int, BoundCurve] = {}
    for n_instruments in l_list:
        params = params_base.with_overrides(n_instruments=int(n_instruments))
        curve = reference_curve(params, n_large, grid, study_bounds_config(params, cfg, trusted_from_oracle))
        curves[int(n_instruments)] = curve
        rows.append({
            'L': int(n_instruments),
            'trusted_mean_width': curve.trusted_mean_width(),
            'mean_width': float(np.mean(curve.width)),
            'n_trusted': int(np.sum(curve.trusted_mask)),
            'n_failed': curve.n_failed,
        })
    table = pd.DataFrame(rows)

    widths = table['trusted_mean_width'].to_numpy()
    weakly_decreasing = bool(np.all(np.diff(widths) <= slack)) if widths.size > 1 else True
    pointwise = [float('nan')]
    for prev, cur in zip(l_list[:-1], l_list[1:]):
        both = curves[prev].trusted_mask & curves[cur].trusted_mask
        increase = curves[cur].width[both] - curves[prev].width[both]
        pointwise.append(float(np.max(increase)) if increase.size else float('nan'))
    table['max_pointwise_increase'] = pointwise
    if not weakly_decreasing:
        logger.warning(f"Trusted-interval width is not weakly decreasing in L: {widths.tolist()}")
    return TightenReport(table=table, curves=curves, weakly_decreasing=weakly_decreasing, slack=slack)
