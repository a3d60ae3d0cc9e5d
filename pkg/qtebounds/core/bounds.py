"""
Bound Curves
Solves the upper and lower programs over a y0 grid, post-processes the curves and inverts them
into bounds on quantiles and quantile treatment effects
"""

import functools
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from loguru import logger

from ..exceptions import EmptySolutionBankError, QteBoundsError
from ..models.bound_models import BoundCurve, BoundsConfig, QteBounds, SolutionBank
from ..models.dataset_models import Dataset
from ..models.estimate_models import CoefficientTriple, EvalGrid
from ..models.silp_models import Sense, ToleranceSet
from ..utils.parallel import ordered_map
from ..verification.dataset_validator import validate_dataset
from .estimators import CoefficientEstimator
from .silp import SilpSolver, build_lower, build_upper, recession_margin

SOLVED = ('optimal', 'ball_active', 'fallback')


def default_y0_grid(dataset: Dataset, size: int = 101) -> np.ndarray:
    return np.linspace(float(np.min(dataset.y)), float(np.max(dataset.y)), size)


def _solve_point(triple: CoefficientTriple, sense: Sense, tau: float,
                 tolerances: ToleranceSet) -> Dict[str, Any]:
    """Worker: one program at one y0; solver errors are returned, not raised"""
    build = build_upper if sense == Sense.UPPER else build_lower
    try:
        sol = SilpSolver(tolerances).solve(build(triple, tau))
    except QteBoundsError as e:
        return {'status': 'error', 'value': np.nan, 'gamma': None, 'message': e.message}
    if not sol.status.is_solved:
        return {'status': sol.status.value, 'value': np.nan, 'gamma': None}
    return {
        'status': sol.status.value,
        'value': sol.value,
        'gamma': sol.gamma,
        'n_cuts': sol.n_cuts,
        'duality_gap': sol.duality_gap,
    }


def fallback_outside(bank: SolutionBank, triple: CoefficientTriple) -> Tuple[float, float]:
    """Objective γ₀ − γ₁'Δ₀(y₀) over banked solutions: (max, min)

    For an upper bank the min is a valid upper-bound surrogate; for a lower bank the max is a
    valid lower-bound surrogate.
    """
    if bank.size == 0:
        raise EmptySolutionBankError("no banked solutions to evaluate", {'sense': bank.sense.value})
    gammas = bank.as_matrix()
    values = gammas[:, 0] - gammas[:, 1:] @ triple.delta0_at_y0
    return float(np.max(values)), float(np.min(values))


def monotonize(upper_raw: np.ndarray, lower_raw: np.ndarray) -> Tuple[np.ndarray, np.ndarray, int]:
    """Clip to [0, 1], running min from the right (upper), running max from the left (lower)

    Missing values become vacuous (upper 1, lower 0). Returns the curves and the number of
    points where the monotone lower curve crossed the upper one before being capped.
    """
    upper = np.where(np.isnan(upper_raw), 1.0, np.clip(upper_raw, 0.0, 1.0))
    lower = np.where(np.isnan(lower_raw), 0.0, np.clip(lower_raw, 0.0, 1.0))
    upper = np.minimum.accumulate(upper[::-1])[::-1]
    lower = np.maximum.accumulate(lower)
    crossings = int(np.sum(lower > upper))
    return upper, np.minimum(lower, upper), crossings


def bound_curve(dataset: Dataset, y0_grid: Optional[Sequence[float]] = None,
                x: Optional[Sequence[float]] = None, cfg: Optional[BoundsConfig] = None) -> BoundCurve:
    """Pointwise bounds on F_{Y0|D=1}(y0 | x) for every y0 in the grid"""
    cfg = cfg or BoundsConfig()
    validate_dataset(dataset, min_cell=cfg.min_cell_size).raise_for_errors()

    y0 = default_y0_grid(dataset) if y0_grid is None else np.asarray(y0_grid, dtype=float)
    if y0.size == 0 or np.any(np.diff(y0) <= 0):
        raise ValueError("y0 grid must be non-empty and strictly increasing")

    grid = EvalGrid(cfg.grid_points) if cfg.grid_points is not None else None
    estimator = CoefficientEstimator(dataset, bandwidths=cfg.bandwidths, grid=grid, x=x,
                                     smoothed=cfg.smoothed, grid_cap=cfg.grid_cap)
    triples = [estimator.triple(v) for v in y0]
    margins = np.array([recession_margin(t, cfg.tolerances) for t in triples])
    if cfg.trusted_interval is not None:
        lo, hi = cfg.trusted_interval
        trusted = (y0 >= lo) & (y0 <= hi)
    else:
        trusted = margins >= cfg.margin_min
    logger.info(f"Bound curve over {y0.size} points, grid size {estimator.grid.size}, "
                f"{int(trusted.sum())} trusted")

    upper_raw = np.full(y0.size, np.nan)
    lower_raw = np.full(y0.size, np.nan)
    upper_status: List[str] = [''] * y0.size
    lower_status: List[str] = [''] * y0.size
    banks = {Sense.UPPER: SolutionBank(Sense.UPPER), Sense.LOWER: SolutionBank(Sense.LOWER)}
    gaps: List[float] = []
    cuts: List[int] = []

    def run(indices: List[int]) -> None:
        for sense, raw, status in ((Sense.UPPER, upper_raw, upper_status),
                                   (Sense.LOWER, lower_raw, lower_status)):
            worker = functools.partial(_solve_point, sense=sense, tau=cfg.tau, tolerances=cfg.tolerances)
            outcomes = ordered_map(worker, [triples[i] for i in indices], cfg.n_workers)
            for i, out in zip(indices, outcomes):
                raw[i] = out['value']
                status[i] = out['status']
                if out['status'] in SOLVED:
                    gaps.append(out['duality_gap'])
                    cuts.append(out['n_cuts'])
                    if trusted[i] and out['status'] != 'fallback':
                        banks[sense].add(y0[i], out['gamma'])
                else:
                    logger.warning(f"{sense.value} program failed at y0={y0[i]:.6g}: {out['status']}")

    run([i for i in range(y0.size) if trusted[i]])
    untrusted = [i for i in range(y0.size) if not trusted[i]]
    fallback_ready = cfg.use_fallback and banks[Sense.UPPER].size > 0 and banks[Sense.LOWER].size > 0
    if cfg.use_fallback and untrusted and not fallback_ready:
        logger.warning(f"Solution bank empty (upper {banks[Sense.UPPER].size}, lower {banks[Sense.LOWER].size}); "
                       f"re-solving {len(untrusted)} untrusted point(s) instead of the fallback")
    if fallback_ready:
        for i in untrusted:
            _, upper_raw[i] = fallback_outside(banks[Sense.UPPER], triples[i])
            lower_raw[i], _ = fallback_outside(banks[Sense.LOWER], triples[i])
            upper_status[i] = lower_status[i] = 'fallback'
    else:
        run(untrusted)

    upper, lower, crossings = monotonize(upper_raw, lower_raw)
    if crossings:
        logger.warning(f"Lower curve exceeded the upper curve at {crossings} point(s); capped")

    return BoundCurve(
        y0_grid=y0,
        upper_raw=upper_raw,
        lower_raw=lower_raw,
        upper=upper,
        lower=lower,
        trusted_mask=trusted,
        margins=margins,
        upper_status=upper_status,
        lower_status=lower_status,
        diagnostics={
            'grid_size': estimator.grid.size,
            'bandwidths': estimator.bandwidths.to_dict(),
            'crossings': crossings,
            'fallback_used': bool(fallback_ready and untrusted),
            'bank_sizes': {s.value: b.size for s, b in banks.items()},
            'max_duality_gap': float(max(gaps)) if gaps else 0.0,
            'max_cuts': int(max(cuts)) if cuts else 0,
            'x_on_boundary': estimator.x_on_boundary,
            # lower program mirrors the upper one
            'mirrored_lower_program': True,
        },
    )


def quantile_invert(curve: BoundCurve, tau_q: float) -> Tuple[float, float]:
    """(q0_lb, q0_ub): first y0 where the upper (resp. lower) curve reaches τ; +inf if never"""
    if not 0 < tau_q < 1:
        raise ValueError("quantile level must lie in (0, 1)")

    def first_reaching(values: np.ndarray) -> float:
        hits = np.flatnonzero(values >= tau_q)
        return float(curve.y0_grid[hits[0]]) if hits.size else float('inf')

    return first_reaching(curve.upper), first_reaching(curve.lower)


def qte_bounds(dataset: Dataset, tau_q: float, y0_grid: Optional[Sequence[float]] = None,
               x: Optional[Sequence[float]] = None, cfg: Optional[BoundsConfig] = None,
               curve: Optional[BoundCurve] = None) -> QteBounds:
    """Bounds on Q_{Y1|D=1}(τ) − Q_{Y0|D=1}(τ) from the treated quantile and the inverted curve"""
    cfg = cfg or BoundsConfig()
    curve = curve or bound_curve(dataset, y0_grid=y0_grid, x=x, cfg=cfg)
    estimator = CoefficientEstimator(dataset, bandwidths=cfg.bandwidths, x=x, smoothed=False,
                                     grid_cap=cfg.grid_cap)
    q1 = estimator.quantile(1, tau_q)
    q0_lb, q0_ub = quantile_invert(curve, tau_q)
    return QteBounds(
        tau_q=tau_q, q1=q1, q0_lb=q0_lb, q0_ub=q0_ub,
        qte_lb=q1 - q0_ub, qte_ub=q1 - q0_lb,
    )


def curve_widths(curve: BoundCurve) -> Dict[str, Any]:
    return {
        'widths': curve.width.tolist(),
        'trusted_mean_width': curve.trusted_mean_width(),
        'max_width': float(np.max(curve.width)),
    }
