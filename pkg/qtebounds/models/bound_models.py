"""
Bound Models
Bound curves over y0, quantile treatment effect bounds and the banked solutions used outside the trusted set
"""

from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from ..config import config
from .estimate_models import Bandwidths
from .silp_models import Sense, ToleranceSet


@dataclass
class BoundsConfig:
    """Settings for one bound-curve computation"""
    tau: float = field(default_factory=lambda: config.DEFAULT_TAU)
    smoothed: bool = False
    bandwidths: Optional[Bandwidths] = None
    grid_cap: int = field(default_factory=lambda: config.GRID_CAP)
    grid_points: Optional[np.ndarray] = None
    margin_min: float = field(default_factory=lambda: config.MARGIN_MIN)
    trusted_interval: Optional[Tuple[float, float]] = None
    use_fallback: bool = True
    min_cell_size: int = field(default_factory=lambda: config.MIN_CELL_SIZE)
    tolerances: ToleranceSet = field(default_factory=ToleranceSet.from_config)
    n_workers: int = 1

    def to_dict(self) -> Dict[str, Any]:
        return {
            'tau': self.tau,
            'smoothed': self.smoothed,
            'bandwidths': None if self.bandwidths is None else self.bandwidths.to_dict(),
            'grid_cap': self.grid_cap,
            'grid_points': None if self.grid_points is None else np.asarray(self.grid_points).tolist(),
            'margin_min': self.margin_min,
            'trusted_interval': None if self.trusted_interval is None else list(self.trusted_interval),
            'use_fallback': self.use_fallback,
            'min_cell_size': self.min_cell_size,
            'tolerances': self.tolerances.to_dict(),
        }


@dataclass
class SolutionBank:
    """Optimal γ* collected on trusted points for one sense

    Every banked γ is feasible for the sense's constraint set, which does not depend on y0.
    """
    sense: Sense
    y0_points: List[float] = field(default_factory=list)
    gammas: List[np.ndarray] = field(default_factory=list)

    def add(self, y0: float, gamma: np.ndarray) -> None:
        self.y0_points.append(float(y0))
        self.gammas.append(np.asarray(gamma, dtype=float).copy())

    @property
    def size(self) -> int:
        return len(self.gammas)

    def as_matrix(self) -> np.ndarray:
        return np.vstack(self.gammas) if self.gammas else np.zeros((0, 0))


@dataclass
class BoundCurve:
    """Pointwise bounds on F_{Y0|D=1}(y0 | x) over a y0 grid"""
    y0_grid: np.ndarray
    upper_raw: np.ndarray
    lower_raw: np.ndarray
    upper: np.ndarray
    lower: np.ndarray
    trusted_mask: np.ndarray
    margins: np.ndarray
    upper_status: List[str]
    lower_status: List[str]
    diagnostics: Dict[str, Any] = field(default_factory=dict)

    @property
    def n_failed(self) -> int:
        """Points whose upper or lower value fell back to the vacuous bound"""
        ok = ('optimal', 'ball_active', 'fallback')
        return sum(u not in ok or lo not in ok for u, lo in zip(self.upper_status, self.lower_status))

    @property
    def width(self) -> np.ndarray:
        return self.upper - self.lower

    def trusted_mean_width(self) -> float:
        if not np.any(self.trusted_mask):
            return float('nan')
        return float(np.mean(self.width[self.trusted_mask]))

    def to_records(self) -> List[Dict[str, Any]]:
        return [
            {
                'y0': float(self.y0_grid[i]),
                'lower': float(self.lower[i]),
                'upper': float(self.upper[i]),
                'lower_raw': float(self.lower_raw[i]),
                'upper_raw': float(self.upper_raw[i]),
                'trusted': bool(self.trusted_mask[i]),
                'margin': float(self.margins[i]),
                'lower_status': self.lower_status[i],
                'upper_status': self.upper_status[i],
            }
            for i in range(self.y0_grid.size)
        ]


@dataclass
class QteBounds:
    """Bounds on Q_{Y1|D=1}(τ) − Q_{Y0|D=1}(τ)"""
    tau_q: float
    q1: float
    q0_lb: float
    q0_ub: float
    qte_lb: float
    qte_ub: float

    def to_dict(self) -> Dict[str, Any]:
        return dict(self.__dict__)
