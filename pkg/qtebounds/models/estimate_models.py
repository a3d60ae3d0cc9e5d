"""
Estimate Models
Evaluation grids, tabulated CDF estimates, bandwidths and the coefficient triple fed to the SILP
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, Optional

import numpy as np


class CdfKind(Enum):
    """Indicator (step) or normal-CDF smoothed estimator"""
    STEP = "step"
    SMOOTHED = "smoothed"


@dataclass(frozen=True)
class EvalGrid:
    """Strictly increasing finite grid standing in for the continuum of constraints"""
    points: np.ndarray

    def __post_init__(self):
        pts = np.array(self.points, dtype=float).ravel()
        if pts.size < 2:
            raise ValueError("evaluation grid needs at least two points")
        if not np.all(np.isfinite(pts)):
            raise ValueError("evaluation grid must be finite")
        if np.any(np.diff(pts) <= 0):
            raise ValueError("evaluation grid must be strictly increasing")
        pts.setflags(write=False)
        object.__setattr__(self, 'points', pts)

    @property
    def size(self) -> int:
        return int(self.points.size)

    @property
    def y_lo(self) -> float:
        return float(self.points[0])

    @property
    def y_hi(self) -> float:
        return float(self.points[-1])

    def index_of(self, y: float) -> int:
        """Index of the grid point equal to y (nearest within 1e-12 relative)"""
        k = int(np.argmin(np.abs(self.points - y)))
        if abs(self.points[k] - y) > 1e-12 * max(1.0, abs(y)):
            raise KeyError(f"{y} is not a grid point")
        return k

    def to_dict(self) -> Dict[str, Any]:
        return {'points': self.points.tolist()}


@dataclass(frozen=True)
class CdfEstimate:
    """A function of y tabulated on an EvalGrid"""
    grid: EvalGrid
    values: np.ndarray
    kind: CdfKind = CdfKind.STEP

    def __post_init__(self):
        vals = np.array(self.values, dtype=float).ravel()
        if vals.shape != self.grid.points.shape:
            raise ValueError("tabulated values do not match the grid")
        vals.setflags(write=False)
        object.__setattr__(self, 'values', vals)

    def at(self, y: float) -> float:
        return float(self.values[self.grid.index_of(y)])


@dataclass
class Bandwidths:
    """Kernel bandwidths per conditioning group

    h_d: per treatment arm d (vector over covariate dimensions), used for F(y | d, x).
    h_prime: per arm d, used for F(y | d, z, x).
    h_dagger: used for the propensity p(z, x).
    b_n: outcome smoothing bandwidth, None for step estimators.
    """
    h_d: Dict[int, np.ndarray] = field(default_factory=dict)
    h_prime: Dict[int, np.ndarray] = field(default_factory=dict)
    h_dagger: Optional[np.ndarray] = None
    b_n: Optional[float] = None

    def to_dict(self) -> Dict[str, Any]:
        return {
            'h_d': {str(k): v.tolist() for k, v in self.h_d.items()},
            'h_prime': {str(k): v.tolist() for k, v in self.h_prime.items()},
            'h_dagger': None if self.h_dagger is None else self.h_dagger.tolist(),
            'b_n': self.b_n,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'Bandwidths':
        return cls(
            h_d={int(k): np.asarray(v, dtype=float) for k, v in data.get('h_d', {}).items()},
            h_prime={int(k): np.asarray(v, dtype=float) for k, v in data.get('h_prime', {}).items()},
            h_dagger=None if data.get('h_dagger') is None else np.asarray(data['h_dagger'], dtype=float),
            b_n=data.get('b_n'),
        )


@dataclass(frozen=True)
class CoefficientTriple:
    """(Δ̂₀(y₀), Δ̂₁(·), F̂(·|1,x)) for one evaluation point y₀

    delta0_at_y0 has length L-1; delta1 has shape (L-1, M) on the grid of f_treated.
    """
    y0: float
    delta0_at_y0: np.ndarray
    delta1: np.ndarray
    f_treated: CdfEstimate
    x_on_boundary: bool = False

    def __post_init__(self):
        d0 = np.array(self.delta0_at_y0, dtype=float).ravel()
        d1 = np.array(self.delta1, dtype=float)
        if d1.ndim == 1:
            d1 = d1.reshape(1, -1)
        if d1.shape != (d0.size, self.f_treated.grid.size):
            raise ValueError(
                f"delta1 has shape {d1.shape}, expected {(d0.size, self.f_treated.grid.size)}"
            )
        d0.setflags(write=False)
        d1.setflags(write=False)
        object.__setattr__(self, 'delta0_at_y0', d0)
        object.__setattr__(self, 'delta1', d1)

    @property
    def grid(self) -> EvalGrid:
        return self.f_treated.grid

    @property
    def n_instruments(self) -> int:
        """L, the size of the instrument support"""
        return int(self.delta0_at_y0.size) + 1

    def shifted(self, direction: 'PerturbationDirection', t: float) -> 'CoefficientTriple':
        """ξ + t·δ"""
        direction.check_compatible(self)
        return CoefficientTriple(
            y0=self.y0,
            delta0_at_y0=self.delta0_at_y0 + t * direction.delta0,
            delta1=self.delta1 + t * direction.delta1,
            f_treated=CdfEstimate(self.grid, self.f_treated.values + t * direction.delta_f,
                                  self.f_treated.kind),
            x_on_boundary=self.x_on_boundary,
        )

    def difference(self, other: 'CoefficientTriple', scale: float = 1.0) -> 'PerturbationDirection':
        """scale·(self − other), the perturbation direction between two estimates on one grid"""
        if not np.array_equal(self.grid.points, other.grid.points):
            raise ValueError("triples live on different grids")
        return PerturbationDirection(
            delta0=scale * (self.delta0_at_y0 - other.delta0_at_y0),
            delta1=scale * (self.delta1 - other.delta1),
            delta_f=scale * (self.f_treated.values - other.f_treated.values),
        )

    def to_dict(self) -> Dict[str, Any]:
        return {
            'y0': self.y0,
            'delta0_at_y0': self.delta0_at_y0.tolist(),
            'delta1': self.delta1.tolist(),
            'grid': self.grid.points.tolist(),
            'f_treated': self.f_treated.values.tolist(),
            'kind': self.f_treated.kind.value,
            'x_on_boundary': self.x_on_boundary,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'CoefficientTriple':
        grid = EvalGrid(np.asarray(data['grid'], dtype=float))
        return cls(
            y0=float(data['y0']),
            delta0_at_y0=np.asarray(data['delta0_at_y0'], dtype=float),
            delta1=np.asarray(data['delta1'], dtype=float),
            f_treated=CdfEstimate(grid, np.asarray(data['f_treated'], dtype=float),
                                  CdfKind(data.get('kind', 'step'))),
            x_on_boundary=bool(data.get('x_on_boundary', False)),
        )


def make_triple(y0: float, delta0: Any, delta1: Any, grid_points: Any, f_values: Any,
                kind: CdfKind = CdfKind.STEP) -> CoefficientTriple:
    """Create a triple from plain arrays"""
    grid = EvalGrid(np.asarray(grid_points, dtype=float))
    return CoefficientTriple(
        y0=float(y0),
        delta0_at_y0=np.atleast_1d(np.asarray(delta0, dtype=float)),
        delta1=np.asarray(delta1, dtype=float),
        f_treated=CdfEstimate(grid, np.asarray(f_values, dtype=float), kind),
    )


@dataclass(frozen=True)
class PerturbationDirection:
    """δ = (δ₀, δ₁, δ_F) on the grid of the triple it perturbs"""
    delta0: np.ndarray
    delta1: np.ndarray
    delta_f: np.ndarray

    def __post_init__(self):
        d0 = np.array(self.delta0, dtype=float).ravel()
        d1 = np.array(self.delta1, dtype=float)
        if d1.ndim == 1:
            d1 = d1.reshape(1, -1)
        df = np.array(self.delta_f, dtype=float).ravel()
        if d1.shape != (d0.size, df.size):
            raise ValueError(f"delta1 has shape {d1.shape}, expected {(d0.size, df.size)}")
        if not (np.all(np.isfinite(d0)) and np.all(np.isfinite(d1)) and np.all(np.isfinite(df))):
            raise ValueError("perturbation direction must be finite")
        object.__setattr__(self, 'delta0', d0)
        object.__setattr__(self, 'delta1', d1)
        object.__setattr__(self, 'delta_f', df)

    @classmethod
    def zeros_like(cls, triple: CoefficientTriple) -> 'PerturbationDirection':
        return cls(np.zeros_like(triple.delta0_at_y0), np.zeros_like(triple.delta1),
                   np.zeros(triple.grid.size))

    def check_compatible(self, triple: CoefficientTriple) -> None:
        if self.delta1.shape != triple.delta1.shape or self.delta0.size != triple.delta0_at_y0.size:
            raise ValueError("perturbation direction does not match the triple's grid")

    def scaled(self, factor: float) -> 'PerturbationDirection':
        return PerturbationDirection(factor * self.delta0, factor * self.delta1, factor * self.delta_f)
