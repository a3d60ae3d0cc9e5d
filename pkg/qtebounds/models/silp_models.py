"""
SILP Models
Discretized semi-infinite programs, solver tolerances, solutions and dual measures
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Optional

import numpy as np

from ..config import config


class Sense(Enum):
    """Upper bound minimizes over γ₀ + γ₁'Δ₁ ≥ F; lower bound maximizes over γ₀ + γ₁'Δ₁ ≤ F"""
    UPPER = "upper"
    LOWER = "lower"


class SolverStatus(Enum):
    """Outcome of a SILP solve"""
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"
    BALL_ACTIVE = "ball_active"
    MAX_ITER = "max_iter"

    @property
    def is_solved(self) -> bool:
        return self in (SolverStatus.OPTIMAL, SolverStatus.BALL_ACTIVE)


@dataclass(frozen=True)
class ToleranceSet:
    """Numerical tolerances shared by the solver and the diagnostics"""
    feas_tol: float = 1e-9
    gap_tol: float = 1e-8
    act_tol: float = 1e-7
    mass_tol: float = 1e-9
    ball_tol: float = 1e-8
    pivot_tol: float = 1e-11
    opt_tol: float = 1e-10
    rank_tol: float = 1e-10
    max_iter: int = 10000
    max_cuts: int = 100
    bland_after: int = 50

    @classmethod
    def from_config(cls, **overrides: Any) -> 'ToleranceSet':
        values: Dict[str, Any] = {
            'feas_tol': config.FEAS_TOL,
            'gap_tol': config.GAP_TOL,
            'act_tol': config.ACT_TOL,
            'mass_tol': config.MASS_TOL,
            'ball_tol': config.BALL_TOL,
            'max_iter': config.MAX_SIMPLEX_ITER,
            'max_cuts': config.MAX_CUTS,
        }
        values.update(overrides)
        return cls(**values)

    def to_dict(self) -> Dict[str, Any]:
        return dict(self.__dict__)


@dataclass(frozen=True)
class SilpProblem:
    """Finite program over γ ∈ ℝ^L with an ℓ2 ball of radius √τ

    UPPER: minimize constant + objective'γ  s.t. rows @ γ ≥ rhs
    LOWER: maximize constant + objective'γ  s.t. rows @ γ ≤ rhs
    """
    sense: Sense
    objective: np.ndarray
    rows: np.ndarray
    rhs: np.ndarray
    grid: np.ndarray
    tau: float = 100.0
    constant: float = 0.0
    y0: Optional[float] = None

    def __post_init__(self):
        obj = np.array(self.objective, dtype=float).ravel()
        rows = np.array(self.rows, dtype=float)
        rhs = np.array(self.rhs, dtype=float).ravel()
        grid = np.array(self.grid, dtype=float).ravel()
        if rows.ndim != 2 or rows.shape != (rhs.size, obj.size) or grid.size != rhs.size:
            raise ValueError(
                f"inconsistent program shapes: rows {rows.shape}, rhs {rhs.size}, "
                f"objective {obj.size}, grid {grid.size}"
            )
        if not self.tau > 0:
            raise ValueError("tau must be positive")
        for arr in (obj, rows, rhs, grid):
            arr.setflags(write=False)
        object.__setattr__(self, 'objective', obj)
        object.__setattr__(self, 'rows', rows)
        object.__setattr__(self, 'rhs', rhs)
        object.__setattr__(self, 'grid', grid)

    @property
    def dim(self) -> int:
        return int(self.objective.size)

    @property
    def n_constraints(self) -> int:
        return int(self.rhs.size)

    def value_at(self, gamma: np.ndarray) -> float:
        return float(self.constant + self.objective @ gamma)

    def slack(self, gamma: np.ndarray) -> np.ndarray:
        """Constraint slack, nonnegative exactly when γ is feasible"""
        s = self.rows @ gamma - self.rhs
        return s if self.sense == Sense.UPPER else -s

    def max_violation(self, gamma: np.ndarray) -> float:
        return float(max(0.0, -np.min(self.slack(gamma))))


@dataclass
class DualMeasure:
    """Finitely supported probability measure on grid points"""
    points: np.ndarray
    masses: np.ndarray
    indices: np.ndarray

    @property
    def total_mass(self) -> float:
        return float(np.sum(self.masses))

    @property
    def atoms(self) -> List[tuple]:
        return [(float(y), float(m)) for y, m in zip(self.points, self.masses)]

    def to_dict(self) -> Dict[str, Any]:
        return {
            'points': self.points.tolist(),
            'masses': self.masses.tolist(),
            'indices': [int(i) for i in self.indices],
        }


@dataclass
class LPSolution:
    """Result of solving one SilpProblem"""
    status: SolverStatus
    gamma: np.ndarray
    value: float
    grid_multipliers: np.ndarray
    cut_multipliers: np.ndarray = field(default_factory=lambda: np.zeros(0))
    cut_normals: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))
    duality_gap: float = 0.0
    dual_residual: float = 0.0
    primal_residual: float = 0.0
    iterations: int = 0
    diagnostics: Dict[str, Any] = field(default_factory=dict)
    problem: Optional[SilpProblem] = None
    basis_state: Any = None

    @property
    def ball_active(self) -> bool:
        return self.status == SolverStatus.BALL_ACTIVE

    @property
    def n_cuts(self) -> int:
        return int(self.cut_multipliers.size)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'status': self.status.value,
            'gamma': self.gamma.tolist(),
            'value': self.value,
            'duality_gap': self.duality_gap,
            'dual_residual': self.dual_residual,
            'primal_residual': self.primal_residual,
            'iterations': self.iterations,
            'n_cuts': self.n_cuts,
            'diagnostics': self.diagnostics,
        }


@dataclass
class ActiveSet:
    """Binding grid points with positive multipliers and the active-set regularity checks"""
    points: np.ndarray
    multipliers: np.ndarray
    indices: np.ndarray
    rows: np.ndarray
    rank: int
    dim: int
    condition_number: float = float('inf')
    runs: List[np.ndarray] = field(default_factory=list)
    run_weights: List[np.ndarray] = field(default_factory=list)

    @property
    def size(self) -> int:
        return int(self.points.size)

    @property
    def satisfies_rank_condition(self) -> bool:
        return self.size <= self.dim and self.rank == self.size

    @property
    def multipliers_positive(self) -> bool:
        return bool(np.all(self.multipliers > 0))

    @property
    def is_regular(self) -> bool:
        return self.size > 0 and self.satisfies_rank_condition and self.multipliers_positive

    def combine_rows(self, full_rows: np.ndarray) -> np.ndarray:
        """Mass-weighted rows of `full_rows` (one per grid point) for each active point"""
        if not self.runs:
            return np.asarray(full_rows)[self.indices]
        return np.vstack([w @ np.asarray(full_rows)[r] for r, w in zip(self.runs, self.run_weights)])

    def to_dict(self) -> Dict[str, Any]:
        return {
            'K': self.size,
            'L': self.dim,
            'points': self.points.tolist(),
            'multipliers': self.multipliers.tolist(),
            'grid_indices': [r.tolist() for r in self.runs],
            'rank': self.rank,
            'condition_number': self.condition_number,
            'regular': self.is_regular,
        }


@dataclass
class SolutionSets:
    """Estimated optimal primal set Γ̂* and dual measures Λ̂*(γ) for each γ"""
    gammas: List[np.ndarray]
    lambdas: List[List[DualMeasure]]
    truncated: bool = False

    @property
    def is_singleton(self) -> bool:
        return len(self.gammas) == 1 and all(len(ls) == 1 for ls in self.lambdas)
