"""
Inference Models
Saddle-point states, the inner/outer reparametrization and confidence interval results
"""

from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

import numpy as np

from .silp_models import DualMeasure


@dataclass
class SaddleState:
    """A primal point in the ball, a dual measure on the grid and their Lagrangian"""
    gamma: np.ndarray
    measure: DualMeasure
    lagrangian_value: float

    def in_ball(self, tau: float) -> bool:
        return float(self.gamma @ self.gamma) <= tau * (1.0 + 1e-12)

    @property
    def is_probability(self) -> bool:
        return bool(np.all(self.measure.masses >= 0)) and abs(self.measure.total_mass - 1.0) <= 1e-9


@dataclass
class SaddleReport:
    """Worst violations of the saddle inequalities over random trial points

    For the upper (minimization) program the inequalities read L(γ*,λ) ≤ L(γ*,λ*) ≤ L(γ,λ*); the
    lower program reverses both. The gap fields record the largest strict margin observed on each side.
    """
    value: float
    left_violation: float
    right_violation: float
    n_trials: int
    max_left_gap: float = 0.0
    max_right_gap: float = 0.0

    @property
    def worst_violation(self) -> float:
        return max(self.left_violation, self.right_violation)

    def holds(self, tol: float = 1e-8) -> bool:
        return self.worst_violation <= tol

    def to_dict(self) -> Dict[str, Any]:
        return dict(self.__dict__, worst_violation=self.worst_violation)


@dataclass
class InnerOuterSplit:
    """Partition of γ into θ₁ (K components pinned by the active points) and θ₂ (the rest)

    a11 has shape (K, K) with column k equal to Ψ₁₁(y*_k); a12 has shape (L-K, K).
    psi0 is the full objective vector Ψ₀ = (−1, Δ₀(y₀)) so that the objective reads −θ'Ψ₀.
    """
    inner_idx: np.ndarray
    outer_idx: np.ndarray
    theta1: np.ndarray
    theta2: np.ndarray
    active_points: np.ndarray
    active_indices: np.ndarray
    multipliers: np.ndarray
    a11: np.ndarray
    a12: np.ndarray
    psi0: np.ndarray
    pivoted: bool = False

    @property
    def k(self) -> int:
        return int(self.inner_idx.size)

    @property
    def dim(self) -> int:
        return int(self.inner_idx.size + self.outer_idx.size)

    @property
    def psi01(self) -> np.ndarray:
        return self.psi0[self.inner_idx]

    @property
    def psi02(self) -> np.ndarray:
        return self.psi0[self.outer_idx]

    def assemble(self, theta1: np.ndarray, theta2: np.ndarray) -> np.ndarray:
        """γ in the original coordinate order"""
        gamma = np.zeros(self.dim)
        gamma[self.inner_idx] = theta1
        gamma[self.outer_idx] = theta2
        return gamma


@dataclass
class EnvelopeGradient:
    """∂Q/∂θ₂ in multiplier form and in KKT form"""
    gradient: np.ndarray
    kkt_form: np.ndarray
    theta2: np.ndarray

    @property
    def discrepancy(self) -> float:
        if self.gradient.size == 0:
            return 0.0
        return float(np.max(np.abs(self.gradient - self.kkt_form)))


@dataclass
class EnvelopeHessian:
    """∂²Q/∂θ₂∂θ₂' assembled from active-point sensitivities"""
    hessian: np.ndarray
    asymmetry: float
    min_eigenvalue: float
    curvatures: np.ndarray

    @property
    def is_psd(self) -> bool:
        return self.min_eigenvalue >= -1e-8

    @property
    def is_full_rank(self) -> bool:
        return self.hessian.size == 0 or self.min_eigenvalue > 1e-10


@dataclass
class SmoothnessInputs:
    """Centered-difference derivative tabulations on the evaluation grid"""
    grid: np.ndarray
    f_prime: np.ndarray
    f_second: np.ndarray
    delta1_prime: np.ndarray
    delta1_second: np.ndarray


@dataclass
class LimitTermsReport:
    """Empirical variances of the two terms in the limit of n^κ(θ̂₁ − θ₁*)"""
    term1_draws: np.ndarray
    term2_draws: np.ndarray
    term1_variance: np.ndarray
    term2_variance: np.ndarray
    total_variance: np.ndarray
    term2_omitted: bool = False
    cross_covariance: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))
    notes: List[str] = field(default_factory=list)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'term1_variance': self.term1_variance.tolist(),
            'term2_variance': self.term2_variance.tolist(),
            'total_variance': self.total_variance.tolist(),
            'cross_covariance': self.cross_covariance.tolist(),
            'term2_omitted': self.term2_omitted,
            'n_draws': int(self.term1_draws.shape[0]),
            'notes': self.notes,
        }


@dataclass
class CiResult:
    """Confidence interval for one bound value"""
    lo: float
    hi: float
    level: float
    method: str
    point: float
    y0: float = float('nan')
    draws: np.ndarray = field(default_factory=lambda: np.zeros(0))
    metadata: Dict[str, Any] = field(default_factory=dict)

    @property
    def contains_point(self) -> bool:
        return self.lo <= self.point <= self.hi

    def to_dict(self) -> Dict[str, Any]:
        return {
            'lo': self.lo,
            'hi': self.hi,
            'level': self.level,
            'method': self.method,
            'y0': self.y0,
            'point': self.point,
            'point_outside': not self.contains_point,
            'n_draws': int(self.draws.size),
            'metadata': self.metadata,
        }


def empty_limit_terms(k: int, note: Optional[str] = None) -> LimitTermsReport:
    """Report for zero draws"""
    zeros = np.zeros(k)
    return LimitTermsReport(
        term1_draws=np.zeros((0, k)),
        term2_draws=np.zeros((0, k)),
        term1_variance=zeros.copy(),
        term2_variance=zeros.copy(),
        total_variance=zeros.copy(),
        notes=[note] if note else [],
    )
