"""
Saddle-Point Machinery
Lagrangian of the bound programs, saddle inequality checks and the directional derivative of the
optimal value along a perturbation of the coefficient triple
"""

from typing import List, Optional, Sequence

import numpy as np
from loguru import logger

from ..config import config
from ..core.silp import extract_dual
from ..exceptions import AssumptionViolation
from ..models.estimate_models import CoefficientTriple, PerturbationDirection
from ..models.inference_models import SaddleReport, SaddleState
from ..models.silp_models import DualMeasure, LPSolution, Sense, ToleranceSet
from ..utils.seeding import task_rng


def constraint_rows(triple: CoefficientTriple) -> np.ndarray:
    """[1, Δ₁(y_m)'] for every grid point, shape (M, L)"""
    return np.column_stack([np.ones(triple.grid.size), triple.delta1.T])


def lagrangian(triple: CoefficientTriple, gamma: np.ndarray, measure: DualMeasure) -> float:
    """γ₀ − γ₁'Δ₀(y₀) + Σ_m λ_m [F(y_m) − γ₀ − γ₁'Δ₁(y_m)] over the atoms of λ

    The same expression is the Lagrangian of the upper and of the lower program.
    """
    gamma = np.asarray(gamma, dtype=float)
    objective = gamma[0] - gamma[1:] @ triple.delta0_at_y0
    idx = np.asarray(measure.indices, dtype=int)
    if idx.size == 0:
        return float(objective)
    residual = triple.f_treated.values[idx] - gamma[0] - triple.delta1[:, idx].T @ gamma[1:]
    return float(objective + measure.masses @ residual)


def saddle_state(triple: CoefficientTriple, solution: LPSolution,
                 tolerances: Optional[ToleranceSet] = None) -> SaddleState:
    """(γ*, λ*) of a solved program and its Lagrangian"""
    measure = extract_dual(solution, tolerances)
    return SaddleState(
        gamma=solution.gamma.copy(),
        measure=measure,
        lagrangian_value=lagrangian(triple, solution.gamma, measure),
    )


def _random_measure(rng: np.random.Generator, grid: np.ndarray, max_atoms: int = 3) -> DualMeasure:
    k = int(rng.integers(1, min(max_atoms, grid.size) + 1))
    idx = np.sort(rng.choice(grid.size, size=k, replace=False))
    return DualMeasure(points=grid[idx], masses=rng.dirichlet(np.ones(k)), indices=idx)


def _feasible_trial(rng: np.random.Generator, triple: CoefficientTriple, gamma_star: np.ndarray,
                    sense: Sense, step: float) -> np.ndarray:
    """γ* moved in a random direction, then shifted along γ₀ back into the feasible set"""
    u = rng.standard_normal(gamma_star.size)
    gamma = gamma_star + rng.uniform(0.0, step) * u / np.linalg.norm(u)
    fitted = constraint_rows(triple) @ gamma
    f = triple.f_treated.values
    if sense == Sense.UPPER:
        gamma[0] += max(0.0, float(np.max(f - fitted)))
    else:
        gamma[0] -= max(0.0, float(np.max(fitted - f)))
    return gamma


def saddle_check(triple: CoefficientTriple, gamma_star: np.ndarray, lambda_star: DualMeasure,
                 n_trials: int = 200, seed: int = 0, sense: Sense = Sense.UPPER,
                 tau: float = config.DEFAULT_TAU, step: float = 0.1) -> SaddleReport:
    """Test both saddle inequalities with random feasible γ in the ball and random dual measures

    Violations are reported as nonnegative amounts; L(·, λ*) is affine in γ with zero slope at a
    dual-feasible λ*, so the γ-side inequality holds with equality up to rounding.
    """
    gamma_star = np.asarray(gamma_star, dtype=float)
    rng = task_rng(seed, n_trials)
    value = lagrangian(triple, gamma_star, lambda_star)
    sign = 1.0 if sense == Sense.UPPER else -1.0

    left_violation = right_violation = 0.0
    left_gap = right_gap = 0.0
    used = 0
    for _ in range(n_trials):
        measure = _random_measure(rng, triple.grid.points)
        # upper: L(γ*, λ) ≤ L(γ*, λ*)
        excess = sign * (lagrangian(triple, gamma_star, measure) - value)
        left_violation = max(left_violation, excess)
        left_gap = max(left_gap, -excess)

        gamma = _feasible_trial(rng, triple, gamma_star, sense, step)
        if gamma @ gamma > tau:
            continue
        used += 1
        # upper: L(γ*, λ*) ≤ L(γ, λ*)
        shortfall = sign * (value - lagrangian(triple, gamma, lambda_star))
        right_violation = max(right_violation, shortfall)
        right_gap = max(right_gap, -shortfall)

    report = SaddleReport(
        value=value,
        left_violation=left_violation,
        right_violation=right_violation,
        n_trials=used,
        max_left_gap=left_gap,
        max_right_gap=right_gap,
    )
    if not report.holds():
        logger.warning(f"Saddle inequalities violated by {report.worst_violation:.3g} at y0={triple.y0}")
    return report


def directional_value(gamma: np.ndarray, measure: DualMeasure, direction: PerturbationDirection) -> float:
    """−γ₁'δ₀ + Σ_m λ_m [δ_F(y_m) − γ₁'δ₁(y_m)]"""
    gamma1 = np.asarray(gamma, dtype=float)[1:]
    idx = np.asarray(measure.indices, dtype=int)
    value = -gamma1 @ direction.delta0
    if idx.size:
        value += measure.masses @ (direction.delta_f[idx] - direction.delta1[:, idx].T @ gamma1)
    return float(value)


def hadamard_derivative(gammas: Sequence[np.ndarray], lambda_sets: Sequence[Sequence[DualMeasure]],
                        direction: PerturbationDirection, sense: Sense = Sense.UPPER) -> float:
    """Directional derivative of the optimal value along δ over the supplied solution sets

    Upper bound: min over γ of max over λ ∈ Λ*(γ). Lower bound: max over γ of min over λ.
    """
    if len(gammas) == 0 or len(lambda_sets) != len(gammas) or any(len(ls) == 0 for ls in lambda_sets):
        raise AssumptionViolation("directional derivative needs nonempty primal and dual solution sets",
                                  {'n_primal': len(gammas)})
    inner: List[float] = []
    for gamma, measures in zip(gammas, lambda_sets):
        values = [directional_value(gamma, m, direction) for m in measures]
        inner.append(max(values) if sense == Sense.UPPER else min(values))
    return float(min(inner) if sense == Sense.UPPER else max(inner))
