"""
Envelope Derivatives
Splits the upper program's γ into an inner block pinned by the active points and an outer block,
and differentiates the outer value function Q(θ₂) once and twice
"""

import math
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np
import scipy.linalg
from loguru import logger

from ..exceptions import AssumptionViolation, NotSmoothError
from ..core.silp import SilpSolver, active_set
from ..models.estimate_models import CdfKind, CoefficientTriple, PerturbationDirection
from ..models.inference_models import (
    EnvelopeGradient, EnvelopeHessian, InnerOuterSplit, LimitTermsReport, SmoothnessInputs,
    empty_limit_terms,
)
from ..models.silp_models import ActiveSet, LPSolution, Sense, SilpProblem, SolverStatus, ToleranceSet
from .saddle import constraint_rows

# Leading-block condition number above which the split switches to pivoted QR
MAX_LEADING_CONDITION = 1e8


@dataclass
class _ActiveState:
    """Active points, Jacobian blocks and multipliers of the inner program at one θ₂"""
    indices: np.ndarray
    a11: np.ndarray
    a12: np.ndarray
    multipliers: np.ndarray
    gamma: np.ndarray


def _psi0(triple: CoefficientTriple) -> np.ndarray:
    """Ψ₀ = (−1, Δ₀(y₀)); the upper objective is −γ'Ψ₀"""
    return np.concatenate([[-1.0], triple.delta0_at_y0])


def _choose_inner(rows: np.ndarray, rank_tol: float) -> Tuple[np.ndarray, bool]:
    """K columns of the (K, L) active-row matrix forming an invertible block"""
    k, dim = rows.shape
    leading = rows[:, :k]
    if np.linalg.cond(leading) <= MAX_LEADING_CONDITION:
        return np.arange(k), False
    _, r, piv = scipy.linalg.qr(rows, pivoting=True)
    diag = np.abs(np.diag(r))
    if diag.size < k or diag[k - 1] <= rank_tol * max(1.0, diag[0]):
        raise AssumptionViolation("no invertible inner block among the active rows",
                                  {'K': k, 'L': dim})
    return np.sort(piv[:k]), True


def split_inner_outer(triple: CoefficientTriple, solution: LPSolution, act: Optional[ActiveSet] = None,
                      tolerances: Optional[ToleranceSet] = None) -> InnerOuterSplit:
    """Partition γ* of a solved upper program into θ₁ (K components) and θ₂ (L − K components)

    The leading K components are used when their block is well conditioned; otherwise the columns
    come from a column-pivoted QR of the active rows and `pivoted` is set.
    """
    tol = tolerances or ToleranceSet()
    if solution.problem is None or solution.problem.sense != Sense.UPPER:
        raise AssumptionViolation("the inner/outer split is defined on the upper program")
    if solution.status != SolverStatus.OPTIMAL:
        raise AssumptionViolation(f"split needs an optimal solution with the ball inactive "
                                  f"(status {solution.status.value})")
    act = act or active_set(solution, tol)
    if not act.is_regular:
        raise AssumptionViolation("active set is not regular", act.to_dict())

    inner, pivoted = _choose_inner(act.rows, tol.rank_tol)
    outer = np.setdiff1d(np.arange(act.dim), inner)
    if pivoted:
        logger.info(f"Inner block chosen by pivoting: columns {inner.tolist()}")
    gamma = solution.gamma
    return InnerOuterSplit(
        inner_idx=inner,
        outer_idx=outer,
        theta1=gamma[inner].copy(),
        theta2=gamma[outer].copy(),
        active_points=act.points.copy(),
        active_indices=act.indices.copy(),
        multipliers=act.multipliers.copy(),
        a11=act.rows[:, inner].T.copy(),
        a12=act.rows[:, outer].T.copy(),
        psi0=_psi0(triple),
        pivoted=pivoted,
    )


def inner_problem(split: InnerOuterSplit, triple: CoefficientTriple, theta2: np.ndarray,
                  tau: float = math.inf) -> SilpProblem:
    """min −θ₁'Ψ₀₁ − θ₂'Ψ₀₂  s.t.  θ₁'Ψ₁₁(y) ≥ F(y) − θ₂'Ψ₁₂(y) on the grid"""
    theta2 = np.asarray(theta2, dtype=float).ravel()
    if theta2.size != split.outer_idx.size:
        raise ValueError(f"theta2 has {theta2.size} components, expected {split.outer_idx.size}")
    rows = constraint_rows(triple)
    psi0 = _psi0(triple)
    return SilpProblem(
        sense=Sense.UPPER,
        objective=-psi0[split.inner_idx],
        rows=rows[:, split.inner_idx],
        rhs=triple.f_treated.values - rows[:, split.outer_idx] @ theta2,
        grid=triple.grid.points,
        tau=tau,
        constant=float(-theta2 @ psi0[split.outer_idx]),
        y0=triple.y0,
    )


def inner_value(split: InnerOuterSplit, triple: CoefficientTriple, theta2: np.ndarray,
                tolerances: Optional[ToleranceSet] = None, tau: float = math.inf) -> Tuple[float, LPSolution]:
    """Q(θ₂) and the inner solution"""
    solution = SilpSolver(tolerances).solve(inner_problem(split, triple, theta2, tau))
    if not solution.status.is_solved:
        raise AssumptionViolation(f"inner program not solved at theta2={np.asarray(theta2).tolist()}",
                                  {'status': solution.status.value})
    return solution.value, solution


def _state_at(split: InnerOuterSplit, triple: CoefficientTriple, theta2: Optional[np.ndarray],
              tolerances: Optional[ToleranceSet]) -> _ActiveState:
    if theta2 is None or np.allclose(theta2, split.theta2, rtol=0.0, atol=1e-14):
        return _ActiveState(split.active_indices, split.a11, split.a12, split.multipliers,
                            split.assemble(split.theta1, split.theta2))
    theta2 = np.asarray(theta2, dtype=float).ravel()
    _, solution = inner_value(split, triple, theta2, tolerances)
    act = active_set(solution, tolerances)
    if act.size != split.k:
        raise AssumptionViolation(f"inner program has {act.size} active points, split expects {split.k}",
                                  {'theta2': theta2.tolist()})
    rows = act.combine_rows(constraint_rows(triple))
    return _ActiveState(
        indices=act.indices,
        a11=rows[:, split.inner_idx].T,
        a12=rows[:, split.outer_idx].T,
        multipliers=act.multipliers,
        gamma=split.assemble(solution.gamma, theta2),
    )


def _solve_a11(a11: np.ndarray, rhs: np.ndarray, transpose: bool = False) -> np.ndarray:
    try:
        return np.linalg.solve(a11.T if transpose else a11, rhs)
    except np.linalg.LinAlgError as e:
        raise AssumptionViolation("singular inner Jacobian block", {'shape': list(a11.shape)}) from e


def envelope_gradient(split: InnerOuterSplit, triple: CoefficientTriple, theta2: Optional[np.ndarray] = None,
                      tolerances: Optional[ToleranceSet] = None) -> EnvelopeGradient:
    """∂Q/∂θ₂ as −Ψ₀₂ − A₁₂λ (solver multipliers) and as −Ψ₀₂ + A₁₂A₁₁⁻¹Ψ₀₁"""
    t2 = split.theta2 if theta2 is None else np.asarray(theta2, dtype=float).ravel()
    if split.outer_idx.size == 0:
        return EnvelopeGradient(gradient=np.zeros(0), kkt_form=np.zeros(0), theta2=t2)

    state = _state_at(split, triple, theta2, tolerances)
    psi01, psi02 = split.psi01, split.psi02
    gradient = -psi02 - state.a12 @ state.multipliers
    kkt_form = -psi02 + state.a12 @ _solve_a11(state.a11, psi01)
    result = EnvelopeGradient(gradient=gradient, kkt_form=kkt_form, theta2=t2)
    if result.discrepancy > 1e-8:
        logger.warning(f"Envelope gradient forms differ by {result.discrepancy:.3g} at y0={triple.y0}")
    return result


def smoothness_inputs(triple: CoefficientTriple) -> SmoothnessInputs:
    """Centered differences of F̂ and Δ̂₁ along the grid, first and second order"""
    if triple.f_treated.kind != CdfKind.SMOOTHED:
        raise NotSmoothError("derivatives in y need smoothed estimators")
    grid = triple.grid.points
    if grid.size < 3:
        raise NotSmoothError("derivatives in y need at least three grid points")
    f_prime = np.gradient(triple.f_treated.values, grid, edge_order=2)
    d1_prime = np.gradient(triple.delta1, grid, axis=1, edge_order=2)
    return SmoothnessInputs(
        grid=grid,
        f_prime=f_prime,
        f_second=np.gradient(f_prime, grid, edge_order=2),
        delta1_prime=d1_prime,
        delta1_second=np.gradient(d1_prime, grid, axis=1, edge_order=2),
    )


def envelope_hessian(split: InnerOuterSplit, triple: CoefficientTriple,
                     smoothness: Optional[SmoothnessInputs] = None, theta2: Optional[np.ndarray] = None,
                     tolerances: Optional[ToleranceSet] = None) -> EnvelopeHessian:
    """∂²Q/∂θ₂∂θ₂' from the movement of the active points

    Each active point y_k moves with θ₂ at rate −V_k/Ξ_k, where Ξ_k is the curvature of the slack
    θ'Ψ₁(y) − F(y) at y_k and V_k = Ψ₁₂'(y_k) − A₁₂A₁₁⁻¹Ψ₁₁'(y_k).
    """
    s = smoothness or smoothness_inputs(triple)
    n_outer = split.outer_idx.size
    if n_outer == 0:
        return EnvelopeHessian(hessian=np.zeros((0, 0)), asymmetry=0.0, min_eigenvalue=0.0,
                               curvatures=np.zeros(0))

    state = _state_at(split, triple, theta2, tolerances)
    inner, outer = split.inner_idx, split.outer_idx
    w = _solve_a11(state.a11, split.psi01)
    hessian = np.zeros((n_outer, n_outer))
    curvatures = np.zeros(state.indices.size)
    for k, m in enumerate(state.indices):
        psi1_prime = np.concatenate([[0.0], s.delta1_prime[:, m]])
        psi1_second = np.concatenate([[0.0], s.delta1_second[:, m]])
        xi = float(state.gamma @ psi1_second - s.f_second[m])
        curvatures[k] = xi
        if xi <= 0:
            raise AssumptionViolation(f"degenerate tangency at y={s.grid[m]:.6g}",
                                      {'curvature': xi, 'grid_index': int(m)})
        v = psi1_prime[outer] - state.a12 @ _solve_a11(state.a11, psi1_prime[inner])
        # ∂[A₁₂A₁₁⁻¹]/∂y_k Ψ₀₁ reduces to w_k V_k
        hessian += np.outer(w[k] * v, -v / xi)

    asymmetry = float(np.max(np.abs(hessian - hessian.T)))
    hessian = 0.5 * (hessian + hessian.T)
    min_eig = float(np.min(np.linalg.eigvalsh(hessian)))
    result = EnvelopeHessian(hessian=hessian, asymmetry=asymmetry, min_eigenvalue=min_eig,
                             curvatures=curvatures)
    if not result.is_psd:
        logger.warning(f"Envelope Hessian not PSD (min eigenvalue {min_eig:.3g}) at y0={triple.y0}")
    return result


def gradient_shift(split: InnerOuterSplit, direction: PerturbationDirection) -> np.ndarray:
    """First-order change of ∂Q/∂θ₂ at θ₂* when ξ moves along δ with the active points held fixed"""
    inner, outer = split.inner_idx, split.outer_idx
    d_psi0 = np.concatenate([[0.0], direction.delta0])
    d_rows = np.column_stack([np.zeros(split.k), direction.delta1[:, split.active_indices].T])
    w = _solve_a11(split.a11, split.psi01)
    d_a11, d_a12 = d_rows[:, inner].T, d_rows[:, outer].T
    correction = _solve_a11(split.a11, d_psi0[inner] - d_a11 @ w)
    return -d_psi0[outer] + d_a12 @ w + split.a12 @ correction


def theta_limit_terms(split: InnerOuterSplit, triple: CoefficientTriple,
                      draws: Sequence[PerturbationDirection],
                      hessian: Optional[EnvelopeHessian] = None) -> LimitTermsReport:
    """Draws and empirical variances of the two terms in the linear representation of θ̂₁ − θ₁*

    term1 = (A₁₁')⁻¹ [δ_F(y_k) − γ'(0, δ₁(y_k))], term2 = (A₁₁')⁻¹A₁₂' H⁻¹ Δ(∂Q/∂θ₂), with each
    draw δ already scaled by n^κ.
    """
    k = split.k
    if len(draws) == 0:
        return empty_limit_terms(k, "no resampled draws")

    gamma = split.assemble(split.theta1, split.theta2)
    idx = split.active_indices
    term1 = np.vstack([
        _solve_a11(split.a11, d.delta_f[idx] - d.delta1[:, idx].T @ gamma[1:], transpose=True)
        for d in draws
    ])

    notes = []
    term2 = np.zeros_like(term1)
    omitted = split.outer_idx.size == 0
    if omitted:
        notes.append("outer block empty, second term absent")
    else:
        if hessian is None:
            try:
                hessian = envelope_hessian(split, triple)
            except (NotSmoothError, AssumptionViolation) as e:
                logger.warning(f"Second limit term omitted: {e.message}")
                notes.append(f"second term omitted: {e.message}")
                omitted = True
        if hessian is not None and not omitted:
            if not hessian.is_full_rank:
                notes.append(f"singular Hessian (min eigenvalue {hessian.min_eigenvalue:.3g}), second term omitted")
                omitted = True
            else:
                for b, d in enumerate(draws):
                    step = np.linalg.solve(hessian.hessian, gradient_shift(split, d))
                    term2[b] = _solve_a11(split.a11, split.a12.T @ step, transpose=True)

    ddof = 1 if len(draws) > 1 else 0
    total = term1 + term2
    cross = np.zeros((k, k))
    if len(draws) > 1:
        cross = (term1 - term1.mean(axis=0)).T @ (term2 - term2.mean(axis=0)) / (len(draws) - 1)
    return LimitTermsReport(
        term1_draws=term1,
        term2_draws=term2,
        term1_variance=np.var(term1, axis=0, ddof=ddof),
        term2_variance=np.var(term2, axis=0, ddof=ddof),
        total_variance=np.var(total, axis=0, ddof=ddof),
        term2_omitted=omitted,
        cross_covariance=cross,
        notes=notes,
    )
