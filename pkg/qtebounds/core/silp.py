"""
Semi-Infinite Linear Programs
Builds the upper/lower bound programs on a finite grid, solves them with an ℓ2-ball handled by
cutting planes, and exposes the dual measure, active set and regularity diagnostics
"""

import itertools
import math
from typing import Dict, List, Optional, Tuple

import numpy as np
from loguru import logger

from ..exceptions import AssumptionViolation, InfeasibleProblemError
from ..models.estimate_models import CoefficientTriple
from ..models.silp_models import (
    ActiveSet, DualMeasure, LPSolution, Sense, SilpProblem, SolutionSets, SolverStatus, ToleranceSet,
)
from .simplex import RevisedSimplex, SimplexStatus


def _program(triple: CoefficientTriple, sense: Sense, tau: float) -> SilpProblem:
    grid = triple.grid.points
    rows = np.column_stack([np.ones(grid.size), triple.delta1.T])
    objective = np.concatenate([[1.0], -triple.delta0_at_y0])
    return SilpProblem(
        sense=sense, objective=objective, rows=rows, rhs=triple.f_treated.values,
        grid=grid, tau=tau, y0=triple.y0,
    )


def build_upper(triple: CoefficientTriple, tau: float = 100.0) -> SilpProblem:
    """min γ₀ − γ₁'Δ₀(y₀)  s.t.  F(y_m) ≤ γ₀ + γ₁'Δ₁(y_m) for every grid point"""
    return _program(triple, Sense.UPPER, tau)


def build_lower(triple: CoefficientTriple, tau: float = 100.0) -> SilpProblem:
    """max γ₀ − γ₁'Δ₀(y₀)  s.t.  γ₀ + γ₁'Δ₁(y_m) ≤ F(y_m) for every grid point"""
    return _program(triple, Sense.LOWER, tau)


def _canonical(problem: SilpProblem) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(q, a, b) of  min q'γ  s.t.  a γ ≥ b"""
    if problem.sense == Sense.UPPER:
        return problem.objective, problem.rows, problem.rhs
    return -problem.objective, -problem.rows, -problem.rhs


class SilpSolver:
    """Solves a SilpProblem through its standard-form dual

    The dual variables over grid columns form the measure λ; γ is read off the simplex
    multipliers. A cut γ'g ≤ √τ enters the dual as one extra column.
    """

    def __init__(self, tolerances: Optional[ToleranceSet] = None):
        self.tol = tolerances or ToleranceSet()
        self.engine = RevisedSimplex(self.tol)

    def solve(self, problem: SilpProblem) -> LPSolution:
        q, a, b = _canonical(problem)
        m, dim = a.shape
        radius = math.sqrt(problem.tau) if math.isfinite(problem.tau) else math.inf
        cuts: List[np.ndarray] = []
        iterations = 0

        while True:
            normals = np.vstack(cuts) if cuts else np.zeros((0, dim))
            e_mat = np.hstack([a.T, -normals.T])
            cost = np.concatenate([-b, np.full(len(cuts), radius)])
            result = self.engine.solve(cost, e_mat, q)
            iterations += result.iterations

            if result.status == SimplexStatus.UNBOUNDED:
                raise InfeasibleProblemError(
                    "bound program has no feasible point",
                    {'y0': problem.y0, 'sense': problem.sense.value},
                )
            if result.status == SimplexStatus.MAX_ITER:
                logger.warning(f"Simplex iteration limit reached at y0={problem.y0}")
                return self._failed(problem, SolverStatus.MAX_ITER, iterations, len(cuts))

            if result.status == SimplexStatus.INFEASIBLE:
                # dual infeasible: the program is unbounded along -farkas
                ray = -result.farkas
                if not math.isfinite(radius):
                    sol = self._failed(problem, SolverStatus.UNBOUNDED, iterations, 0)
                    sol.diagnostics['ray'] = (ray / np.linalg.norm(ray)).tolist()
                    return sol
                if len(cuts) >= self.tol.max_cuts:
                    return self._failed(problem, SolverStatus.MAX_ITER, iterations, len(cuts))
                cuts.append(ray / np.linalg.norm(ray))
                continue

            gamma = -result.y
            if math.isfinite(radius) and gamma @ gamma > problem.tau * (1.0 + self.tol.ball_tol):
                if len(cuts) >= self.tol.max_cuts:
                    logger.warning(f"Cut limit reached at y0={problem.y0} with |γ|²={gamma @ gamma:.6g}")
                    return self._failed(problem, SolverStatus.MAX_ITER, iterations, len(cuts))
                cuts.append(gamma / np.linalg.norm(gamma))
                continue
            return self._finish(problem, result, gamma, q, a, b, radius, cuts, iterations)

    def _finish(self, problem: SilpProblem, result, gamma: np.ndarray, q: np.ndarray, a: np.ndarray,
                b: np.ndarray, radius: float, cuts: List[np.ndarray], iterations: int) -> LPSolution:
        m = b.size
        lam = result.x[:m]
        lam_cut = result.x[m:]
        normals = np.vstack(cuts) if cuts else np.zeros((0, gamma.size))

        primal = float(q @ gamma)
        dual = float(b @ lam - (radius * lam_cut.sum() if cuts else 0.0))
        dual_residual = float(np.max(np.abs(a.T @ lam - normals.T @ lam_cut - q)))
        primal_residual = float(max(0.0, np.max(b - a @ gamma)))
        ball_binding = bool(np.any(lam_cut > self.tol.mass_tol))
        status = SolverStatus.BALL_ACTIVE if ball_binding else SolverStatus.OPTIMAL

        basic = np.asarray(result.state.basis) if result.state is not None else np.zeros(0, dtype=int)
        diagnostics: Dict[str, object] = {
            'n_cuts': len(cuts),
            'ball_norm_sq': float(gamma @ gamma),
            'degenerate_basis': bool(np.any(result.x[basic] <= self.tol.feas_tol)) if basic.size else False,
            'redundant_rows': result.redundant_rows,
            'used_bland': result.used_bland,
        }
        if problem.sense == Sense.LOWER:
            diagnostics['mirrored_lower_program'] = True
        if abs(primal - dual) > self.tol.gap_tol * max(1.0, abs(primal)):
            logger.warning(f"Duality gap {abs(primal - dual):.3g} above tolerance at y0={problem.y0}")

        return LPSolution(
            status=status,
            gamma=gamma,
            value=problem.value_at(gamma),
            grid_multipliers=lam,
            cut_multipliers=lam_cut,
            cut_normals=normals,
            duality_gap=abs(primal - dual),
            dual_residual=dual_residual,
            primal_residual=primal_residual,
            iterations=iterations,
            diagnostics=diagnostics,
            problem=problem,
            basis_state=result.state,
        )

    @staticmethod
    def _failed(problem: SilpProblem, status: SolverStatus, iterations: int, n_cuts: int) -> LPSolution:
        value = np.nan
        if status == SolverStatus.UNBOUNDED:
            value = -np.inf if problem.sense == Sense.UPPER else np.inf
        return LPSolution(
            status=status,
            gamma=np.full(problem.dim, np.nan),
            value=value,
            grid_multipliers=np.zeros(problem.n_constraints),
            iterations=iterations,
            diagnostics={'n_cuts': n_cuts},
            problem=problem,
        )


def solve(problem: SilpProblem, tolerances: Optional[ToleranceSet] = None) -> LPSolution:
    return SilpSolver(tolerances).solve(problem)


def extract_dual(solution: LPSolution, tolerances: Optional[ToleranceSet] = None) -> DualMeasure:
    """Atoms of the optimal dual measure (grid points with mass above mass_tol)"""
    tol = tolerances or ToleranceSet()
    if solution.status == SolverStatus.BALL_ACTIVE:
        raise AssumptionViolation(
            "dual measure is not interpretable while the ball constraint binds",
            {'n_cuts': solution.n_cuts},
        )
    if solution.status != SolverStatus.OPTIMAL or solution.problem is None:
        raise AssumptionViolation(f"no optimal dual available (status {solution.status.value})")
    idx = np.flatnonzero(solution.grid_multipliers > tol.mass_tol)
    return DualMeasure(
        points=solution.problem.grid[idx].copy(),
        masses=solution.grid_multipliers[idx].copy(),
        indices=idx,
    )


def binding_runs(indices: np.ndarray) -> List[np.ndarray]:
    """Split sorted grid indices into runs of consecutive indices"""
    indices = np.asarray(indices, dtype=int)
    if indices.size == 0:
        return []
    return np.split(indices, np.flatnonzero(np.diff(indices) > 1) + 1)


def active_set(solution: LPSolution, tolerances: Optional[ToleranceSet] = None) -> ActiveSet:
    """Binding grid points carrying positive dual mass, with the rank condition on [1, Δ₁]

    A run of adjacent binding grid points is one tangency falling between grid points; it is
    reported as a single active point at the mass-weighted location, carrying the run's total
    mass and the mass-weighted constraint row. `indices` holds the heaviest grid index of each run.
    """
    tol = tolerances or ToleranceSet()
    problem = solution.problem
    if problem is None or not solution.status.is_solved:
        raise AssumptionViolation(f"active set needs a solved program (status {solution.status.value})")
    slack = problem.slack(solution.gamma)
    mass = solution.grid_multipliers
    idx = np.flatnonzero((np.abs(slack) <= tol.act_tol) & (mass > tol.mass_tol))
    runs = binding_runs(idx)
    weights = [mass[r] / mass[r].sum() for r in runs]
    dim = problem.dim
    rows = np.vstack([w @ problem.rows[r] for r, w in zip(runs, weights)]) if runs else np.zeros((0, dim))
    k = len(runs)
    if k < idx.size:
        logger.debug(f"Merged {idx.size} binding grid points into {k} active points at y0={problem.y0}")
    rank = int(np.linalg.matrix_rank(rows, tol=tol.rank_tol * max(1.0, np.abs(rows).max()))) if k else 0
    cond = float(np.linalg.cond(rows[:, :k])) if 0 < k <= dim else float('inf')
    return ActiveSet(
        points=np.array([w @ problem.grid[r] for r, w in zip(runs, weights)]),
        multipliers=np.array([mass[r].sum() for r in runs]),
        indices=np.array([r[np.argmax(mass[r])] for r in runs], dtype=int),
        rows=rows,
        rank=rank,
        dim=dim,
        condition_number=cond,
        runs=runs,
        run_weights=weights,
    )


def recession_margin(triple: CoefficientTriple, tolerances: Optional[ToleranceSet] = None) -> float:
    """min (δ₀ − δ₁'Δ₀(y₀)) over recession directions δ of the upper program with |δ|₁ = 1

    The ℓ1 sphere is split into its 2^L facets (one per sign pattern s); on each facet the
    program is a finite LP solved through its dual
        max t  s.t.  G'μ + t·1 ≤ s∘g,  μ ≥ 0.
    Facets containing no recession direction are skipped; +inf means the cone is {0}.
    The lower program has the same margin (δ ↦ −δ maps one cone onto the other).
    """
    tol = tolerances or ToleranceSet()
    engine = RevisedSimplex(tol)
    problem = build_upper(triple)
    g, a = problem.objective, problem.rows
    m, dim = a.shape
    if dim > 16:
        logger.warning(f"Recession margin enumerates 2^{dim} facets")

    margin = math.inf
    for signs in itertools.product((1.0, -1.0), repeat=dim):
        s = np.asarray(signs)
        g_rows = (a * s[None, :]).T
        e_mat = np.hstack([g_rows, np.ones((dim, 1)), -np.ones((dim, 1)), np.eye(dim)])
        cost = np.zeros(m + 2 + dim)
        cost[m], cost[m + 1] = -1.0, 1.0
        result = engine.solve(cost, e_mat, s * g)
        if result.status == SimplexStatus.OPTIMAL:
            margin = min(margin, -result.objective)
        elif result.status == SimplexStatus.MAX_ITER:
            logger.warning(f"Recession facet LP hit the iteration limit for signs {signs}")
    return float(margin)


def slater_check(triple: CoefficientTriple, margin: float = 1.0, sense: Sense = Sense.UPPER) -> bool:
    """Whether γ = (1 + margin, 0, …, 0) (or (−margin, 0, …) for the lower program) is strictly feasible"""
    f = triple.f_treated.values
    if sense == Sense.UPPER:
        return bool(np.all(1.0 + margin > f))
    return bool(np.all(-margin < f))


def solution_sets(solution: LPSolution, value_tol: float = 1e-7, cap: int = 50,
                  tolerances: Optional[ToleranceSet] = None) -> SolutionSets:
    """Γ̂* and Λ̂* from a walk over optimal bases

    The dual optimal set does not depend on the chosen γ, so every γ is paired with the
    full list of dual measures found.
    """
    tol = tolerances or ToleranceSet()
    if solution.status != SolverStatus.OPTIMAL or solution.basis_state is None or solution.problem is None:
        raise AssumptionViolation(f"solution sets need an optimal program with the ball inactive "
                                  f"(status {solution.status.value})")
    engine = RevisedSimplex(tol)
    pairs, truncated = engine.optimal_bases(solution.basis_state, cap=cap, value_tol=value_tol)
    m = solution.problem.n_constraints
    grid = solution.problem.grid

    gammas: List[np.ndarray] = []
    gamma_keys = set()
    measures: List[DualMeasure] = []
    measure_keys = set()
    for x, y in pairs:
        gamma = -y
        g_key = tuple(np.round(gamma, 9))
        if g_key not in gamma_keys:
            gamma_keys.add(g_key)
            gammas.append(gamma)
        lam = x[:m]
        idx = np.flatnonzero(lam > tol.mass_tol)
        l_key = tuple(zip(idx.tolist(), np.round(lam[idx], 9).tolist()))
        if l_key not in measure_keys:
            measure_keys.add(l_key)
            measures.append(DualMeasure(points=grid[idx].copy(), masses=lam[idx].copy(), indices=idx))

    if truncated:
        logger.warning(f"Solution-set enumeration truncated at {cap} vertices")
    return SolutionSets(gammas=gammas, lambdas=[list(measures) for _ in gammas], truncated=truncated)


def dump_mps(problem: SilpProblem) -> str:
    """Fixed MPS-style text of the finite program (the ball appears as a comment)"""
    row_type = 'G' if problem.sense == Sense.UPPER else 'L'
    lines = [
        f"NAME          SILP_{problem.sense.value.upper()}",
        f"* tau {problem.tau!r} constant {problem.constant!r} y0 {problem.y0!r}",
        f"OBJSENSE {'MIN' if problem.sense == Sense.UPPER else 'MAX'}",
        "ROWS",
        " N  OBJ",
    ]
    lines += [f" {row_type}  C{m}" for m in range(problem.n_constraints)]
    lines.append("COLUMNS")
    for j in range(problem.dim):
        lines.append(f"    G{j}  OBJ  {float(problem.objective[j])!r}")
        for m in range(problem.n_constraints):
            if problem.rows[m, j] != 0.0:
                lines.append(f"    G{j}  C{m}  {float(problem.rows[m, j])!r}")
    lines.append("RHS")
    lines += [f"    RHS  C{m}  {float(problem.rhs[m])!r}" for m in range(problem.n_constraints)]
    lines.append("BOUNDS")
    lines += [f" FR BND  G{j}" for j in range(problem.dim)]
    lines.append("ENDATA")
    return "\n".join(lines) + "\n"
