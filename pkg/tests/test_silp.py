"""
Test suite for the revised simplex engine and the semi-infinite bound programs
"""

import itertools
import math

import numpy as np
import pytest

from qtebounds.core.silp import (
    SilpSolver, active_set, binding_runs, build_lower, build_upper, dump_mps, extract_dual, recession_margin,
    slater_check, solution_sets,
)
from qtebounds.core.simplex import RevisedSimplex, SimplexStatus
from qtebounds.exceptions import AssumptionViolation, InfeasibleProblemError
from qtebounds.inference.envelope import split_inner_outer
from qtebounds.models.estimate_models import CdfKind, make_triple
from qtebounds.models.silp_models import Sense, SilpProblem, SolverStatus


def vertex_oracle(problem: SilpProblem) -> float:
    """Best feasible vertex, enumerating every square subsystem of the constraints"""
    best = math.inf if problem.sense == Sense.UPPER else -math.inf
    for subset in itertools.combinations(range(problem.n_constraints), problem.dim):
        rows = list(subset)
        mat = problem.rows[rows]
        if abs(np.linalg.det(mat)) < 1e-12:
            continue
        gamma = np.linalg.solve(mat, problem.rhs[rows])
        if problem.max_violation(gamma) > 1e-10:
            continue
        value = problem.value_at(gamma)
        best = min(best, value) if problem.sense == Sense.UPPER else max(best, value)
    return best


@pytest.fixture
def convex_triple():
    """F(y) = (y + 1)²/4, Δ₁(y) = y, Δ₀ = 0.3 on 11 points of [−1, 1]"""
    grid = np.linspace(-1.0, 1.0, 11)
    return make_triple(0.0, [0.3], grid.reshape(1, -1), grid, (grid + 1.0) ** 2 / 4.0)


def random_triple(seed: int):
    """L in {2, 3}, at most 12 grid points, −Δ₀ a strictly positive mixture of the Δ₁ columns"""
    rng = np.random.default_rng(seed)
    n_instruments = 2 + seed % 2
    size = int(rng.integers(5, 13))
    delta1 = rng.uniform(-0.5, 0.5, size=(n_instruments - 1, size))
    weights = rng.dirichlet(np.ones(size))
    f = np.sort(rng.uniform(0.0, 1.0, size))
    return make_triple(0.0, -delta1 @ weights, delta1, np.linspace(-1.0, 1.0, size), f), rng


def _shifted_delta0(triple, delta0):
    return make_triple(triple.y0, [delta0], triple.delta1, triple.grid.points, triple.f_treated.values,
                       kind=CdfKind.SMOOTHED)


class TestRevisedSimplex:
    """Standard-form programs with known outcomes"""

    def test_optimal(self):
        result = RevisedSimplex().solve(np.array([-1.0, -2.0, 0.0]), np.array([[1.0, 1.0, 1.0]]), np.array([1.0]))
        assert result.status == SimplexStatus.OPTIMAL
        assert result.objective == pytest.approx(-2.0)
        np.testing.assert_allclose(result.x, [0.0, 1.0, 0.0])
        np.testing.assert_allclose(result.y, [-2.0])

    def test_infeasible_carries_farkas_vector(self):
        e_mat = np.array([[1.0, 1.0]])
        q = np.array([-1.0])
        result = RevisedSimplex().solve(np.zeros(2), e_mat, q)
        assert result.status == SimplexStatus.INFEASIBLE
        assert np.all(result.farkas @ e_mat <= 1e-12)
        assert result.farkas @ q > 0

    def test_unbounded(self):
        result = RevisedSimplex().solve(np.array([-1.0, 0.0]), np.array([[1.0, -1.0]]), np.array([0.0]))
        assert result.status == SimplexStatus.UNBOUNDED
        assert result.ray is not None

    def test_redundant_row_removed(self):
        e_mat = np.array([[1.0, 1.0], [2.0, 2.0]])
        result = RevisedSimplex().solve(np.array([1.0, 2.0]), e_mat, np.array([1.0, 2.0]))
        assert result.status == SimplexStatus.OPTIMAL
        assert result.objective == pytest.approx(1.0)
        assert len(result.redundant_rows) == 1


class TestBoundPrograms:
    """Upper and lower programs against vertex enumeration and closed forms"""

    def test_upper_matches_vertex_oracle(self, convex_triple):
        problem = build_upper(convex_triple, tau=1e6)
        sol = SilpSolver().solve(problem)
        assert sol.status == SolverStatus.OPTIMAL
        assert sol.value == pytest.approx(vertex_oracle(problem), abs=1e-8)
        assert sol.value == pytest.approx(0.35, abs=1e-9)

    def test_lower_matches_vertex_oracle(self, convex_triple):
        problem = build_lower(convex_triple, tau=1e6)
        sol = SilpSolver().solve(problem)
        assert sol.status == SolverStatus.OPTIMAL
        assert sol.value == pytest.approx(vertex_oracle(problem), abs=1e-8)
        assert sol.value == pytest.approx(0.125, abs=1e-9)

    def test_quadratic_upper(self, quadratic_triple):
        sol = SilpSolver().solve(build_upper(quadratic_triple))
        assert sol.status == SolverStatus.OPTIMAL
        assert sol.value == pytest.approx(0.58, abs=1e-9)
        assert 0.39 - 1e-9 <= sol.gamma[1] <= 0.41 + 1e-9
        assert sol.primal_residual <= 1e-9
        assert sol.duality_gap <= 1e-8

        dual = extract_dual(sol)
        assert dual.atoms == [(pytest.approx(-0.2), pytest.approx(1.0))]
        assert dual.indices.tolist() == [80]

    def test_quadratic_lower(self, quadratic_triple):
        sol = SilpSolver().solve(build_lower(quadratic_triple))
        assert sol.status == SolverStatus.OPTIMAL
        assert sol.value == pytest.approx(0.1, abs=1e-9)
        np.testing.assert_allclose(sol.gamma, [0.1, 0.0], atol=1e-9)
        assert sol.diagnostics['mirrored_lower_program'] is True

        dual = extract_dual(sol)
        np.testing.assert_allclose(dual.points, [-1.0, 1.0])
        np.testing.assert_allclose(dual.masses, [0.6, 0.4], atol=1e-9)

    def test_active_set_is_regular(self, quadratic_triple):
        sol = SilpSolver().solve(build_upper(quadratic_triple))
        active = active_set(sol)
        assert active.size == 1
        assert active.points[0] == pytest.approx(-0.2)
        assert active.is_regular

    def test_solution_sets_share_value(self, quadratic_triple):
        sol = SilpSolver().solve(build_upper(quadratic_triple))
        sets = solution_sets(sol)
        assert sets.gammas
        for gamma in sets.gammas:
            assert sol.problem.value_at(gamma) == pytest.approx(0.58, abs=1e-8)
            assert sol.problem.max_violation(gamma) <= 1e-9
            assert 0.39 - 1e-8 <= gamma[1] <= 0.41 + 1e-8
        for measure in sets.lambdas[0]:
            assert measure.total_mass == pytest.approx(1.0)


class TestBallAndRecession:
    """Ball-constrained, unbounded and infeasible programs"""

    def test_unbounded_without_ball(self, quadratic_triple):
        problem = build_upper(_shifted_delta0(quadratic_triple, 2.0), tau=math.inf)
        sol = SilpSolver().solve(problem)
        assert sol.status == SolverStatus.UNBOUNDED
        assert sol.value == -math.inf
        ray = np.asarray(sol.diagnostics['ray'])
        assert problem.objective @ ray < 0
        assert np.all(problem.rows @ ray >= -1e-9)

    def test_ball_binds_on_unbounded_direction(self, quadratic_triple):
        problem = build_upper(_shifted_delta0(quadratic_triple, 2.0), tau=100.0)
        sol = SilpSolver().solve(problem)
        assert sol.status == SolverStatus.BALL_ACTIVE
        assert sol.gamma @ sol.gamma <= 100.0 * (1 + 1e-6)
        assert sol.n_cuts > 0
        with pytest.raises(AssumptionViolation):
            extract_dual(sol)

    def test_small_ball_raises_value(self, quadratic_triple):
        sol = SilpSolver().solve(build_upper(quadratic_triple, tau=0.4))
        assert sol.status == SolverStatus.BALL_ACTIVE
        assert sol.value > 0.58
        assert sol.value <= 0.6 + 1e-9

    def test_ball_excluding_feasible_set(self, quadratic_triple):
        with pytest.raises(InfeasibleProblemError):
            SilpSolver().solve(build_upper(quadratic_triple, tau=0.2))

    def test_recession_margin(self, quadratic_triple):
        assert recession_margin(quadratic_triple) == pytest.approx(4.0 / 15.0, abs=1e-9)
        assert recession_margin(_shifted_delta0(quadratic_triple, 2.0)) == pytest.approx(-1.0, abs=1e-9)

    def test_slater(self, quadratic_triple):
        assert slater_check(quadratic_triple)
        assert slater_check(quadratic_triple, sense=Sense.LOWER)
        bad = make_triple(0.0, [0.1], np.zeros((1, 3)), [0.0, 1.0, 2.0], [0.0, 0.5, 2.5])
        assert not slater_check(bad, margin=1.0)


class TestProgramText:
    """MPS-style export"""

    def test_dump_mps(self, convex_triple):
        text = dump_mps(build_lower(convex_triple))
        lines = text.splitlines()
        assert lines[0] == "NAME          SILP_LOWER"
        assert "OBJSENSE MAX" in lines
        assert sum(1 for line in lines if line.startswith(" L  C")) == 11
        assert "    RHS  C10  1.0" in lines
        assert lines[-1] == "ENDATA"

    def test_inconsistent_shapes_rejected(self):
        with pytest.raises(ValueError):
            SilpProblem(Sense.UPPER, np.ones(2), np.ones((3, 2)), np.ones(2), np.ones(3))


class TestRandomPrograms:
    """Duality, complementary slackness and stationarity on small random programs"""

    @pytest.mark.parametrize('seed', range(40))
    @pytest.mark.parametrize('sense', [Sense.UPPER, Sense.LOWER])
    def test_optimality_conditions(self, seed, sense):
        triple, rng = random_triple(seed)
        problem = build_upper(triple, tau=math.inf) if sense == Sense.UPPER else build_lower(triple, tau=math.inf)
        sol = SilpSolver().solve(problem)
        assert sol.status == SolverStatus.OPTIMAL

        lam = sol.grid_multipliers
        slack = problem.slack(sol.gamma)
        assert sol.value == pytest.approx(vertex_oracle(problem), abs=1e-7)
        assert sol.duality_gap <= 1e-8 * max(1.0, abs(sol.value))
        assert problem.max_violation(sol.gamma) <= 1e-9
        assert np.all(lam >= -1e-12)
        assert lam.sum() == pytest.approx(1.0, abs=1e-9)
        np.testing.assert_allclose(problem.rows.T @ lam, problem.objective, atol=1e-8)
        assert np.max(np.abs(lam * slack)) <= 1e-8
        assert lam @ problem.rhs == pytest.approx(sol.value, abs=1e-8)

        # any feasible γ is no better than the dual value
        g = rng.normal(size=problem.dim - 1)
        shifted = problem.rhs - problem.rows[:, 1:] @ g
        gamma0 = shifted.max() if sense == Sense.UPPER else shifted.min()
        other = problem.value_at(np.concatenate([[gamma0], g]))
        if sense == Sense.UPPER:
            assert other >= lam @ problem.rhs - 1e-10
        else:
            assert other <= lam @ problem.rhs + 1e-10


class TestActivePoints:
    """Runs of adjacent binding grid points"""

    def test_binding_runs(self):
        runs = binding_runs(np.array([3, 4, 9, 11, 12, 13]))
        assert [r.tolist() for r in runs] == [[3, 4], [9], [11, 12, 13]]
        assert binding_runs(np.zeros(0, dtype=int)) == []

    def test_offgrid_tangency_is_one_point(self, offgrid_quadratic_triple):
        sol = SilpSolver().solve(build_upper(offgrid_quadratic_triple))
        assert sol.status == SolverStatus.OPTIMAL
        assert sol.value == pytest.approx(0.578975, abs=1e-9)
        act = active_set(sol)
        assert act.size == 1
        assert [r.tolist() for r in act.runs] == [[79, 80]]
        assert act.points[0] == pytest.approx(-0.205, abs=1e-9)
        assert act.multipliers[0] == pytest.approx(1.0, abs=1e-9)
        np.testing.assert_allclose(act.rows, [[1.0, -0.1025]], atol=1e-9)
        assert act.is_regular

        split = split_inner_outer(offgrid_quadratic_triple, sol, act)
        assert split.outer_idx.tolist() == [1]
        np.testing.assert_allclose(split.a12, [[-0.1025]], atol=1e-9)

    def test_two_offgrid_tangencies_with_three_coefficients(self, quartic_triple_at):
        triple = quartic_triple_at(0.505)
        sol = SilpSolver().solve(build_upper(triple))
        assert sol.status == SolverStatus.OPTIMAL
        act = active_set(sol)
        assert act.size == 2
        assert act.dim == 3
        assert sorted(act.points) == [pytest.approx(-0.505, abs=0.01), pytest.approx(0.505, abs=0.01)]
        assert act.multipliers.sum() == pytest.approx(1.0, abs=1e-9)
        np.testing.assert_allclose(act.multipliers @ act.rows, build_upper(triple).objective, atol=1e-9)
        assert act.is_regular
        for run in act.runs:
            assert np.all(np.diff(run) == 1)

        split = split_inner_outer(triple, sol, act)
        assert split.k == 2
        assert split.outer_idx.size == 1
