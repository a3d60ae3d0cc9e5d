"""
Revised Simplex Engine
Dense two-phase revised simplex for standard-form programs  min c'x  s.t.  E x = q,  x ≥ 0
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional, Set, Tuple

import numpy as np
from loguru import logger

from ..models.silp_models import ToleranceSet


class SimplexStatus(Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"
    MAX_ITER = "max_iter"


@dataclass
class BasisState:
    """Phase-two data needed to revisit an optimal basis"""
    a: np.ndarray
    b: np.ndarray
    cost: np.ndarray
    basis: List[int]
    active_rows: np.ndarray
    row_sign: np.ndarray
    n_rows: int


@dataclass
class SimplexResult:
    status: SimplexStatus
    x: np.ndarray
    y: np.ndarray
    objective: float
    iterations: int
    state: Optional[BasisState] = None
    farkas: Optional[np.ndarray] = None
    ray: Optional[np.ndarray] = None
    degenerate_pivots: int = 0
    used_bland: bool = False
    redundant_rows: List[int] = field(default_factory=list)


@dataclass
class _Phase:
    status: SimplexStatus
    basis: List[int]
    iterations: int
    ray: Optional[np.ndarray] = None
    degenerate_pivots: int = 0
    used_bland: bool = False


class RevisedSimplex:
    """Two-phase revised simplex with explicit basis inverses

    Pricing is Dantzig's rule with ties broken toward the largest column index; after
    `bland_after` consecutive degenerate pivots the engine switches to Bland's rule for
    the remainder of the phase.
    """

    def __init__(self, tolerances: Optional[ToleranceSet] = None):
        self.tol = tolerances or ToleranceSet()

    # ------------------------------------------------------------------ pivoting rules

    def _entering(self, reduced: np.ndarray, allowed: np.ndarray, bland: bool) -> int:
        candidates = np.flatnonzero(allowed & (reduced < -self.tol.opt_tol))
        if candidates.size == 0:
            return -1
        if bland:
            return int(candidates[0])
        best = reduced[candidates].min()
        ties = candidates[reduced[candidates] <= best + 1e-12 * max(1.0, abs(best))]
        return int(ties[-1])

    def _leaving(self, x_b: np.ndarray, u: np.ndarray, basis: List[int], bland: bool) -> Tuple[int, float]:
        pos = np.flatnonzero(u > self.tol.pivot_tol)
        if pos.size == 0:
            return -1, np.inf
        ratios = np.maximum(x_b[pos], 0.0) / u[pos]
        theta = ratios.min()
        ties = pos[ratios <= theta + 1e-12 * max(1.0, theta)]
        if bland:
            r = min(ties, key=lambda i: basis[i])
        else:
            r = max(ties, key=lambda i: (u[i], -basis[i]))
        return int(r), float(theta)

    # ------------------------------------------------------------------ phases

    def _run_phase(self, a: np.ndarray, b: np.ndarray, cost: np.ndarray,
                   basis: List[int], allowed: np.ndarray, iter_budget: int) -> _Phase:
        bland = False
        stalls = 0
        degenerate = 0
        for it in range(iter_budget):
            b_mat = a[:, basis]
            b_inv = np.linalg.inv(b_mat)
            x_b = b_inv @ b
            y = cost[basis] @ b_inv
            reduced = cost - y @ a
            reduced[basis] = 0.0

            e = self._entering(reduced, allowed, bland)
            if e < 0:
                return _Phase(SimplexStatus.OPTIMAL, basis, it, degenerate_pivots=degenerate, used_bland=bland)

            u = b_inv @ a[:, e]
            r, theta = self._leaving(x_b, u, basis, bland)
            if r < 0:
                ray = np.zeros(a.shape[1])
                ray[e] = 1.0
                ray[basis] = -u
                return _Phase(SimplexStatus.UNBOUNDED, basis, it, ray=ray,
                              degenerate_pivots=degenerate, used_bland=bland)

            if theta <= self.tol.feas_tol:
                stalls += 1
                degenerate += 1
                if not bland and stalls > self.tol.bland_after:
                    logger.debug("Switching to Bland's rule after repeated degenerate pivots")
                    bland = True
            else:
                stalls = 0
            basis = list(basis)
            basis[r] = e
        return _Phase(SimplexStatus.MAX_ITER, basis, iter_budget, degenerate_pivots=degenerate, used_bland=bland)

    def solve(self, cost: np.ndarray, e_mat: np.ndarray, q: np.ndarray) -> SimplexResult:
        """Solve min cost'x s.t. e_mat x = q, x ≥ 0

        y in the result are the simplex multipliers in the original row coordinates
        (rows removed as redundant get multiplier zero). An infeasible result carries a
        Farkas vector u with u'E_j ≤ 0 for every column and u'q > 0.
        """
        cost = np.asarray(cost, dtype=float)
        e_mat = np.asarray(e_mat, dtype=float)
        q = np.asarray(q, dtype=float)
        m, n = e_mat.shape

        sign = np.where(q < 0, -1.0, 1.0)
        a1 = np.hstack([e_mat * sign[:, None], np.eye(m)])
        b1 = q * sign
        cost1 = np.concatenate([np.zeros(n), np.ones(m)])
        basis = list(range(n, n + m))

        phase1 = self._run_phase(a1, b1, cost1, basis, np.ones(n + m, dtype=bool), self.tol.max_iter)
        iterations = phase1.iterations
        if phase1.status == SimplexStatus.MAX_ITER:
            return SimplexResult(SimplexStatus.MAX_ITER, np.zeros(n), np.zeros(m), np.nan, iterations)

        basis = phase1.basis
        b_inv = np.linalg.inv(a1[:, basis])
        x_b = b_inv @ b1
        infeasibility = float(cost1[basis] @ x_b)
        if infeasibility > self.tol.feas_tol * max(1.0, float(np.sum(np.abs(q)))):
            w = cost1[basis] @ b_inv
            return SimplexResult(
                SimplexStatus.INFEASIBLE, np.zeros(n), np.zeros(m), np.nan, iterations,
                farkas=sign * w,
            )

        basis, active = self._drive_out_artificials(a1, basis, n)
        redundant = [int(i) for i in np.flatnonzero(~active)]
        if redundant:
            logger.debug(f"Removed redundant equality rows {redundant}")

        a2 = a1[np.ix_(active, np.arange(n))]
        b2 = b1[active]
        phase2 = self._run_phase(a2, b2, cost, basis, np.ones(n, dtype=bool),
                                 self.tol.max_iter - iterations)
        iterations += phase2.iterations
        state = BasisState(a=a2, b=b2, cost=cost, basis=phase2.basis,
                           active_rows=np.flatnonzero(active), row_sign=sign, n_rows=m)
        x, y = self._point(state, phase2.basis)

        if phase2.status == SimplexStatus.UNBOUNDED:
            return SimplexResult(SimplexStatus.UNBOUNDED, x, y, -np.inf, iterations, state=state,
                                 ray=phase2.ray, redundant_rows=redundant)
        return SimplexResult(
            phase2.status, x, y, float(cost @ x), iterations, state=state,
            degenerate_pivots=phase1.degenerate_pivots + phase2.degenerate_pivots,
            used_bland=phase1.used_bland or phase2.used_bland,
            redundant_rows=redundant,
        )

    def _drive_out_artificials(self, a1: np.ndarray, basis: List[int], n: int) -> Tuple[List[int], np.ndarray]:
        """Pivot zero-level artificials out of the basis, deleting rows where that is impossible"""
        m = a1.shape[0]
        active = np.ones(m, dtype=bool)
        basis = list(basis)
        while True:
            rows = np.flatnonzero(active)
            sub = a1[rows]
            positions = [r for r, var in enumerate(basis) if var >= n]
            if not positions:
                return basis, active
            r = positions[0]
            b_inv = np.linalg.inv(sub[:, basis])
            alpha = b_inv[r] @ sub[:, :n]
            alpha[[v for v in basis if v < n]] = 0.0
            j = int(np.argmax(np.abs(alpha)))
            if abs(alpha[j]) > self.tol.pivot_tol:
                basis[r] = j
                continue
            # row of the stuck artificial is a combination of the others
            redundant_row = basis[r] - n
            active[redundant_row] = False
            basis.pop(r)

    @staticmethod
    def _point(state: BasisState, basis: List[int]) -> Tuple[np.ndarray, np.ndarray]:
        b_inv = np.linalg.inv(state.a[:, basis])
        x = np.zeros(state.a.shape[1])
        x[basis] = np.maximum(b_inv @ state.b, 0.0)
        y_active = state.cost[basis] @ b_inv
        y = np.zeros(state.n_rows)
        y[state.active_rows] = y_active
        return x, state.row_sign * y

    # ------------------------------------------------------------------ alternative optima

    def optimal_bases(self, state: BasisState, cap: int = 50,
                      value_tol: float = 1e-7) -> Tuple[List[Tuple[np.ndarray, np.ndarray]], bool]:
        """Breadth-first walk over optimal bases adjacent through value-preserving pivots

        Zero-reduced-cost entering columns yield alternative x (same multipliers);
        pivots on degenerate basic rows yield alternative multipliers (same x).
        Returns the distinct (x, y) pairs found and whether the cap truncated the walk.
        """
        a, b, cost = state.a, state.b, state.cost
        n = a.shape[1]
        start = list(state.basis)
        visited: Set[frozenset] = {frozenset(start)}
        queue = [start]
        found: List[Tuple[np.ndarray, np.ndarray]] = []
        seen_points: Set[Tuple] = set()
        explored = 0
        max_explored = 20 * cap

        while queue:
            basis = queue.pop(0)
            explored += 1
            x, y = self._point(state, basis)
            key = (tuple(np.round(x, 9)), tuple(np.round(y, 9)))
            if key not in seen_points:
                seen_points.add(key)
                found.append((x, y))
                if len(found) >= cap:
                    return found, True
            if explored >= max_explored:
                return found, True

            b_inv = np.linalg.inv(a[:, basis])
            x_b = b_inv @ b
            mult = cost[basis] @ b_inv
            reduced = cost - mult @ a
            reduced[basis] = 0.0
            alpha = b_inv @ a
            nonbasic = np.setdiff1d(np.arange(n), basis)
            neighbors: List[List[int]] = []

            for j in nonbasic:
                if abs(reduced[j]) > value_tol:
                    continue
                r, _ = self._leaving(x_b, alpha[:, j], basis, bland=True)
                if r >= 0:
                    neighbors.append(basis[:r] + [int(j)] + basis[r + 1:])

            for r in np.flatnonzero(x_b <= self.tol.feas_tol):
                row = alpha[r, nonbasic]
                for direction in (1.0, -1.0):
                    cand = nonbasic[direction * row > self.tol.pivot_tol]
                    if cand.size == 0:
                        continue
                    ratios = reduced[cand] / np.abs(alpha[r, cand])
                    j = int(cand[np.argmin(ratios)])
                    neighbors.append(basis[:r] + [j] + basis[r + 1:])

            for nb in neighbors:
                key_b = frozenset(nb)
                if key_b in visited:
                    continue
                visited.add(key_b)
                try:
                    nb_inv = np.linalg.inv(a[:, nb])
                except np.linalg.LinAlgError:
                    continue
                nb_x = nb_inv @ b
                nb_red = cost - (cost[nb] @ nb_inv) @ a
                if np.min(nb_x) < -self.tol.feas_tol or np.min(np.delete(nb_red, nb)) < -value_tol:
                    continue
                queue.append(nb)
        return found, False
