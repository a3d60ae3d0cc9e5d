"""
Regularity Checking
Rule registry evaluating Slater's condition, the recession margin, the ball constraint, duality
and the active-set conditions of the bound programs at one evaluation point
"""

from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence

import numpy as np
from loguru import logger

from ..config import config
from ..exceptions import AssumptionViolation, QteBoundsError
from ..models.bound_models import BoundsConfig
from ..models.dataset_models import Dataset
from ..models.estimate_models import CoefficientTriple, EvalGrid
from ..models.silp_models import LPSolution, Sense, SolverStatus, ToleranceSet
from ..core.estimators import CoefficientEstimator
from ..core.silp import SilpSolver, active_set, build_lower, build_upper, recession_margin, slater_check, solution_sets
from .dataset_validator import ValidationIssue, ValidationSeverity


@dataclass
class RegularityContext:
    """Everything the rules inspect at one y0"""
    triple: CoefficientTriple
    upper: LPSolution
    lower: LPSolution
    tolerances: ToleranceSet
    margin_min: float
    metrics: Dict[str, Any] = field(default_factory=dict)


@dataclass
class RegularityRule:
    """Defines one regularity rule"""
    rule_id: str
    name: str
    description: str
    severity: ValidationSeverity
    check: Callable[[RegularityContext], List[ValidationIssue]]

    def run(self, context: RegularityContext) -> List[ValidationIssue]:
        """Execute the rule; a crashing rule is reported, not raised"""
        try:
            return self.check(context)
        except QteBoundsError as e:
            logger.error(f"Error executing regularity rule {self.rule_id}: {e}")
            return [ValidationIssue(self.rule_id, ValidationSeverity.ERROR,
                                    f"rule execution failed: {e.message}", e.context)]


@dataclass
class RegularityReport:
    y0: float
    issues: List[ValidationIssue]
    metrics: Dict[str, Any]

    @property
    def passed(self) -> bool:
        return not any(i.severity == ValidationSeverity.ERROR for i in self.issues)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'y0': self.y0,
            'passed': self.passed,
            'metrics': self.metrics,
            'issues': [i.to_dict() for i in self.issues],
        }


class RegularityChecker:
    """Runs the registered rules on the upper and lower programs at a y0"""

    def __init__(self, tolerances: Optional[ToleranceSet] = None, tau: float = config.DEFAULT_TAU,
                 margin_min: float = config.MARGIN_MIN):
        self.tolerances = tolerances or ToleranceSet.from_config()
        self.tau = tau
        self.margin_min = margin_min
        self.rules: List[RegularityRule] = []
        self._register_default_rules()

    def add_rule(self, rule: RegularityRule) -> None:
        self.rules.append(rule)

    def _register_default_rules(self) -> None:
        self.add_rule(RegularityRule(
            "REG001", "Slater point", "γ = (1 + margin, 0, …) is strictly feasible for both programs",
            ValidationSeverity.ERROR, self._check_slater))
        self.add_rule(RegularityRule(
            "REG002", "Recession margin", "Objective bounded away from zero on recession directions",
            ValidationSeverity.WARNING, self._check_recession))
        self.add_rule(RegularityRule(
            "REG003", "Ball inactive", "The ℓ2 regularization does not bind at the optimum",
            ValidationSeverity.WARNING, self._check_ball))
        self.add_rule(RegularityRule(
            "REG004", "Duality", "Primal and dual values agree within gap_tol",
            ValidationSeverity.ERROR, self._check_duality))
        self.add_rule(RegularityRule(
            "REG005", "Active set", "K ≤ L binding points, positive multipliers, full rank",
            ValidationSeverity.WARNING, self._check_active_set))
        self.add_rule(RegularityRule(
            "REG006", "Unique solution", "Singleton primal and dual solution sets",
            ValidationSeverity.INFO, self._check_uniqueness))

    # ------------------------------------------------------------------ rules

    def _check_slater(self, ctx: RegularityContext) -> List[ValidationIssue]:
        upper_ok = slater_check(ctx.triple, 1.0, Sense.UPPER)
        lower_ok = slater_check(ctx.triple, 1.0, Sense.LOWER)
        ctx.metrics['slater'] = upper_ok and lower_ok
        if upper_ok and lower_ok:
            return []
        return [ValidationIssue("REG001", ValidationSeverity.ERROR, "no strictly feasible point",
                                {'upper': upper_ok, 'lower': lower_ok})]

    def _check_recession(self, ctx: RegularityContext) -> List[ValidationIssue]:
        margin = recession_margin(ctx.triple, ctx.tolerances)
        ctx.metrics['recession_margin'] = margin
        if margin >= ctx.margin_min:
            return []
        return [ValidationIssue("REG002", ValidationSeverity.WARNING,
                                f"recession margin {margin:.4g} below {ctx.margin_min}",
                                {'margin': margin})]

    def _check_ball(self, ctx: RegularityContext) -> List[ValidationIssue]:
        issues = []
        for name, sol in (('upper', ctx.upper), ('lower', ctx.lower)):
            ctx.metrics[f'{name}_status'] = sol.status.value
            if sol.status == SolverStatus.BALL_ACTIVE:
                issues.append(ValidationIssue("REG003", ValidationSeverity.WARNING,
                                              f"ball constraint binds in the {name} program",
                                              {'n_cuts': sol.n_cuts}))
            elif not sol.status.is_solved:
                issues.append(ValidationIssue("REG003", ValidationSeverity.ERROR,
                                              f"{name} program not solved ({sol.status.value})"))
        return issues

    def _check_duality(self, ctx: RegularityContext) -> List[ValidationIssue]:
        issues = []
        for name, sol in (('upper', ctx.upper), ('lower', ctx.lower)):
            if not sol.status.is_solved:
                continue
            ctx.metrics[f'{name}_duality_gap'] = sol.duality_gap
            if sol.duality_gap > ctx.tolerances.gap_tol * max(1.0, abs(sol.value)):
                issues.append(ValidationIssue("REG004", ValidationSeverity.ERROR,
                                              f"duality gap {sol.duality_gap:.3g} in the {name} program"))
        return issues

    def _check_active_set(self, ctx: RegularityContext) -> List[ValidationIssue]:
        if ctx.upper.status != SolverStatus.OPTIMAL:
            return []
        act = active_set(ctx.upper, ctx.tolerances)
        ctx.metrics['active_set'] = act.to_dict()
        if act.is_regular:
            return []
        return [ValidationIssue("REG005", ValidationSeverity.WARNING,
                                f"active set with K={act.size}, rank {act.rank} violates the regularity conditions",
                                act.to_dict())]

    def _check_uniqueness(self, ctx: RegularityContext) -> List[ValidationIssue]:
        if ctx.upper.status != SolverStatus.OPTIMAL:
            return []
        sets = solution_sets(ctx.upper, tolerances=ctx.tolerances)
        unique = sets.is_singleton
        ctx.metrics['unique_solution'] = unique
        ctx.metrics['n_primal_solutions'] = len(sets.gammas)
        ctx.metrics['n_dual_solutions'] = len(sets.lambdas[0]) if sets.lambdas else 0
        if unique:
            return []
        return [ValidationIssue("REG006", ValidationSeverity.INFO,
                                "solution set is not a singleton; the standard bootstrap may be invalid",
                                {'n_primal': len(sets.gammas)})]

    # ------------------------------------------------------------------ entry points

    def check_point(self, triple: CoefficientTriple) -> RegularityReport:
        solver = SilpSolver(self.tolerances)
        ctx = RegularityContext(
            triple=triple,
            upper=solver.solve(build_upper(triple, self.tau)),
            lower=solver.solve(build_lower(triple, self.tau)),
            tolerances=self.tolerances,
            margin_min=self.margin_min,
        )
        ctx.metrics['upper_value'] = ctx.upper.value
        ctx.metrics['lower_value'] = ctx.lower.value
        issues: List[ValidationIssue] = []
        for rule in self.rules:
            issues.extend(rule.run(ctx))
        return RegularityReport(y0=triple.y0, issues=issues, metrics=ctx.metrics)

    def check_dataset(self, dataset: Dataset, y0_grid: Sequence[float],
                      x: Optional[Sequence[float]] = None,
                      cfg: Optional[BoundsConfig] = None) -> List[RegularityReport]:
        cfg = cfg or BoundsConfig(tau=self.tau, tolerances=self.tolerances)
        grid = EvalGrid(cfg.grid_points) if cfg.grid_points is not None else None
        estimator = CoefficientEstimator(dataset, bandwidths=cfg.bandwidths, grid=grid, x=x,
                                         smoothed=cfg.smoothed, grid_cap=cfg.grid_cap)
        reports = [self.check_point(estimator.triple(float(v))) for v in np.asarray(y0_grid, dtype=float)]
        failed = sum(not r.passed for r in reports)
        logger.info(f"Regularity check over {len(reports)} points, {failed} with errors")
        return reports


def require_regular_active_set(solution: LPSolution, tolerances: Optional[ToleranceSet] = None) -> None:
    """Raise unless the upper program has an interpretable active set satisfying the rank conditions"""
    act = active_set(solution, tolerances)
    if solution.status != SolverStatus.OPTIMAL or not act.is_regular:
        raise AssumptionViolation("active-set regularity fails", act.to_dict())
