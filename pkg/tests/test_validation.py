"""
Test suite for the regularity rule registry
"""

import math

import numpy as np
import pytest

from qtebounds.core.silp import SilpSolver, build_upper
from qtebounds.exceptions import AssumptionViolation, QteBoundsError
from qtebounds.models.estimate_models import CdfKind, make_triple
from qtebounds.verification.dataset_validator import ValidationSeverity
from qtebounds.verification.regularity_checker import (
    RegularityChecker, RegularityRule, require_regular_active_set,
)


class TestRegularityChecker:
    """Rules evaluated at single points and over a sample"""

    def test_well_posed_point(self, quadratic_triple):
        report = RegularityChecker().check_point(quadratic_triple)
        assert report.passed
        assert report.metrics['upper_value'] == pytest.approx(0.58, abs=1e-9)
        assert report.metrics['lower_value'] == pytest.approx(0.1, abs=1e-9)
        assert report.metrics['recession_margin'] == pytest.approx(4.0 / 15.0, abs=1e-9)
        assert report.metrics['active_set']['K'] == 1
        assert {i.rule_id for i in report.issues} <= {"REG006"}

    def test_unbounded_direction_flags_margin_and_ball(self, quadratic_triple):
        triple = make_triple(0.0, [2.0], quadratic_triple.delta1, quadratic_triple.grid.points,
                             quadratic_triple.f_treated.values, kind=CdfKind.SMOOTHED)
        report = RegularityChecker().check_point(triple)
        ids = [i.rule_id for i in report.issues]
        assert "REG002" in ids
        assert "REG003" in ids
        assert report.metrics['upper_status'] == 'ball_active'

    def test_irrelevant_instrument(self, irrelevant_instrument_dataset):
        reports = RegularityChecker().check_dataset(irrelevant_instrument_dataset, [0.0, 1.0])
        assert len(reports) == 2
        for report in reports:
            assert report.passed
            assert report.metrics['slater'] is True
            assert report.metrics['recession_margin'] == pytest.approx(0.0, abs=1e-9)
            assert any(i.rule_id == "REG002" for i in report.issues)

    def test_crashing_rule_is_reported(self, quadratic_triple):
        def explode(ctx):
            raise QteBoundsError("boom", {'where': 'test'})

        checker = RegularityChecker()
        checker.add_rule(RegularityRule("REG999", "Crash", "always fails", ValidationSeverity.WARNING, explode))
        report = checker.check_point(quadratic_triple)
        crashed = [i for i in report.issues if i.rule_id == "REG999"]
        assert len(crashed) == 1
        assert crashed[0].severity == ValidationSeverity.ERROR
        assert not report.passed


class TestActiveSetRequirement:
    """Guard used before envelope computations"""

    def test_regular_solution_passes(self, quadratic_triple):
        require_regular_active_set(SilpSolver().solve(build_upper(quadratic_triple)))

    def test_unsolved_program_rejected(self, quadratic_triple):
        triple = make_triple(0.0, [2.0], quadratic_triple.delta1, quadratic_triple.grid.points,
                             quadratic_triple.f_treated.values)
        sol = SilpSolver().solve(build_upper(triple, tau=math.inf))
        with pytest.raises(AssumptionViolation):
            require_regular_active_set(sol)

    def test_ball_active_rejected(self, quadratic_triple):
        sol = SilpSolver().solve(build_upper(quadratic_triple, tau=0.4))
        assert np.isfinite(sol.value)
        with pytest.raises(AssumptionViolation):
            require_regular_active_set(sol)
