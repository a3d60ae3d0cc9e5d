"""
Test suite for bound curves, monotone post-processing and quantile inversion
"""

import numpy as np
import pytest

from qtebounds.core.bounds import (
    bound_curve, curve_widths, default_y0_grid, fallback_outside, monotonize, qte_bounds, quantile_invert,
)
from qtebounds.core.estimators import default_grid
from qtebounds.exceptions import DatasetValidationError, EmptySolutionBankError
from qtebounds.models.bound_models import BoundCurve, BoundsConfig, SolutionBank
from qtebounds.models.estimate_models import make_triple
from qtebounds.models.silp_models import Sense
from qtebounds.simulation.dgp import dgp_sample
from qtebounds.utils.parallel import ordered_map


def manual_curve(y0, lower, upper):
    y0 = np.asarray(y0, dtype=float)
    return BoundCurve(
        y0_grid=y0, upper_raw=np.asarray(upper, dtype=float), lower_raw=np.asarray(lower, dtype=float),
        upper=np.asarray(upper, dtype=float), lower=np.asarray(lower, dtype=float),
        trusted_mask=np.ones(y0.size, dtype=bool), margins=np.ones(y0.size),
        upper_status=['optimal'] * y0.size, lower_status=['optimal'] * y0.size,
    )


class TestMonotonize:
    """Clipping, running extrema and crossing caps"""

    def test_running_extrema_and_missing_values(self):
        upper, lower, crossings = monotonize(np.array([0.5, 0.3, np.nan, 1.2]), np.array([0.2, -0.1, 0.6, np.nan]))
        np.testing.assert_allclose(upper, [0.3, 0.3, 1.0, 1.0])
        np.testing.assert_allclose(lower, [0.2, 0.2, 0.6, 0.6])
        assert crossings == 0

    def test_crossing_is_capped(self):
        upper, lower, crossings = monotonize(np.array([0.4, 0.5]), np.array([0.1, 0.6]))
        assert crossings == 1
        np.testing.assert_allclose(lower, [0.1, 0.5])
        assert np.all(lower <= upper)


class TestFallback:
    """Banked solutions evaluated at untrusted points"""

    def test_extremes_over_bank(self):
        bank = SolutionBank(Sense.UPPER)
        bank.add(0.0, np.array([1.0, 0.0]))
        bank.add(0.5, np.array([0.5, 0.5]))
        triple = make_triple(0.0, [0.2], np.zeros((1, 2)), [0.0, 1.0], [0.0, 1.0])
        assert fallback_outside(bank, triple) == (pytest.approx(1.0), pytest.approx(0.4))

    def test_empty_bank(self):
        triple = make_triple(0.0, [0.2], np.zeros((1, 2)), [0.0, 1.0], [0.0, 1.0])
        with pytest.raises(EmptySolutionBankError):
            fallback_outside(SolutionBank(Sense.LOWER), triple)


class TestQuantileInversion:
    """First crossings of the level by each curve"""

    def test_invert(self):
        curve = manual_curve([0.0, 1.0, 2.0], [0.0, 0.3, 0.7], [0.2, 0.6, 1.0])
        assert quantile_invert(curve, 0.5) == (1.0, 2.0)

    def test_level_never_reached(self):
        curve = manual_curve([0.0, 1.0], [0.0, 0.3], [0.2, 0.6])
        assert quantile_invert(curve, 0.5) == (1.0, float('inf'))

    def test_level_out_of_range(self):
        with pytest.raises(ValueError):
            quantile_invert(manual_curve([0.0], [0.0], [1.0]), 1.0)

    def test_qte_from_supplied_curve(self, tiny_dataset):
        curve = manual_curve([0.0, 1.0, 2.0], [0.0, 0.3, 0.7], [0.2, 0.6, 1.0])
        result = qte_bounds(tiny_dataset, 0.5, curve=curve)
        assert result.q1 == pytest.approx(0.3)
        assert result.qte_lb == pytest.approx(-1.7)
        assert result.qte_ub == pytest.approx(-0.7)


class TestBoundCurve:
    """End-to-end curves on constructed and simulated samples"""

    def test_irrelevant_instrument_gives_vacuous_bounds(self, irrelevant_instrument_dataset):
        curve = bound_curve(irrelevant_instrument_dataset, y0_grid=[0.0, 0.5, 1.0], cfg=BoundsConfig(min_cell_size=1))
        np.testing.assert_allclose(curve.upper_raw, 1.0, atol=1e-9)
        np.testing.assert_allclose(curve.lower_raw, 0.0, atol=1e-9)
        np.testing.assert_allclose(curve.margins, 0.0, atol=1e-9)
        assert not curve.trusted_mask.any()
        assert curve.n_failed == 0
        assert curve.diagnostics['fallback_used'] is False

    def test_simulated_curve_is_ordered_and_monotone(self, sim_params):
        ds = dgp_sample(sim_params)
        y0 = np.linspace(-1.5, 1.5, 7)
        curve = bound_curve(ds, y0_grid=y0, cfg=BoundsConfig(grid_cap=60))
        assert np.all(curve.lower <= curve.upper)
        assert np.all((curve.lower >= 0) & (curve.upper <= 1))
        assert np.all(np.diff(curve.upper) >= 0)
        assert np.all(np.diff(curve.lower) >= 0)
        assert len(curve.to_records()) == 7
        widths = curve_widths(curve)
        assert widths['max_width'] <= 1.0

    def test_ball_active_solutions_feed_the_fallback(self, ball_binding_dataset):
        y0 = [-0.5, 0.5, 1.25, 1.5, 1.75, 2.5, 3.5]
        curve = bound_curve(ball_binding_dataset, y0_grid=y0,
                            cfg=BoundsConfig(trusted_interval=(1.0, 2.0), grid_cap=30))
        trusted = curve.trusted_mask
        assert trusted.tolist() == [False, False, True, True, True, False, False]
        assert {curve.upper_status[i] for i in np.flatnonzero(trusted)} == {'ball_active'}
        assert curve.diagnostics['bank_sizes']['upper'] == 3
        assert curve.diagnostics['bank_sizes']['lower'] == 3
        assert curve.diagnostics['fallback_used'] is True
        assert all(curve.upper_status[i] == 'fallback' for i in np.flatnonzero(~trusted))
        assert np.all(curve.lower <= curve.upper)

    def test_refining_a_step_grid_leaves_bounds_unchanged(self, sim_params):
        ds = dgp_sample(sim_params)
        coarse = default_grid(ds, cap=10_000).points
        fine = np.union1d(coarse, 0.5 * (coarse[1:] + coarse[:-1]))
        y0 = np.linspace(-1.0, 1.5, 6)
        first = bound_curve(ds, y0_grid=y0, cfg=BoundsConfig(grid_points=coarse))
        second = bound_curve(ds, y0_grid=y0, cfg=BoundsConfig(grid_points=fine))
        assert second.diagnostics['grid_size'] == 2 * coarse.size - 1
        np.testing.assert_allclose(second.margins, first.margins, atol=1e-9)
        np.testing.assert_allclose(second.upper_raw, first.upper_raw, atol=1e-7)
        np.testing.assert_allclose(second.lower_raw, first.lower_raw, atol=1e-7)

    def test_y0_grid_must_increase(self, tiny_dataset):
        with pytest.raises(ValueError):
            bound_curve(tiny_dataset, y0_grid=[1.0, 0.0], cfg=BoundsConfig(min_cell_size=1))

    def test_small_cells_rejected(self, tiny_dataset):
        with pytest.raises(DatasetValidationError):
            bound_curve(tiny_dataset, y0_grid=[0.0], cfg=BoundsConfig(min_cell_size=5))

    def test_default_y0_grid_spans_sample(self, tiny_dataset):
        grid = default_y0_grid(tiny_dataset, size=5)
        assert grid[0] == pytest.approx(-0.8)
        assert grid[-1] == pytest.approx(2.3)


class TestOrderedMap:
    """Worker pool preserves order"""

    def test_in_process_and_pooled_agree(self):
        items = [-3, 1, -2, 4]
        assert ordered_map(abs, items, 1) == ordered_map(abs, items, 2) == [3, 1, 2, 4]
