"""
Test suite for the simulated design, the quadrature oracle and the replication studies
"""

import math

import numpy as np
import pytest
from scipy.special import ndtr

from qtebounds.models.bound_models import BoundsConfig
from qtebounds.models.sim_models import SampleSizeSummary, SimParams, SimResult, TightenReport
from qtebounds.simulation.dgp import dgp_latent, dgp_sample
from qtebounds.simulation.oracle import truth_cdf, truth_cdf_treated, truth_qte, truth_quantile
from qtebounds.simulation.study import (
    PROFILES, oracle_trusted_interval, reference_curve, replicate, study_bounds_config, tighten_report,
)
from qtebounds.utils.seeding import derive_seed, task_rng

SMALL_CFG = BoundsConfig(grid_cap=40)


class TestDesign:
    """Latent-index sampling"""

    def test_identical_params_give_identical_draws(self, sim_params):
        a, b = dgp_latent(sim_params), dgp_latent(sim_params)
        np.testing.assert_array_equal(a.y, b.y)
        np.testing.assert_array_equal(a.d, b.d)
        other = dgp_latent(sim_params.with_overrides(seed=12))
        assert not np.array_equal(a.y, other.y)

    def test_outcome_equation(self, sim_params):
        draws = dgp_latent(sim_params)
        treated = draws.d == 1
        np.testing.assert_allclose(draws.y[treated], 2.0 * draws.u1[treated])
        np.testing.assert_allclose(draws.y[~treated], 1.0 + draws.u0[~treated])

    def test_instrument_support(self):
        ds = dgp_sample(SimParams(n=300, n_instruments=3, seed=2))
        assert ds.support.values == (0.0, 0.5, 1.0)
        assert set(np.unique(ds.z_index)) <= {0, 1, 2}

    def test_invalid_params(self):
        with pytest.raises(ValueError):
            SimParams(rho=1.0)
        with pytest.raises(ValueError):
            SimParams(n_instruments=1)

    @pytest.mark.parametrize('field', ['sigma_xi1', 'sigma_nu'])
    def test_zero_noise_scale_rejected(self, field):
        with pytest.raises(ValueError, match="noise scales"):
            SimParams(**{field: 0.0})
        with pytest.raises(ValueError):
            SimParams(**{field: -1.0})


class TestSeeding:
    """Derived seeds depend only on their keys"""

    def test_derive_seed_is_stable(self):
        assert derive_seed(1, 2, 3) == derive_seed(1, 2, 3)
        assert derive_seed(1, 2, 3) != derive_seed(1, 2, 4)

    def test_task_rng_streams(self):
        np.testing.assert_array_equal(task_rng(7, 1).random(3), task_rng(7, 1).random(3))


class TestOracle:
    """Quadrature truth against closed forms and simulation"""

    def test_independent_selection_closed_form(self):
        params = SimParams(rho=0.0)
        for y0 in (-1.0, 0.5, 2.5):
            assert truth_cdf(y0, params) == pytest.approx(float(ndtr((y0 - 1.0) / math.sqrt(3.0))), abs=1e-8)
        assert truth_cdf_treated(0.8, params) == pytest.approx(float(ndtr(0.4 / math.sqrt(2.0))), abs=1e-8)

    def test_limits(self, sim_params):
        assert truth_cdf(-30.0, sim_params) == pytest.approx(0.0, abs=1e-8)
        assert truth_cdf(30.0, sim_params) == pytest.approx(1.0, abs=1e-8)

    def test_quartiles(self):
        params = SimParams()
        assert oracle_trusted_interval(params) == (pytest.approx(-0.520, abs=0.05), pytest.approx(1.688, abs=0.05))

    @pytest.mark.slow
    def test_matches_large_simulation(self):
        params = SimParams(n=200_000, seed=4)
        draws = dgp_latent(params)
        treated = draws.d == 1
        for y0 in (-1.0, 0.5, 2.0):
            empirical = float(np.mean(1.0 + draws.u0[treated] <= y0))
            assert truth_cdf(y0, params) == pytest.approx(empirical, abs=0.01)

    def test_qte_is_quantile_difference(self):
        params = SimParams(rho=0.0)
        q1 = truth_quantile(0.5, params, arm=1)
        q0 = truth_quantile(0.5, params, arm=0)
        assert q1 == pytest.approx(0.0, abs=1e-8)
        assert q0 == pytest.approx(1.0, abs=1e-8)
        assert truth_qte(0.5, params) == pytest.approx(-1.0, abs=1e-8)

    def test_quantile_level_checked(self, sim_params):
        with pytest.raises(ValueError):
            truth_quantile(0.0, sim_params)


class TestStudies:
    """Replications and support-size tightening"""

    def test_replicate(self, sim_params):
        grid = np.linspace(-2.0, 2.0, 5)
        result = replicate(sim_params, 2, [200], grid, cfg=SMALL_CFG)
        block = result.by_n[0]
        assert block.n == 200
        assert block.lower_curves.shape == (2, 5)
        assert block.failed == []
        assert np.all(block.lower_curves <= block.upper_curves)
        frame = result.summary_frame()
        assert len(frame) == 5
        assert {'lower_mean', 'lower_lo', 'lower_hi', 'upper_lo', 'upper_hi', 'coverage'} <= set(frame.columns)
        np.testing.assert_allclose(frame['upper_ci_width'], frame['upper_hi'] - frame['upper_lo'])
        assert (frame['lower_lo'] <= frame['lower_hi']).all()

    def test_replicate_with_reference(self, sim_params):
        grid = np.linspace(-2.0, 2.0, 5)
        ref = reference_curve(sim_params, 1000, grid, SMALL_CFG)
        result = replicate(sim_params, 2, [200], grid, cfg=SMALL_CFG, reference=ref)
        np.testing.assert_array_equal(result.reference_lower, ref.lower)
        frame = result.summary_frame()
        assert {'reference_covered', 'reference_lower_covered', 'reference_upper_covered', 'trusted'} <= set(frame.columns)
        np.testing.assert_array_equal(frame['trusted'], ref.trusted_mask)

    def test_replications_are_reproducible(self, sim_params):
        grid = np.linspace(-1.0, 1.0, 3)
        first = replicate(sim_params, 2, [200], grid, cfg=SMALL_CFG)
        second = replicate(sim_params, 2, [200], grid, cfg=SMALL_CFG)
        np.testing.assert_array_equal(first.by_n[0].upper_curves, second.by_n[0].upper_curves)

    def test_needs_two_replications(self, sim_params):
        with pytest.raises(ValueError):
            replicate(sim_params, 1, [200], [0.0])

    def test_tighten_report(self, sim_params):
        report = tighten_report(sim_params, [2, 3], 2000, np.linspace(-2.0, 2.0, 5), cfg=SMALL_CFG)
        assert report.table['L'].tolist() == [2, 3]
        assert set(report.curves) == {2, 3}
        assert isinstance(report.weakly_decreasing, bool)
        assert math.isnan(report.table['max_pointwise_increase'].iloc[0])
        assert report.weakly_decreasing == bool(np.all(np.diff(report.table['trusted_mean_width']) <= report.slack))

    def test_tighten_needs_increasing_support(self, sim_params):
        with pytest.raises(ValueError):
            tighten_report(sim_params, [3, 2], 2000, [0.0])

    def test_oracle_trusted_interval_config(self):
        params = SimParams()
        cfg = study_bounds_config(params, SMALL_CFG, trusted_from_oracle=True)
        assert cfg.trusted_interval == oracle_trusted_interval(params)
        assert cfg.grid_cap == 40
        assert study_bounds_config(params, SMALL_CFG).trusted_interval is None

    def test_profiles(self):
        assert PROFILES['study']['l_list'] == [2, 3, 4, 5]
        assert PROFILES['smoke']['n_reps'] >= 2


def _spread_result(spreads, reference_lower=0.3, reference_upper=0.7, trusted=(True, True, False)):
    """Curves 0.3 ± s and 0.7 ± s on 21 evenly spaced offsets, one block per (n, s)"""
    offsets = np.linspace(-1.0, 1.0, 21)[:, None] * np.ones(3)
    blocks = [SampleSizeSummary(n=n, lower_curves=0.3 + s * offsets, upper_curves=0.7 + s * offsets)
              for n, s in spreads]
    return SimResult(
        params=SimParams(), y0_grid=np.array([-1.0, 0.0, 1.0]), truth=np.full(3, 0.5), level=0.95,
        by_n=blocks, reference_lower=np.full(3, reference_lower), reference_upper=np.full(3, reference_upper),
        trusted_mask=np.array(trusted),
    )


class TestReplicationSummaries:
    """Pointwise intervals, reference containment and dispersion across N"""

    def test_two_sided_intervals(self):
        frame = _spread_result([(100, 0.2)]).summary_frame()
        np.testing.assert_allclose(frame['lower_lo'], 0.3 - 0.19)
        np.testing.assert_allclose(frame['lower_hi'], 0.3 + 0.19)
        np.testing.assert_allclose(frame['upper_lo'], 0.7 - 0.19)
        np.testing.assert_allclose(frame['upper_hi'], 0.7 + 0.19)
        np.testing.assert_allclose(frame['lower_ci_width'], 0.38)
        assert frame['coverage'].tolist() == [1.0, 1.0, 1.0]

    def test_reference_containment_per_bound(self):
        frame = _spread_result([(100, 0.2)], reference_lower=0.5).summary_frame()
        assert not frame['reference_lower_covered'].any()
        assert frame['reference_upper_covered'].all()
        assert frame['reference_covered'].all()

        frame = _spread_result([(100, 0.2)], reference_upper=0.95).summary_frame()
        assert not frame['reference_upper_covered'].any()
        assert not frame['reference_covered'].any()

    def test_reference_below_lower_interval_is_not_covered(self):
        frame = _spread_result([(100, 0.2)], reference_lower=0.05).summary_frame()
        assert not frame['reference_lower_covered'].any()
        assert not frame['reference_covered'].any()

    def test_dispersion_shrinks_with_n(self):
        result = _spread_result([(100, 0.2), (400, 0.1), (1600, 0.05)])
        report = result.dispersion_report()
        assert report['n'].tolist() == [100, 400, 1600]
        assert report['n_points'].tolist() == [2, 2, 2]
        np.testing.assert_allclose(report['upper_ci_width'], [0.38, 0.19, 0.095])
        assert report['lower_width_shrinks'].tolist() == [False, True, True]
        assert result.dispersion_shrinks()
        assert result.reference_coverage_ok(0.9)

    def test_dispersion_not_shrinking(self):
        result = _spread_result([(100, 0.1), (400, 0.1)])
        assert not result.dispersion_shrinks()

    def test_dispersion_uses_trusted_points_only(self):
        result = _spread_result([(100, 0.2)], trusted=(False, False, False))
        assert result.dispersion_report().empty
        assert result.reference_coverage_ok() is False

    def test_tighten_report_records_dispersion(self):
        import pandas as pd

        report = TightenReport(table=pd.DataFrame({'L': [2, 3], 'trusted_mean_width': [0.4, 0.3]}),
                               curves={}, weakly_decreasing=True)
        report.add_replications(3, _spread_result([(100, 0.2), (400, 0.1)]))
        assert report.table['dispersion_shrinks'].tolist() == [None, True]
        assert report.dispersion[3]['n'].tolist() == [100, 400]


TRUSTED = (-0.520, 1.688)
STUDY_GRID = np.linspace(-6.0, 6.0, 49)


@pytest.mark.slow
class TestLargeSampleStudy:
    """Large-n checks against the quadrature oracle"""

    @pytest.mark.parametrize('n_instruments', [2, 3, 4, 5])
    def test_bounds_bracket_truth(self, n_instruments):
        params = SimParams(n=100_000, n_instruments=n_instruments, seed=derive_seed(5, n_instruments))
        curve = reference_curve(params, params.n, STUDY_GRID, BoundsConfig(trusted_interval=TRUSTED))
        truth = np.array([truth_cdf(y, params) for y in STUDY_GRID])
        mask = curve.trusted_mask & np.isfinite(curve.lower) & np.isfinite(curve.upper)
        inside = (curve.lower[mask] - 0.02 <= truth[mask]) & (truth[mask] <= curve.upper[mask] + 0.02)
        assert mask.sum() > 0
        assert inside.mean() >= 0.95

    def test_width_weakly_decreasing_in_support_size(self):
        report = tighten_report(SimParams(seed=6), [2, 3, 4, 5], 100_000, STUDY_GRID,
                                cfg=BoundsConfig(trusted_interval=TRUSTED))
        widths = report.table['trusted_mean_width'].to_numpy()
        assert np.all(np.diff(widths) <= report.slack)
        assert report.weakly_decreasing

    def test_replication_bands_cover_reference_and_shrink(self):
        params = SimParams(seed=8)
        result = replicate(params, 20, [1000, 4000], STUDY_GRID, n_large=100_000, trusted_from_oracle=True)
        assert result.reference_coverage_ok(0.9)
        assert result.dispersion_shrinks()
