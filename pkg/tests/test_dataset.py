"""
Test suite for dataset loading, writing and validation
"""

import numpy as np
import pytest

from qtebounds.core.data_loader import cell_counts, dump_csv, load_csv
from qtebounds.exceptions import DatasetValidationError
from qtebounds.models.dataset_models import Dataset, InstrumentSupport, Observation
from qtebounds.verification.dataset_validator import ValidationSeverity, validate_dataset


class TestInstrumentSupport:
    """Support ordering and reference resolution"""

    def test_reference_defaults_to_largest_value(self):
        support = InstrumentSupport((0.0, 0.5, 1.0))
        assert support.reference_index == 2
        assert support.reference_value == 1.0
        assert support.non_reference_indices == [0, 1]

    def test_unsorted_support_rejected(self):
        with pytest.raises(DatasetValidationError):
            InstrumentSupport((1.0, 0.0))

    def test_single_value_rejected(self):
        with pytest.raises(DatasetValidationError):
            InstrumentSupport((0.0,))


class TestDataset:
    """Construction checks and resampling"""

    def test_non_binary_treatment_names_row(self):
        with pytest.raises(DatasetValidationError) as exc:
            Dataset(y=[0.0, 1.0, 2.0], d=[0, 1, 3], z_index=[0, 1, 1], support=InstrumentSupport((0.0, 1.0)))
        assert exc.value.context['row'] == 2

    def test_subset_keeps_support(self, tiny_dataset):
        sub = tiny_dataset.subset([0, 0, 5])
        assert sub.n == 3
        assert sub.support == tiny_dataset.support
        np.testing.assert_array_equal(sub.y, tiny_dataset.y[[0, 0, 5]])

    def test_from_observations(self):
        obs = [Observation(0.5, 1, 0.0), Observation(1.5, 0, 1.0), Observation(2.5, 1, 1.0)]
        ds = Dataset.from_observations(obs)
        assert ds.support.values == (0.0, 1.0)
        np.testing.assert_array_equal(ds.z_index, [0, 1, 1])
        assert ds.observations[1] == obs[1]

    def test_cell_counts(self, tiny_dataset):
        counts = cell_counts(tiny_dataset)
        np.testing.assert_array_equal(counts.counts, [[2, 2], [2, 2]])
        assert counts.cells_below(3) == [(0, 0), (0, 1), (1, 0), (1, 1)]


class TestCsvIO:
    """Reading and writing samples"""

    def test_load(self, tiny_csv, tiny_dataset):
        ds = load_csv(tiny_csv)
        np.testing.assert_array_equal(ds.y, tiny_dataset.y)
        np.testing.assert_array_equal(ds.d, tiny_dataset.d)
        np.testing.assert_array_equal(ds.z_index, tiny_dataset.z_index)
        assert ds.support.reference_value == 1.0

    def test_column_map_and_reference(self, tmp_path):
        path = tmp_path / 'renamed.csv'
        path.write_text("out,treat,inst,age\n1.0,1,0,30\n2.0,0,1,40\n3.0,1,1,50\n0.5,0,0,35\n")
        ds = load_csv(path, {'y': 'out', 'd': 'treat', 'z': 'inst', 'x': ['age']}, reference=0.0)
        assert ds.x_dim == 1
        assert ds.covariate_names == ('age',)
        assert ds.support.reference_index == 0

    def test_corrupted_value_names_row(self, tmp_path):
        path = tmp_path / 'bad.csv'
        path.write_text("y,d,z\n1.0,1,0\n2.0,0,1\nabc,1,1\n")
        with pytest.raises(DatasetValidationError) as exc:
            load_csv(path)
        assert exc.value.context == {'row': 2, 'column': 'y'}

    def test_missing_column(self, tmp_path):
        path = tmp_path / 'short.csv'
        path.write_text("y,d\n1.0,1\n")
        with pytest.raises(DatasetValidationError, match="missing column 'z'"):
            load_csv(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            load_csv(tmp_path / 'absent.csv')

    def test_dump_then_load_reproduces_dataset(self, tmp_path, sim_params):
        from qtebounds.simulation.dgp import dgp_sample

        ds = dgp_sample(sim_params)
        path = dump_csv(ds, tmp_path / 'dump.csv', header=['{"schema_version": "1"}'])
        assert path.read_text().startswith('# {"schema_version": "1"}\n')
        again = load_csv(path)
        np.testing.assert_array_equal(again.y, ds.y)
        np.testing.assert_array_equal(again.d, ds.d)
        np.testing.assert_array_equal(again.z_index, ds.z_index)
        assert again.support == ds.support

    def test_full_precision_floats_survive_dump(self, tmp_path):
        rng = np.random.default_rng(21)
        n = 2000
        ds = Dataset(
            y=rng.normal(size=n) * np.exp(rng.normal(size=n)), d=rng.integers(0, 2, size=n),
            z_index=np.arange(n) % 3, support=InstrumentSupport((0.1, 1.0 / 3.0, 0.7)),
            x=rng.normal(size=(n, 2)) / 7.0, covariate_names=('a', 'b'),
        )
        again = load_csv(dump_csv(ds, tmp_path / 'precise.csv'), column_map={'x': ['a', 'b']})
        np.testing.assert_array_equal(again.y, ds.y)
        np.testing.assert_array_equal(again.x, ds.x)
        assert again.support.values == ds.support.values


class TestValidateDataset:
    """Issue-list validation of cells and instruments"""

    def test_clean_sample(self, tiny_dataset):
        report = validate_dataset(tiny_dataset, min_cell=2)
        assert report.is_valid
        assert report.summary['reference_value'] == 1.0
        assert any(i.rule_id == "INS002" for i in report.issues)

    def test_undersized_cells(self, tiny_dataset):
        report = validate_dataset(tiny_dataset, min_cell=3)
        assert not report.is_valid
        assert {i.rule_id for i in report.errors} == {"CELL002"}
        with pytest.raises(DatasetValidationError):
            report.raise_for_errors()

    def test_empty_cell(self, tiny_dataset):
        ds = tiny_dataset.subset([0, 1, 2, 3, 4, 5])
        report = validate_dataset(ds, min_cell=1)
        assert [i.rule_id for i in report.errors] == ["CELL001"]
        assert report.errors[0].context['d'] == 0
        assert report.errors[0].severity == ValidationSeverity.ERROR

    def test_flat_instrument_warning(self, irrelevant_instrument_dataset):
        report = validate_dataset(irrelevant_instrument_dataset)
        assert any(i.rule_id == "INS001" for i in report.issues)
