"""Tests for dataset loading."""

import numpy as np
import pytest

from gbede.exceptions import DatasetError
from gbede.helpers.datasets import DATASET_NAMES, load_dataset


class TestBundledDatasets:
    """Tests for the embedded and bundled data."""

    def test_telephone_fault(self):
        """Test the 14 telephone-fault differences."""
        data = load_dataset("telephone-fault")

        assert data.values.size == 14
        assert data.values[0] == -988
        assert data.values[-1] == 310
        assert data.model_hint == "normal"
        assert not data.is_regression

    def test_drosophila(self):
        """Test 34 counts with one extreme value."""
        values = load_dataset("drosophila").values

        assert values.size == 34
        assert values.max() == 91
        assert values.sum() == 104

    def test_belgium_calls(self):
        """Test 24 years of phone calls."""
        data = load_dataset("belgium-calls")

        assert data.is_regression
        assert data.regression.n == 24
        assert data.regression.names == ("intercept", "year")
        assert "Belgian" in data.provenance

    def test_salinity(self):
        """Test 28 observations on three predictors."""
        regression = load_dataset("salinity").regression

        assert (regression.n, regression.p) == (28, 4)
        assert regression.names == ("intercept", "X1", "X2", "X3")

    def test_names_listed(self):
        """Test every name loads."""
        for name in DATASET_NAMES:
            assert load_dataset(name).name == name


class TestCsvFiles:
    """Tests for user CSV files."""

    def test_single_column_is_sample(self, tmp_path):
        """Test a one-column file loads as a univariate sample."""
        path = tmp_path / "sample.csv"
        path.write_text("# measured in mm\nx\n1.5\n2.0\n-0.5\n")
        data = load_dataset(str(path))

        np.testing.assert_allclose(data.values, [1.5, 2.0, -0.5])
        assert data.provenance == "measured in mm"

    def test_regression_with_response(self, tmp_path):
        """Test the response column can be chosen."""
        path = tmp_path / "reg.csv"
        path.write_text("y,x\n1,0\n3,1\n5,2\n8,3\n")
        data = load_dataset(str(path), response="y")

        np.testing.assert_allclose(data.regression.y, [1, 3, 5, 8])
        assert data.regression.names == ("intercept", "x")

    def test_default_response_is_last_column(self, tmp_path):
        """Test without a response the last column is used."""
        path = tmp_path / "reg.csv"
        path.write_text("x,y\n0,1\n1,3\n2,5\n3,8\n")

        np.testing.assert_allclose(load_dataset(str(path)).regression.y, [1, 3, 5, 8])

    def test_malformed_row(self, tmp_path):
        """Test non-numeric cells are reported by row and column."""
        path = tmp_path / "bad.csv"
        path.write_text("x\n1.0\nabc\n3.0\n")

        with pytest.raises(DatasetError, match="row 2: column 'x'"):
            load_dataset(str(path))

    def test_missing_response(self, tmp_path):
        """Test an unknown response column."""
        path = tmp_path / "reg.csv"
        path.write_text("x,y\n0,1\n1,3\n2,5\n3,8\n")

        with pytest.raises(DatasetError, match="response column"):
            load_dataset(str(path), response="z")

    def test_unknown_name(self):
        """Test an unknown name lists the bundled datasets."""
        with pytest.raises(DatasetError, match="telephone-fault") as exc_info:
            load_dataset("no-such-dataset")

        assert exc_info.value.operation == "load_dataset"
