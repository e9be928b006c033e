"""Tests for GBEDE in the normal linear model."""

import numpy as np
import pytest

from gbede.divergence import MLE_PAIR, TuningPair
from gbede.exceptions import DomainError
from gbede.helpers.datasets import load_dataset
from gbede.regression import (
    RegressionData,
    RegressionParams,
    fit_gbede_regression,
    regression_estimating_fn,
    regression_pivot,
    regression_score,
    regression_starts,
    select_regression_tuning,
)
from gbede.tuning import TuningGrid


@pytest.fixture
def belgium():
    return load_dataset("belgium-calls").regression


@pytest.fixture
def salinity():
    return load_dataset("salinity").regression


@pytest.fixture
def clean_line():
    rng = np.random.default_rng(11)
    x = np.linspace(0.0, 10.0, 60)
    return RegressionData.from_columns(x, 1.0 + 2.0 * x + rng.normal(0.0, 0.5, x.size))


class TestRegressionData:
    """Tests for design validation."""

    def test_intercept_prepended(self):
        """Test from_columns adds the ones column."""
        data = RegressionData.from_columns([1.0, 2.0, 3.0, 4.0], [2.0, 3.0, 5.0, 4.0], ["x"])

        np.testing.assert_allclose(data.X[:, 0], 1.0)
        assert data.names == ("intercept", "x")
        assert (data.n, data.p) == (4, 2)

    def test_requires_intercept(self):
        """Test a design without the leading ones column is rejected."""
        with pytest.raises(DomainError, match="intercept"):
            RegressionData(np.array([[2.0, 1.0], [2.0, 3.0], [2.0, 4.0]]), [1.0, 2.0, 3.0])

    def test_rank_deficient(self):
        """Test collinear predictors are rejected."""
        x = np.arange(5.0)
        with pytest.raises(DomainError, match="full column rank"):
            RegressionData.from_columns(np.column_stack([x, 2 * x]), x + 1.0)

    def test_too_few_rows(self):
        """Test n must exceed p."""
        with pytest.raises(DomainError):
            RegressionData.from_columns([1.0, 2.0], [1.0, 2.0])

    def test_nonpositive_variance(self):
        """Test σ² <= 0 is rejected."""
        with pytest.raises(DomainError):
            RegressionParams((1.0, 2.0), 0.0)


class TestEstimatingEquation:
    """Tests for the stacked (γ, σ²) equation."""

    def test_mle_pair_is_mean_score(self, clean_line):
        """Test the (0, 0) equation is the mean regression score."""
        params = RegressionParams((0.8, 2.1), 0.3)
        expected = np.mean(
            [regression_score(y, x, params) for x, y in zip(clean_line.X, clean_line.y)],
            axis=0,
        )

        np.testing.assert_allclose(
            regression_estimating_fn(clean_line, params.as_array(), MLE_PAIR),
            expected,
            atol=1e-10,
        )

    def test_starts_cover_ols(self, clean_line):
        """Test the first start is the OLS fit with σ² = RSS/n."""
        start = regression_starts(clean_line)[0]
        gamma, *_ = np.linalg.lstsq(clean_line.X, clean_line.y, rcond=None)
        rss = np.sum((clean_line.y - clean_line.X @ gamma) ** 2)

        np.testing.assert_allclose(start, [*gamma, rss / clean_line.n])


class TestFit:
    """Tests for fitting and inference."""

    def test_mle_pair_is_ols(self, belgium):
        """Test GBEDE(0, 0) gives least squares with σ² = RSS/n."""
        fit = fit_gbede_regression(belgium, MLE_PAIR)
        gamma, *_ = np.linalg.lstsq(belgium.X, belgium.y, rcond=None)
        rss = np.sum((belgium.y - belgium.X @ gamma) ** 2)

        np.testing.assert_allclose(fit.params.gamma, gamma, atol=1e-6)
        assert fit.params.sigma2 == pytest.approx(rss / belgium.n, rel=1e-6)
        assert fit.converged

    def test_clean_data_recovers_line(self, clean_line):
        """Test a robust pair agrees with the truth on clean data."""
        fit = fit_gbede_regression(clean_line, TuningPair(-1.0, 0.3))

        np.testing.assert_allclose(fit.params.gamma, [1.0, 2.0], atol=0.3)
        assert fit.params.sigma == pytest.approx(0.5, abs=0.15)

    def test_sandwich_is_covariance(self, salinity):
        """Test the covariance is symmetric positive semidefinite."""
        fit = fit_gbede_regression(salinity, TuningPair(-1.0, 0.5))

        np.testing.assert_allclose(fit.cov, fit.cov.T, atol=1e-12)
        assert np.linalg.eigvalsh(fit.cov).min() >= -1e-12
        assert fit.std_errors.shape == (salinity.p + 1,)

    def test_pivot_vanishes_at_estimate(self, salinity):
        """Test the pivot is zero when θ₀ = θ̂."""
        fit = fit_gbede_regression(salinity, TuningPair(-1.0, 0.5))

        np.testing.assert_allclose(regression_pivot(salinity, fit, fit.params), 0.0)

    def test_to_dict_labels(self, belgium):
        """Test coefficients are labelled by the design names."""
        data = fit_gbede_regression(belgium, MLE_PAIR).to_dict(belgium.names)

        assert set(data["coefficients"]) == {"intercept", "year"}
        assert len(data["std_residuals"]) == 24


@pytest.mark.integration
class TestPublishedRegressions:
    """Fits of the Belgian phone-call and salinity data."""

    def test_belgium_least_squares(self, belgium):
        """Test the (0, 0) fit of the phone-call data."""
        fit = fit_gbede_regression(belgium, MLE_PAIR)

        assert fit.params.gamma[0] == pytest.approx(-26.01, abs=0.05)
        assert fit.params.gamma[1] == pytest.approx(0.51, abs=0.01)
        assert fit.params.sigma2 == pytest.approx(31.61, abs=0.5)

    def test_belgium_robust(self, belgium):
        """Test (−1, 0.5) follows the bulk of the years."""
        fit = fit_gbede_regression(belgium, TuningPair(-1.0, 0.5))

        assert fit.params.gamma[0] == pytest.approx(-5.08, abs=0.05)
        assert fit.params.gamma[1] == pytest.approx(0.11, abs=0.01)

    def test_salinity_robust(self, salinity):
        """Test (−1, 0.5) coefficients and the flagged observation."""
        fit = fit_gbede_regression(salinity, TuningPair(-1.0, 0.5))

        np.testing.assert_allclose(fit.params.gamma, [18.23, 0.72, -0.20, -0.62], atol=0.05)
        assert fit.params.sigma2 == pytest.approx(0.83, abs=0.05)
        assert abs(fit.std_residuals[15]) > 6

    def test_salinity_least_squares_hides_outlier(self, salinity):
        """Test no OLS standardized residual reaches 3."""
        fit = fit_gbede_regression(salinity, MLE_PAIR)

        assert np.max(np.abs(fit.std_residuals)) < 3

    @pytest.mark.slow
    def test_tuning_selects_robust_pair(self, belgium):
        """Test the selected pair on a coarse grid downweights the bad years."""
        grid = TuningGrid.from_values([-2.0, -1.0, 0.0], [0.0, 0.5, 1.0])
        pair, surface = select_regression_tuning(belgium, grid)

        assert len(surface) == 9
        assert pair.beta > 0
        assert fit_gbede_regression(belgium, pair).params.gamma[1] < 0.3
