"""Tests for the fitting front-end."""

import numpy as np
import pytest
from scipy import stats

from gbede.divergence import MLE_PAIR, TuningPair, estimating_fn
from gbede.estimators import (
    Method,
    SelectionRule,
    StartStrategy,
    fit_gbede,
    fit_l2_pilot,
    fit_mbede,
    fit_mdpde,
    fit_mle,
)
from gbede.exceptions import DomainError


# rows α = 4, 2, 0, -2, -4, -6, -8; columns β = 0, 0.2, ..., 1
DROSOPHILA_TABLE = {
    4.0: [2.17, 0.38, 0.38, 0.38, 0.38, 0.38],
    2.0: [2.73, 0.38, 0.38, 0.38, 0.38, 0.38],
    0.0: [3.06, 0.39, 0.38, 0.37, 0.37, 0.37],
    -2.0: [3.30, 0.41, 0.40, 0.38, 0.37, 0.36],
    -4.0: [3.48, 0.43, 0.42, 0.41, 0.39, 0.37],
    -6.0: [3.64, 0.44, 0.44, 0.44, 0.42, 0.40],
    -8.0: [3.77, 0.45, 0.46, 0.46, 0.46, 0.44],
}


class TestMaximumLikelihood:
    """Tests for fit_mle and the (0, 0) member of the family."""

    def test_poisson_closed_form(self, poisson, drosophila):
        """Test λ̂ = 104/34 for the Drosophila counts."""
        result = fit_mle(drosophila, poisson)

        assert result.theta_hat["lambda"] == pytest.approx(104 / 34, rel=1e-9)
        assert result.method is Method.MLE
        assert result.converged

    def test_gbede_zero_zero_is_mle(self, normal, normal_sample):
        """Test GBEDE(0, 0) reproduces the closed-form MLE."""
        result = fit_gbede(normal_sample, normal, MLE_PAIR)

        np.testing.assert_allclose(
            result.theta_hat.as_array(),
            [np.mean(normal_sample), np.std(normal_sample)],
            atol=1e-6,
        )

    def test_standard_errors(self, normal, normal_sample):
        """Test sandwich standard errors of the MLE are near σ/√n and σ/√(2n)."""
        result = fit_mle(normal_sample, normal)
        sigma = result.theta_hat["sigma"]
        n = normal_sample.size

        assert result.std_errors[0] == pytest.approx(sigma / np.sqrt(n), rel=0.2)
        assert result.std_errors[1] == pytest.approx(sigma / np.sqrt(2 * n), rel=0.5)


class TestGbedeFit:
    """Tests for solving the GBEDE(α, β) equation."""

    def test_residual_below_tolerance(self, normal, normal_sample):
        """Test the reported root solves the equation."""
        pair = TuningPair(-1.0, 0.5)
        result = fit_gbede(normal_sample, normal, pair)

        residual = estimating_fn(normal_sample, result.theta_hat, pair, normal)
        assert np.max(np.abs(residual)) <= 1e-10
        assert result.converged
        assert result.n == normal_sample.size

    def test_shift_equivariance(self, normal, normal_sample):
        """Test shifting the data shifts μ̂ and leaves σ̂ unchanged."""
        pair = TuningPair(-2.0, 0.3)
        base = fit_gbede(normal_sample, normal, pair, StartStrategy.BASIC)
        shifted = fit_gbede(normal_sample + 5.0, normal, pair, StartStrategy.BASIC)

        assert shifted.theta_hat["mu"] - base.theta_hat["mu"] == pytest.approx(5.0, abs=1e-6)
        assert shifted.theta_hat["sigma"] == pytest.approx(base.theta_hat["sigma"], abs=1e-6)

    def test_downweights_outlier(self, normal, telephone):
        """Test a robust pair ignores the -988 observation."""
        robust = fit_gbede(telephone, normal, TuningPair(-0.8, 0.2))
        mle = fit_mle(telephone, normal)

        assert robust.theta_hat["mu"] > 100
        assert mle.theta_hat["mu"] < 50

    def test_to_dict(self, poisson, drosophila):
        """Test the JSON summary."""
        data = fit_gbede(drosophila, poisson, TuningPair(-2.0, 0.4)).to_dict()

        assert data["method"] == "GBEDE"
        assert data["pair"] == {"alpha": -2.0, "beta": 0.4}
        assert set(data) >= {"estimate", "std_errors", "roots", "empirical_divergences"}

    def test_selection_reports_all_roots(self, location):
        """Test a bimodal sample gives several roots and picks the main mode."""
        grid = (np.arange(1, 91) - 0.5) / 90
        sample = np.concatenate([stats.norm.ppf(grid), 10.0 + stats.norm.ppf(grid[::9])])
        result = fit_gbede(sample, location, TuningPair(-1.0, 0.2))

        assert len(result.all_roots) >= 2
        assert result.selected_by is SelectionRule.MIN_EMPIRICAL_DIVERGENCE
        assert abs(result.theta_hat["mu"]) < 0.5
        assert result.divergences[
            [r["mu"] for r in result.all_roots].index(result.theta_hat["mu"])
        ] == pytest.approx(min(result.divergences), abs=1e-9)

    def test_l2_pilot(self, normal, telephone):
        """Test the minimum L2 fit is robust."""
        result = fit_l2_pilot(telephone, normal)

        assert result.method is Method.L2_PILOT
        assert result.pair == TuningPair(0.0, 1.0)
        assert result.theta_hat["mu"] > 100


    def test_tied_roots_go_to_pilot(self, location, monkeypatch):
        """Test roots with equal divergence resolve to the one nearest the L2 pilot."""
        grid = (np.arange(1, 91) - 0.5) / 90
        sample = np.concatenate([stats.norm.ppf(grid), 10.0 + stats.norm.ppf(grid[::9])])
        monkeypatch.setattr("gbede.estimators.empirical_divergence", lambda *args: 0.0)
        pair = TuningPair(-1.0, 0.2)

        near_cluster = fit_gbede(sample, location, pair, pilot=[9.5], with_sandwich=False)
        near_bulk = fit_gbede(sample, location, pair, with_sandwich=False)

        assert len(near_cluster.all_roots) >= 2
        assert near_cluster.theta_hat["mu"] == pytest.approx(10.0, abs=1.0)
        assert abs(near_bulk.theta_hat["mu"]) < 0.5

    def test_population_consistency(self, normal, quantile_sample):
        """Test fits of a large quantile sample recover the generating parameters."""
        sample = 5.0 + 2.0 * quantile_sample
        for pair in (TuningPair(-1.0, 0.5), TuningPair(0.0, 0.3), TuningPair(1.0, 0.2)):
            result = fit_gbede(sample, normal, pair, with_sandwich=False)

            np.testing.assert_allclose(result.theta_hat.as_array(), [5.0, 2.0], atol=0.01)


class TestMdpde:
    """Tests for the minimum density power divergence front-end."""

    def test_same_root_as_zero_alpha(self, normal, normal_sample):
        """Test fit_mdpde is the GBEDE(0, β) fit under its own label."""
        result = fit_mdpde(normal_sample, normal, 0.5)
        gbede = fit_gbede(normal_sample, normal, TuningPair(0.0, 0.5))

        assert result.method is Method.MDPDE
        assert result.pair == TuningPair(0.0, 0.5)
        assert result.to_dict()["method"] == "MDPDE"
        np.testing.assert_allclose(
            result.theta_hat.as_array(), gbede.theta_hat.as_array(), atol=1e-12
        )

    @pytest.mark.parametrize("beta", [0.1, 0.5, 1.0])
    def test_solves_density_power_equation(self, normal, normal_sample, dpd_equation, beta):
        """Test the root zeroes the closed-form density power equation."""
        theta = fit_mdpde(normal_sample, normal, beta).theta_hat.as_array()

        np.testing.assert_allclose(dpd_equation(normal_sample, theta, beta), 0.0, atol=1e-9)

    def test_negative_beta(self, normal, normal_sample):
        """Test β < 0 is rejected."""
        with pytest.raises(DomainError):
            fit_mdpde(normal_sample, normal, -0.1)


class TestMbede:
    """Tests for MBEDE by objective minimization."""

    def test_alpha_zero_rejected(self, normal, normal_sample):
        """Test MBEDE needs α ≠ 0."""
        with pytest.raises(DomainError):
            fit_mbede(normal_sample, normal, 0.0)

    def test_minimizer_solves_equation(self, normal, normal_sample):
        """Test the minimizer is a root of the GBEDE(α, 1) equation."""
        result = fit_mbede(normal_sample, normal, -1.0)
        root = fit_gbede(normal_sample, normal, TuningPair(-1.0, 1.0))

        assert result.method is Method.MBEDE
        assert result.selected_by is SelectionRule.MIN_OBJECTIVE
        np.testing.assert_allclose(
            result.theta_hat.as_array(), root.theta_hat.as_array(), atol=1e-4
        )



    @pytest.mark.slow
    @pytest.mark.parametrize("seed", range(20))
    def test_agrees_with_gbede_across_seeds(self, normal, seed):
        """Test the MBEDE minimizer and the GBEDE(α, 1) root coincide on seeded samples."""
        sample = np.random.default_rng(seed).normal(1.0, 2.0, 40)
        result = fit_mbede(sample, normal, -1.0, with_sandwich=False)
        root = fit_gbede(sample, normal, TuningPair(-1.0, 1.0), with_sandwich=False)

        np.testing.assert_allclose(
            result.theta_hat.as_array(), root.theta_hat.as_array(), atol=1e-4
        )


@pytest.mark.integration
class TestPublishedFits:
    """Fits of the telephone-fault and Drosophila data."""

    @pytest.mark.parametrize(
        ("alpha", "beta", "expected"), [(-2.0, 0.4, 0.40), (-0.7, 0.1, 0.40)]
    )
    def test_drosophila_gbede(self, poisson, drosophila, alpha, beta, expected):
        """Test the robust λ̂ ignores the count of 91."""
        result = fit_gbede(drosophila, poisson, TuningPair(alpha, beta))

        assert result.theta_hat["lambda"] == pytest.approx(expected, abs=0.01)

    def test_drosophila_mbede(self, poisson, drosophila):
        """Test MBEDE(−2)."""
        result = fit_mbede(drosophila, poisson, -2.0)

        assert result.theta_hat["lambda"] == pytest.approx(0.36, abs=0.01)

    def test_telephone_mle(self, normal, telephone):
        """Test the (0, 0) fit is the mean and population deviation of the 14 values."""
        result = fit_gbede(telephone, normal, MLE_PAIR)

        assert telephone.sum() == pytest.approx(545.0)
        assert result.theta_hat["mu"] == pytest.approx(545 / 14, abs=1e-6)
        assert result.theta_hat["sigma"] == pytest.approx(np.std(telephone), abs=1e-6)

    @pytest.mark.parametrize(
        ("beta", "mu", "sigma"), [(0.2, 123.30, 132.86), (1.0, 142.21, 139.48)]
    )
    def test_telephone_density_power(self, normal, telephone, beta, mu, sigma):
        """Test the α = 0 fits of the bundled telephone-fault values."""
        result = fit_mdpde(telephone, normal, beta)

        assert result.theta_hat["mu"] == pytest.approx(mu, abs=0.05)
        assert result.theta_hat["sigma"] == pytest.approx(sigma, abs=0.05)

    @pytest.mark.parametrize("beta", [0.2, 0.6, 1.0])
    def test_telephone_solves_density_power_equation(
        self, normal, telephone, dpd_equation, beta
    ):
        """Test the fitted root zeroes the closed-form density power equation."""
        theta = fit_mdpde(telephone, normal, beta).theta_hat.as_array()

        np.testing.assert_allclose(dpd_equation(telephone, theta, beta), 0.0, atol=1e-9)

    @pytest.mark.parametrize("alpha", [4.0, -8.0])
    @pytest.mark.parametrize("beta", [0.2, 0.6, 1.0])
    def test_telephone_alpha_rows(self, normal, telephone, alpha, beta):
        """Test α barely moves the fit when the density never exceeds 0.003."""
        base = fit_mdpde(telephone, normal, beta)
        result = fit_gbede(telephone, normal, TuningPair(alpha, beta))

        np.testing.assert_allclose(
            result.theta_hat.as_array(), base.theta_hat.as_array(), atol=0.5
        )
        assert result.theta_hat["mu"] > 100

    @pytest.mark.parametrize("alpha", sorted(DROSOPHILA_TABLE))
    def test_drosophila_table(self, poisson, drosophila, alpha):
        """Test λ̂ across β for one α, to the two printed decimals."""
        values = [
            fit_gbede(drosophila, poisson, TuningPair(alpha, beta), with_sandwich=False)
            .theta_hat["lambda"]
            for beta in (0.0, 0.2, 0.4, 0.6, 0.8, 1.0)
        ]

        np.testing.assert_allclose(values, DROSOPHILA_TABLE[alpha], atol=0.015)
