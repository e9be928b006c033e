"""Pytest configuration and fixtures for gbede tests."""

import numpy as np
import pytest
from scipy import stats

from gbede import config
from gbede.helpers.datasets import load_dataset
from gbede.models import normal_location_model, normal_model, poisson_model


@pytest.fixture(autouse=True)
def isolated_config(tmp_path, monkeypatch):
    """Point the config file at a temporary directory."""
    config_dir = tmp_path / "config"
    monkeypatch.setattr(config, "CONFIG_DIR", config_dir)
    monkeypatch.setattr(config, "CONFIG_FILE", config_dir / "config.json")
    return config_dir / "config.json"


@pytest.fixture()
def normal():
    return normal_model()


@pytest.fixture()
def location():
    return normal_location_model(1.0)


@pytest.fixture()
def poisson():
    return poisson_model()


@pytest.fixture()
def normal_sample():
    """Fifty N(0.3, 1.5²) draws from a fixed seed."""
    return np.random.default_rng(7).normal(0.3, 1.5, 50)


@pytest.fixture()
def quantile_sample():
    """n normal quantiles; sample means reproduce model integrals closely."""
    n = 2000
    return stats.norm.ppf((np.arange(1, n + 1) - 0.5) / n)


@pytest.fixture()
def telephone():
    return load_dataset("telephone-fault").values


@pytest.fixture()
def drosophila():
    return load_dataset("drosophila").values


def _dpd_normal(x, theta, beta):
    mu, sigma = theta
    z = (np.asarray(x, dtype=float) - mu) / sigma
    f = np.exp(-0.5 * z**2) / (sigma * np.sqrt(2 * np.pi))
    score = np.column_stack([z / sigma, (z**2 - 1) / sigma])
    xi_sigma = -beta * (2 * np.pi) ** (-beta / 2) * sigma ** (-beta - 1) * (1 + beta) ** -1.5
    return (score * (f**beta)[:, None]).mean(axis=0) - np.array([0.0, xi_sigma])


def _dpd_poisson(x, theta, beta):
    (lam,) = theta
    k = np.arange(400)
    pmf = stats.poisson.pmf(k, lam)
    xi = np.sum((k / lam - 1) * pmf ** (1 + beta))
    x = np.asarray(x, dtype=float)
    fx = stats.poisson.pmf(x, lam)
    return np.array([np.mean((x / lam - 1) * fx**beta) - xi])


@pytest.fixture()
def dpd_equation():
    """Density power divergence estimating equation coded from closed forms."""
    equations = {"normal": _dpd_normal, "poisson": _dpd_poisson}

    def equation(x, theta, beta, family="normal"):
        return equations[family](x, theta, beta)

    return equation
