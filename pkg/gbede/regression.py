"""GBEDE for the normal linear model y_i = x_iᵀγ + e_i, e_i ~ N(0, σ²).

Each observation has its own density f_i = N(x_iᵀγ, σ²). Integrals of
functions of the residual are the same for every i, so the at-model
integrals are computed once on the residual scale and shared.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import pandas as pd

from gbede.divergence import (
    L2_PAIR,
    TuningPair,
    density_weight,
    empirical_divergence_from_densities,
)
from gbede.exceptions import DomainError, GbedeError, NoRootError
from gbede.models import NEAREST_POINT_SDS, NORMAL_HALF_WIDTH
from gbede.numerics import (
    fixed_nodes,
    matrix_inverse,
    matrix_trace,
    solve_multistart,
    sym_inv_sqrt,
)
from gbede.tuning import MSEEstimate, TuningGrid, best_estimate


logger = logging.getLogger(__name__)

REGRESSION_TOL = 1e-9
TRIM_FRACTION = 0.10
LAD_ITERATIONS = 5


@dataclass(frozen=True)
class RegressionData:
    """Fixed design matrix (first column ones) and response."""

    X: np.ndarray
    y: np.ndarray
    names: tuple[str, ...] = ()

    def __post_init__(self):
        X = np.atleast_2d(np.asarray(self.X, dtype=float))
        y = np.asarray(self.y, dtype=float).ravel()
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        if X.shape[0] != y.size:
            raise DomainError(
                f"design has {X.shape[0]} rows but response has {y.size}",
                operation="RegressionData",
            )
        if not np.allclose(X[:, 0], 1.0):
            raise DomainError(
                "first design column must be the intercept", operation="RegressionData"
            )
        if y.size <= X.shape[1]:
            raise DomainError(
                f"need more than {X.shape[1]} observations, got {y.size}",
                operation="RegressionData",
            )
        if np.linalg.matrix_rank(X) < X.shape[1]:
            raise DomainError(
                "design matrix is not of full column rank", operation="RegressionData"
            )
        if not self.names:
            labels = ("intercept",) + tuple(f"x{j}" for j in range(1, X.shape[1]))
            object.__setattr__(self, "names", labels)

    @classmethod
    def from_columns(cls, predictors, y, names: Optional[list[str]] = None) -> "RegressionData":
        """Prepend the intercept column to raw predictors."""
        Z = np.asarray(predictors, dtype=float)
        if Z.ndim == 1:
            Z = Z[:, np.newaxis]
        X = np.column_stack([np.ones(Z.shape[0]), Z])
        labels = ("intercept", *names) if names else ()
        return cls(X, y, labels)

    @classmethod
    def from_frame(cls, frame: pd.DataFrame, response: str) -> "RegressionData":
        if response not in frame.columns:
            raise DomainError(
                f"response column {response!r} not found", operation="RegressionData"
            )
        predictors = [c for c in frame.columns if c != response]
        return cls.from_columns(
            frame[predictors].to_numpy(dtype=float),
            frame[response].to_numpy(dtype=float),
            predictors,
        )

    @property
    def n(self) -> int:
        return self.y.size

    @property
    def p(self) -> int:
        return self.X.shape[1]


@dataclass(frozen=True)
class RegressionParams:
    """Coefficients γ and error variance σ²."""

    gamma: tuple[float, ...]
    sigma2: float

    def __post_init__(self):
        object.__setattr__(self, "gamma", tuple(float(g) for g in self.gamma))
        object.__setattr__(self, "sigma2", float(self.sigma2))
        if not self.sigma2 > 0:
            raise DomainError(
                f"sigma2 must be positive, got {self.sigma2}",
                operation="RegressionParams",
            )

    @classmethod
    def from_theta(cls, theta) -> "RegressionParams":
        theta = np.asarray(theta, dtype=float)
        return cls(tuple(theta[:-1]), float(theta[-1]))

    def as_array(self) -> np.ndarray:
        return np.array([*self.gamma, self.sigma2])

    @property
    def sigma(self) -> float:
        return math.sqrt(self.sigma2)


@dataclass
class RegressionFit:
    """A fitted GBEDE regression with its sandwich and residuals."""

    params: RegressionParams
    pair: TuningPair
    Jn: np.ndarray
    Kn: np.ndarray
    cov: np.ndarray
    std_residuals: np.ndarray
    converged: bool
    residual_norm: float = 0.0
    all_roots: list[RegressionParams] = field(default_factory=list)
    divergences: list[float] = field(default_factory=list)

    @property
    def std_errors(self) -> np.ndarray:
        return np.sqrt(np.clip(np.diag(self.cov), 0.0, None))

    def to_dict(self, names: tuple[str, ...] = ()) -> dict:
        labels = names or tuple(f"gamma{j}" for j in range(len(self.params.gamma)))
        return {
            "pair": {"alpha": self.pair.alpha, "beta": self.pair.beta},
            "coefficients": dict(zip(labels, self.params.gamma)),
            "sigma2": self.params.sigma2,
            "std_errors": dict(zip((*labels, "sigma2"), self.std_errors.tolist())),
            "std_residuals": self.std_residuals.tolist(),
            "converged": self.converged,
            "residual_norm": self.residual_norm,
            "roots": [[*r.gamma, r.sigma2] for r in self.all_roots],
            "empirical_divergences": list(self.divergences),
        }


def regression_score(y_i: float, x_i, params: RegressionParams) -> np.ndarray:
    """Score of one observation in (γ, σ²)."""
    x_i = np.asarray(x_i, dtype=float)
    s2 = params.sigma2
    r = float(y_i) - float(x_i @ np.asarray(params.gamma))
    return np.append(r * x_i / s2, r * r / (2.0 * s2**2) - 1.0 / (2.0 * s2))


def _normal_density(r: np.ndarray, sigma2: float) -> np.ndarray:
    return np.exp(-0.5 * r * r / sigma2) / math.sqrt(2.0 * math.pi * sigma2)


def _residual_nodes(sigma2: float) -> tuple[np.ndarray, np.ndarray]:
    sigma = math.sqrt(sigma2)
    z, w = fixed_nodes(-NORMAL_HALF_WIDTH, NORMAL_HALF_WIDTH)
    return sigma * z, sigma * w


@dataclass(frozen=True)
class _ResidualIntegrals:
    a: float  # ∫ r² f^{1+β} e^{αf}
    b: float  # ∫ s² f^{1+β} e^{αf}
    c: float  # ∫ s f^{1+β} e^{αf}
    a2: float  # ∫ r² f^{1+2β} e^{2αf}
    b2: float  # ∫ s² f^{1+2β} e^{2αf}


def _residual_integrals(sigma2: float, pair: TuningPair) -> _ResidualIntegrals:
    r, w = _residual_nodes(sigma2)
    f = _normal_density(r, sigma2)
    weight = density_weight(f, pair)
    s = r * r / (2.0 * sigma2**2) - 1.0 / (2.0 * sigma2)
    first = w * f * weight
    second = first * weight
    return _ResidualIntegrals(
        a=float(first @ (r * r)),
        b=float(first @ (s * s)),
        c=float(first @ s),
        a2=float(second @ (r * r)),
        b2=float(second @ (s * s)),
    )


def regression_estimating_fn(
    data: RegressionData, theta: np.ndarray, pair: TuningPair
) -> np.ndarray:
    """(1/n) Σ_i {u_i f_i^β e^{αf_i} − ∫ u_i f_i^{1+β} e^{αf_i}} at θ = (γ, σ²)."""
    gamma, sigma2 = theta[:-1], float(theta[-1])
    if not sigma2 > 0:
        raise DomainError("sigma2 must be positive", operation="regression_estimating_fn")
    r = data.y - data.X @ gamma
    weight = density_weight(_normal_density(r, sigma2), pair)
    gamma_part = (weight * r) @ data.X / (data.n * sigma2)
    scale_part = float(
        np.mean(weight * (r * r / (2.0 * sigma2**2) - 1.0 / (2.0 * sigma2)))
    )
    return np.append(gamma_part, scale_part - _residual_integrals(sigma2, pair).c)


def regression_divergence(
    data: RegressionData, theta: np.ndarray, pair: TuningPair
) -> float:
    """Sum over observations of the per-observation empirical divergence."""
    gamma, sigma2 = theta[:-1], float(theta[-1])
    r_nodes, w_nodes = _residual_nodes(sigma2)
    f_nodes = _normal_density(r_nodes, sigma2)
    f_obs = _normal_density(data.y - data.X @ gamma, sigma2)
    return data.n * empirical_divergence_from_densities(f_nodes, w_nodes, f_obs, pair)


def _to_eta(theta: np.ndarray) -> np.ndarray:
    return np.append(theta[:-1], 0.5 * math.log(theta[-1]))


def _from_eta(eta: np.ndarray) -> np.ndarray:
    return np.append(eta[:-1], math.exp(2.0 * eta[-1]))


def _ols(X: np.ndarray, y: np.ndarray) -> np.ndarray:
    return np.linalg.lstsq(X, y, rcond=None)[0]


def _lad_irls(X: np.ndarray, y: np.ndarray, iterations: int = LAD_ITERATIONS) -> np.ndarray:
    gamma = _ols(X, y)
    for _ in range(iterations):
        root_w = 1.0 / np.sqrt(np.maximum(np.abs(y - X @ gamma), 1e-6))
        gamma = _ols(X * root_w[:, np.newaxis], y * root_w)
    return gamma


def regression_starts(data: RegressionData) -> list[np.ndarray]:
    """OLS, OLS without the largest 10% of residuals, and an IRLS LAD fit.

    Each coefficient start is paired with a mean-square and a MAD-based
    variance.
    """
    X, y = data.X, data.y
    gamma_ols = _ols(X, y)
    resid = y - X @ gamma_ols
    keep = np.argsort(np.abs(resid))[: data.n - math.ceil(TRIM_FRACTION * data.n)]
    candidates = [gamma_ols]
    if keep.size > data.p and np.linalg.matrix_rank(X[keep]) == data.p:
        candidates.append(_ols(X[keep], y[keep]))
    candidates.append(_lad_irls(X, y))

    starts = []
    for gamma in candidates:
        r = y - X @ gamma
        variances = [float(np.mean(r * r))]
        mad = 1.4826 * float(np.median(np.abs(r - np.median(r))))
        if mad > 0:
            variances.append(mad * mad)
        starts.extend(np.append(gamma, s2) for s2 in variances if s2 > 0)
    return starts


def _plausible(data: RegressionData, theta: np.ndarray) -> bool:
    sigma2 = theta[-1]
    spread = float(np.var(data.y)) or 1.0
    if not 1e-12 * spread < sigma2 <= 100.0 * spread:
        return False
    r = data.y - data.X @ theta[:-1]
    return bool(np.min(np.abs(r)) <= NEAREST_POINT_SDS * math.sqrt(sigma2))


def regression_sandwich(
    data: RegressionData, params: RegressionParams, pair: TuningPair
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """At-model J_n, K_n and cov = J_n⁻¹ K_n J_n⁻¹ / n.

    J_n = (XᵀX/n)·a/σ⁴ ⊕ b and K_n likewise with the doubled exponents, the
    off-diagonal blocks vanishing by symmetry of the residual integrands.
    """
    s2 = params.sigma2
    ints = _residual_integrals(s2, pair)
    gram = data.X.T @ data.X / data.n
    p = data.p
    Jn = np.zeros((p + 1, p + 1))
    Kn = np.zeros((p + 1, p + 1))
    Jn[:p, :p] = gram * ints.a / s2**2
    Jn[p, p] = ints.b
    Kn[:p, :p] = gram * ints.a2 / s2**2
    Kn[p, p] = ints.b2 - ints.c**2
    J_inv = matrix_inverse(Jn, "J_n")
    cov = J_inv @ Kn @ J_inv.T / data.n
    return Jn, Kn, 0.5 * (cov + cov.T)


def standardized_residuals(data: RegressionData, params: RegressionParams) -> np.ndarray:
    """(y_i − x_iᵀγ̂)/σ̂."""
    return (data.y - data.X @ np.asarray(params.gamma)) / params.sigma


def fit_gbede_regression(
    data: RegressionData,
    pair: TuningPair,
    init: Optional[RegressionParams] = None,
    *,
    tol: float = REGRESSION_TOL,
) -> RegressionFit:
    """Solve the stacked (γ, σ²) estimating equation and rank its roots.

    Raises:
        NoRootError: when no start converges.
    """
    starts = regression_starts(data)
    if init is not None:
        starts.insert(0, init.as_array())

    def equations(eta: np.ndarray) -> np.ndarray:
        return regression_estimating_fn(data, _from_eta(eta), pair)

    etas = solve_multistart(
        equations,
        [_to_eta(s) for s in starts],
        tol,
        accept=lambda eta: _plausible(data, _from_eta(eta)),
    )
    if not etas:
        raise NoRootError(
            f"no root of the {pair} regression equation found from {len(starts)} starts",
            operation="fit_gbede_regression",
        )
    roots = [_from_eta(eta) for eta in etas]
    divergences = [regression_divergence(data, theta, pair) for theta in roots]
    chosen = int(np.argmin(divergences))
    theta_hat = roots[chosen]
    logger.debug("regression %s: %d roots, chose %s", pair, len(roots), theta_hat)

    params = RegressionParams.from_theta(theta_hat)
    residual = float(np.max(np.abs(regression_estimating_fn(data, theta_hat, pair))))
    Jn, Kn, cov = regression_sandwich(data, params, pair)
    return RegressionFit(
        params=params,
        pair=pair,
        Jn=Jn,
        Kn=Kn,
        cov=cov,
        std_residuals=standardized_residuals(data, params),
        converged=residual <= tol,
        residual_norm=residual,
        all_roots=[RegressionParams.from_theta(r) for r in roots],
        divergences=divergences,
    )


def regression_pivot(
    data: RegressionData, fit: RegressionFit, theta0: RegressionParams
) -> np.ndarray:
    """√n K_n^{-1/2} J_n (θ̂ − θ₀), approximately standard normal."""
    delta = fit.params.as_array() - theta0.as_array()
    return math.sqrt(data.n) * sym_inv_sqrt(fit.Kn, "K_n") @ fit.Jn @ delta


def estimate_regression_mse(
    data: RegressionData, pair: TuningPair, pilot: RegressionParams
) -> MSEEstimate:
    """Squared distance from the pilot plus tr(cov), with regression matrices."""
    try:
        fit = fit_gbede_regression(data, pair)
    except GbedeError as e:
        logger.debug("regression tuning cell %s invalid: %s", pair, e)
        return MSEEstimate.invalid(pair, str(e))
    bias_part = float(np.sum((fit.params.as_array() - pilot.as_array()) ** 2))
    var_part = matrix_trace(fit.cov)
    return MSEEstimate(
        pair=pair,
        mse_hat=bias_part + var_part,
        bias_part=bias_part,
        var_part=var_part,
        theta_hat=None,
    )


def select_regression_tuning(
    data: RegressionData, grid: Optional[TuningGrid] = None
) -> tuple[TuningPair, list[MSEEstimate]]:
    """Warwick-Jones selection with the GBEDE(0, 1) regression fit as pilot."""
    grid = grid or TuningGrid.default()
    pilot = fit_gbede_regression(data, L2_PAIR).params
    surface = [estimate_regression_mse(data, pair, pilot) for pair in grid.pairs()]
    return best_estimate(surface).pair, surface
