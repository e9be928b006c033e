"""B-exponential divergence, its empirical objective and the GBEDE equations.

The divergence with generator B(y) = 2(e^{αy} − αy − 1)/α² is written
pointwise as e^{αf}·B(g − f), which is exact and free of cancellation. The
generalized family weights the model score by f^β e^{αf}; its estimating
function has an antiderivative (the empirical divergence) used to rank
multiple roots.
"""

import math
from collections.abc import Callable
from dataclasses import dataclass

import numpy as np
from scipy import special

from gbede.exceptions import DomainError
from gbede.models import ParametricModel, ThetaLike
from gbede.numerics import SupportSpec, integrate, upper_incomplete_gamma


FALLBACK_BASE = 1e-12


@dataclass(frozen=True, order=True)
class TuningPair:
    """The (α, β) pair indexing the GBEDE family."""

    alpha: float
    beta: float

    def __post_init__(self):
        object.__setattr__(self, "alpha", float(self.alpha))
        object.__setattr__(self, "beta", float(self.beta))
        if not (math.isfinite(self.alpha) and math.isfinite(self.beta)):
            raise DomainError(
                f"tuning pair must be finite, got ({self.alpha}, {self.beta})",
                operation="TuningPair",
            )
        if self.beta < 0:
            raise DomainError(
                f"beta must be non-negative, got {self.beta}", operation="TuningPair"
            )

    @property
    def is_mle(self) -> bool:
        return self.alpha == 0.0 and self.beta == 0.0

    def __str__(self) -> str:
        return f"({self.alpha:g}, {self.beta:g})"


MLE_PAIR = TuningPair(0.0, 0.0)
L2_PAIR = TuningPair(0.0, 1.0)


def density_weight(f, pair: TuningPair) -> np.ndarray:
    """The downweighting factor f^β e^{αf}."""
    f = np.asarray(f, dtype=float)
    weight = np.exp(pair.alpha * f)
    if pair.beta != 0.0:
        weight = weight * np.power(f, pair.beta)
    return weight


def bregman_b(y, alpha: float):
    """Brègman generator B(y) = 2(e^{αy} − αy − 1)/α², equal to y² at α = 0."""
    y = np.asarray(y, dtype=float)
    t = alpha * y
    with np.errstate(divide="ignore", invalid="ignore"):
        exact = 2.0 * (np.expm1(t) - t) / (alpha * alpha if alpha != 0 else 1.0)
    # third-order series where expm1(t) - t cancels
    series = y**2 * (1.0 + t / 3.0 + t**2 / 12.0 + t**3 / 60.0)
    value = np.where(np.abs(t) < 1e-3, series, exact)
    return float(value) if value.ndim == 0 else value


def bed_divergence(
    g: Callable,
    f: Callable,
    alpha: float,
    support: SupportSpec,
    tol: float = 1e-10,
) -> float:
    """d_α(g, f) = ∫ e^{αf} B(g − f), keeping every term.

    At α = 0 this is the squared L2 distance between ``g`` and ``f``.
    """

    def integrand(x):
        fx = float(f(x))
        return math.exp(alpha * fx) * bregman_b(float(g(x)) - fx, alpha)

    return integrate(integrand, support, tol).value


def bed_objective(
    sample, model: ParametricModel, theta: ThetaLike, alpha: float
) -> float:
    """Empirical BED objective minimized by the MBEDE.

    Equals (2/α)[∫(f e^{αf} − (e^{αf} − 1)/α) − mean e^{αf(X_i)}], which
    differs from d_α(g_n, f_θ) only by terms free of θ.
    """
    if alpha == 0:
        raise DomainError("the objective needs alpha != 0", operation="bed_objective")
    theta = model.check(theta)
    x_nodes, w_nodes = model.nodes(theta)
    f_nodes = model.density(x_nodes, theta)
    integral = np.dot(
        w_nodes, f_nodes * np.exp(alpha * f_nodes) - np.expm1(alpha * f_nodes) / alpha
    )
    f_obs = model.density(np.asarray(sample, dtype=float), theta)
    return float(2.0 / alpha * (integral - np.mean(np.exp(alpha * f_obs))))


def xi_vector(theta: ThetaLike, pair: TuningPair, model: ParametricModel) -> np.ndarray:
    """∫ u f^{1+β} e^{αf}, the centring term of the estimating function."""
    x, w = model.nodes(theta)
    f = model.density(x, theta)
    u = model.score(x, theta)
    return (w * f * density_weight(f, pair)) @ u


def gbede_psi(
    x, theta: ThetaLike, pair: TuningPair, model: ParametricModel
) -> np.ndarray:
    """ψ(x, θ) = u f^β e^{αf} − ∫ u f^{1+β} e^{αf}."""
    theta = model.check(theta)
    u = model.score(x, theta)
    weight = density_weight(model.density(x, theta), pair)
    return u * np.asarray(weight)[..., np.newaxis] - xi_vector(theta, pair, model)


def estimating_fn(
    sample, theta: ThetaLike, pair: TuningPair, model: ParametricModel
) -> np.ndarray:
    """Sample mean of ψ; its zero defines GBEDE(α, β)."""
    x = np.atleast_1d(np.asarray(sample, dtype=float))
    if x.size == 0:
        raise DomainError("sample is empty", operation="estimating_fn")
    theta = model.check(theta)
    u = model.score(x, theta)
    weight = density_weight(model.density(x, theta), pair)
    return (weight @ u) / x.size - xi_vector(theta, pair, model)


def xi_antiderivative(x, alpha: float, beta: float):
    """ξ(x, α, β) = −Γ(β+1, −αx)/(−α)^{β+1}, an antiderivative of x^β e^{αx}.

    Only valid for α < 0 and β > −1.
    """
    if not alpha < 0:
        raise DomainError(
            f"closed-form antiderivative needs alpha < 0, got {alpha}",
            operation="xi_antiderivative",
        )
    if not beta > -1:
        raise DomainError(
            f"closed-form antiderivative needs beta > -1, got {beta}",
            operation="xi_antiderivative",
        )
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise DomainError("x must be non-negative", operation="xi_antiderivative")
    value = -upper_incomplete_gamma(beta + 1.0, -alpha * x) / (-alpha) ** (beta + 1.0)
    return float(value) if np.ndim(value) == 0 else value


def power_exp_integral(x, alpha: float, b: float, base: float = 0.0):
    """∫_base^x t^b e^{αt} dt for any sign of α.

    Uses Kummer's function for b > −1 and the exponential integral for
    b = −1, where ``base`` must be positive.
    """
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        if b > -1:

            def antiderivative(t):
                return t ** (b + 1.0) / (b + 1.0) * special.hyp1f1(b + 1.0, b + 2.0, alpha * t)

            value = antiderivative(x) - antiderivative(np.asarray(base, dtype=float))
        elif b == -1:
            if not base > 0:
                raise DomainError(
                    "b = -1 needs a positive base point", operation="power_exp_integral"
                )
            if alpha == 0:
                value = np.log(x / base)
            else:
                value = special.expi(alpha * x) - special.expi(alpha * base)
        else:
            raise DomainError(
                f"exponent must be >= -1, got {b}", operation="power_exp_integral"
            )
    return float(value) if np.ndim(value) == 0 else value


def _uses_closed_form(pair: TuningPair) -> bool:
    return pair.alpha < 0 and pair.beta > 0


def empirical_divergence_from_densities(
    f_nodes: np.ndarray,
    w_nodes: np.ndarray,
    f_obs: np.ndarray,
    pair: TuningPair,
) -> float:
    """Empirical divergence given model densities at nodes and observations.

    The integral term is ∫[ξ(f) − ξ(0)] so that it stays finite on unbounded
    supports; the constant dropped does not depend on θ.
    """
    alpha, beta = pair.alpha, pair.beta
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        if _uses_closed_form(pair):
            lower_gamma = special.gammainc(beta + 1.0, -alpha * f_nodes) * special.gamma(
                beta + 1.0
            )
            integral = np.dot(w_nodes, lower_gamma) / (-alpha) ** (beta + 1.0)
            observed = xi_antiderivative(f_obs, alpha, beta - 1.0)
        else:
            integral = np.dot(w_nodes, power_exp_integral(f_nodes, alpha, beta))
            observed = power_exp_integral(f_obs, alpha, beta - 1.0, FALLBACK_BASE)
        value = float(integral - np.mean(observed))
    return value if math.isfinite(value) else math.inf


def empirical_divergence(
    sample, theta: ThetaLike, pair: TuningPair, model: ParametricModel
) -> float:
    """∫ξ(f_θ, α, β) − mean ξ(f_θ(X_i), α, β − 1), up to a θ-free constant.

    Its gradient in θ is minus the estimating function, so among several
    roots the one with the smallest value is preferred. The incomplete-gamma
    form needs α < 0 and β > 0; other pairs integrate t^b e^{αt} from a small
    fixed base point instead.
    """
    theta = model.check(theta)
    x_nodes, w_nodes = model.nodes(theta)
    f_nodes = model.density(x_nodes, theta)
    f_obs = model.density(np.atleast_1d(np.asarray(sample, dtype=float)), theta)
    return empirical_divergence_from_densities(f_nodes, w_nodes, f_obs, pair)


def as_pair(pair) -> TuningPair:
    """Accept a TuningPair or an (α, β) tuple."""
    if isinstance(pair, TuningPair):
        return pair
    alpha, beta = pair
    return TuningPair(alpha, beta)


