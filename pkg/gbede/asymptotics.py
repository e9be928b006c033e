"""Sandwich covariance, efficiency and influence of GBEDE(α, β).

At the model the matrices are

    J = ∫ u uᵀ f^{1+β} e^{αf},   K = ∫ u uᵀ f^{1+2β} e^{2αf} − ξξᵀ,
    ξ = ∫ u f^{1+β} e^{αf},

and the estimator is asymptotically normal with covariance J⁻¹KJ⁻¹. Away
from the model the true density enters J and K; ``empirical_JK`` replaces
those expectations by sample means.
"""

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import optimize

from gbede.divergence import TuningPair, density_weight
from gbede.exceptions import DomainError, GbedeError
from gbede.models import ParametricModel, ThetaLike, fisher_information
from gbede.numerics import matrix_inverse


logger = logging.getLogger(__name__)

OPTIMAL_ALPHA_TOL = 1e-3


@dataclass(frozen=True)
class SandwichCov:
    """J, K, ξ and the asymptotic covariance J⁻¹KJ⁻¹."""

    J: np.ndarray
    K: np.ndarray
    xi: np.ndarray
    cov: np.ndarray
    n: Optional[int] = None

    @property
    def std_errors(self) -> np.ndarray:
        """Standard errors sqrt(diag(cov)/n); needs ``n``."""
        if not self.n:
            raise DomainError(
                "standard errors need the sample size", operation="std_errors"
            )
        return np.sqrt(np.clip(np.diag(self.cov), 0.0, None) / self.n)


def sandwich(J: np.ndarray, K: np.ndarray, name_j: str = "J") -> np.ndarray:
    """J⁻¹ K J⁻ᵀ, symmetrized."""
    J_inv = matrix_inverse(J, name_j)
    cov = J_inv @ K @ J_inv.T
    return 0.5 * (cov + cov.T)


def model_JK(
    theta: ThetaLike, pair: TuningPair, model: ParametricModel
) -> SandwichCov:
    """J, K and ξ evaluated with the model density itself as the truth."""
    theta = model.check(theta)
    x, w = model.nodes(theta)
    f = model.density(x, theta)
    u = model.score(x, theta)
    weight = density_weight(f, pair)

    first = w * f * weight
    second = w * f * weight**2
    xi = first @ u
    J = (u.T * first) @ u
    K = (u.T * second) @ u - np.outer(xi, xi)
    return SandwichCov(J=J, K=K, xi=xi, cov=sandwich(J, K))


def empirical_JK(
    sample, theta: ThetaLike, pair: TuningPair, model: ParametricModel
) -> SandwichCov:
    """Data-based J and K: expectations under the truth become sample means.

    J = ∫ uuᵀ f^{1+β}e^{αf} + mean{(I − βuuᵀ − αfuuᵀ) f^β e^{αf}}
        − ∫ (I − βuuᵀ − αfuuᵀ) f^{1+β} e^{αf}
    K = mean(uuᵀ f^{2β} e^{2αf}) − ξ̂ξ̂ᵀ with ξ̂ = mean(u f^β e^{αf}).
    """
    theta = model.check(theta)
    x_obs = np.atleast_1d(np.asarray(sample, dtype=float))
    n = x_obs.size
    if n == 0:
        raise DomainError("sample is empty", operation="empirical_JK")

    def curvature(x: np.ndarray, f: np.ndarray, u: np.ndarray) -> np.ndarray:
        outer = u[:, :, np.newaxis] * u[:, np.newaxis, :]
        factor = (pair.beta + pair.alpha * f)[:, np.newaxis, np.newaxis]
        return model.information(x, theta) - factor * outer

    x_nodes, w_nodes = model.nodes(theta)
    f_nodes = model.density(x_nodes, theta)
    u_nodes = model.score(x_nodes, theta)
    node_weight = w_nodes * f_nodes * density_weight(f_nodes, pair)

    f_obs = model.density(x_obs, theta)
    u_obs = model.score(x_obs, theta)
    obs_weight = density_weight(f_obs, pair)

    J_model = (u_nodes.T * node_weight) @ u_nodes
    correction = np.einsum("i,ijk->jk", obs_weight, curvature(x_obs, f_obs, u_obs)) / n
    correction -= np.einsum("i,ijk->jk", node_weight, curvature(x_nodes, f_nodes, u_nodes))
    J = J_model + correction
    J = 0.5 * (J + J.T)

    xi_hat = (obs_weight @ u_obs) / n
    K = (u_obs.T * obs_weight**2) @ u_obs / n - np.outer(xi_hat, xi_hat)
    return SandwichCov(J=J, K=K, xi=xi_hat, cov=sandwich(J, K), n=n)


def are(
    pair: TuningPair,
    model: ParametricModel,
    theta: ThetaLike,
    component: int = 0,
) -> float:
    """Asymptotic relative efficiency, in percent, of one component."""
    if not 0 <= component < model.p:
        raise DomainError(
            f"component {component} out of range for {model.name}", operation="are"
        )
    fisher_inv = matrix_inverse(fisher_information(model, theta), "Fisher information")
    cov = model_JK(theta, pair, model).cov
    return float(100.0 * fisher_inv[component, component] / cov[component, component])


def influence_function(
    y, theta: ThetaLike, pair: TuningPair, model: ParametricModel
) -> np.ndarray:
    """IF(y) = J⁻¹{u(y) f^β(y) e^{αf(y)} − ξ} at the model."""
    theta = model.check(theta)
    matrices = model_JK(theta, pair, model)
    u = np.atleast_2d(model.score(np.atleast_1d(y), theta))
    weight = density_weight(model.density(np.atleast_1d(y), theta), pair)
    centred = u * weight[:, np.newaxis] - matrices.xi
    values = np.linalg.solve(matrices.J, centred.T).T
    return values[0] if np.ndim(y) == 0 else values


def score_weights(
    y, theta: ThetaLike, pair: TuningPair, model: ParametricModel
) -> np.ndarray:
    """The factor f^β e^{αf} by which the score is downweighted at y."""
    return density_weight(model.density(y, theta), pair)


def optimal_alpha(
    beta: float,
    model: ParametricModel,
    theta: ThetaLike,
    bracket: tuple[float, float] = (-12.0, 0.0),
    component: int = 0,
    tol: float = OPTIMAL_ALPHA_TOL,
) -> tuple[float, float]:
    """α maximizing the ARE at fixed β, searched inside ``bracket``.

    A maximizer on the bracket edge is accepted only when the ARE just
    outside that edge is lower, so the maximum really is local.

    Raises:
        GbedeError: if the ARE keeps increasing past an edge of the bracket.
    """
    lo, hi = bracket
    if not lo < hi:
        raise DomainError(f"bad bracket {bracket}", operation="optimal_alpha")

    def efficiency(alpha: float) -> float:
        return are(TuningPair(alpha, beta), model, theta, component)

    result = optimize.minimize_scalar(
        lambda a: -efficiency(a),
        bounds=(lo, hi),
        method="bounded",
        options={"xatol": tol},
    )
    alpha_star = float(result.x)
    value = -float(result.fun)

    for edge, outside in ((lo, lo - 10 * tol), (hi, hi + 10 * tol)):
        if abs(alpha_star - edge) <= 10 * tol:
            edge_value = efficiency(edge)
            if efficiency(outside) > edge_value:
                raise GbedeError(
                    f"ARE is still increasing at alpha={edge}; widen the bracket",
                    operation="optimal_alpha",
                )
            if edge_value >= value:
                alpha_star, value = edge, edge_value
    logger.debug("optimal alpha at beta=%g: %.4f (ARE %.3f)", beta, alpha_star, value)
    return alpha_star, value
