"""Data-driven choice of (α, β) by the Warwick-Jones criterion.

For each candidate pair the estimated mean squared error is the squared
distance of the fit from the minimum L2 pilot plus the trace of the
empirical sandwich covariance divided by n.
"""

import logging
from collections.abc import Iterable, Iterator
from dataclasses import dataclass
from typing import Optional

import numpy as np

from gbede.asymptotics import empirical_JK
from gbede.divergence import TuningPair
from gbede.estimators import StartStrategy, fit_gbede, fit_l2_pilot
from gbede.exceptions import DomainError, GbedeError
from gbede.models import ParametricModel, ParamVector, ThetaLike, as_theta
from gbede.numerics import matrix_trace


logger = logging.getLogger(__name__)

MSE_TIE_TOL = 1e-12


def _grid_values(start: float, stop: float, step: float) -> list[float]:
    count = int(round((stop - start) / step))
    return [round(start + i * step, 10) for i in range(count + 1)]


@dataclass(frozen=True)
class TuningGrid:
    """Candidate α and β values; every combination is a grid cell."""

    alphas: tuple[float, ...]
    betas: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "alphas", tuple(float(a) for a in self.alphas))
        object.__setattr__(self, "betas", tuple(float(b) for b in self.betas))
        for label, values in (("alphas", self.alphas), ("betas", self.betas)):
            if not values:
                raise DomainError(f"{label} must be nonempty", operation="TuningGrid")
            if any(b <= a for a, b in zip(values, values[1:])):
                raise DomainError(
                    f"{label} must be sorted without duplicates",
                    operation="TuningGrid",
                )
        if self.betas[0] < 0:
            raise DomainError("betas must be non-negative", operation="TuningGrid")

    @classmethod
    def default(cls) -> "TuningGrid":
        """α in -3.0..0.0 and β in 0.0..1.0, both in steps of 0.1."""
        return cls(_grid_values(-3.0, 0.0, 0.1), _grid_values(0.0, 1.0, 0.1))

    @classmethod
    def from_values(cls, alphas: Iterable[float], betas: Iterable[float]) -> "TuningGrid":
        return cls(tuple(sorted(set(alphas))), tuple(sorted(set(betas))))

    def pairs(self) -> Iterator[TuningPair]:
        for alpha in self.alphas:
            for beta in self.betas:
                yield TuningPair(alpha, beta)

    def __len__(self) -> int:
        return len(self.alphas) * len(self.betas)


@dataclass(frozen=True)
class MSEEstimate:
    """One cell of the estimated MSE surface."""

    pair: TuningPair
    mse_hat: float
    bias_part: float
    var_part: float
    theta_hat: Optional[ParamVector]
    valid: bool = True
    reason: str = ""

    @classmethod
    def invalid(cls, pair: TuningPair, reason: str) -> "MSEEstimate":
        return cls(pair, np.inf, np.inf, np.inf, None, valid=False, reason=reason)


def mse_from_fit(
    sample: np.ndarray,
    theta_hat: np.ndarray,
    pair: TuningPair,
    model: ParametricModel,
    pilot: np.ndarray,
) -> tuple[float, float]:
    """(bias part, variance part) of the criterion at a fitted θ̂."""
    bias_part = float(np.sum((theta_hat - pilot) ** 2))
    cov = empirical_JK(sample, theta_hat, pair, model).cov
    var_part = matrix_trace(cov) / sample.size
    return bias_part, var_part


def estimate_mse(
    sample,
    pair: TuningPair,
    model: ParametricModel,
    pilot: ThetaLike,
    init_strategy: StartStrategy = StartStrategy.GRID,
) -> MSEEstimate:
    """Estimated MSE of GBEDE(α, β) against the pilot.

    A failed fit or an unusable sandwich gives an invalid estimate instead of
    an exception so that one bad cell does not sink a grid search.
    """
    x = model.check_sample(sample)
    pilot_arr = model.check(pilot)
    try:
        fit = fit_gbede(
            x, model, pair, init_strategy, pilot=pilot_arr, with_sandwich=False
        )
        theta_hat = fit.theta_hat.as_array()
        bias_part, var_part = mse_from_fit(x, theta_hat, pair, model, pilot_arr)
    except GbedeError as e:
        logger.debug("tuning cell %s invalid: %s", pair, e)
        return MSEEstimate.invalid(pair, str(e))
    if not (np.isfinite(var_part) and var_part >= 0):
        return MSEEstimate.invalid(pair, f"variance term is {var_part}")
    return MSEEstimate(
        pair=pair,
        mse_hat=bias_part + var_part,
        bias_part=bias_part,
        var_part=var_part,
        theta_hat=fit.theta_hat,
    )


def best_estimate(estimates: Iterable[MSEEstimate]) -> MSEEstimate:
    """Smallest MSE; near-ties go to larger β, then larger |α|."""
    valid = [e for e in estimates if e.valid]
    if not valid:
        raise GbedeError(
            "every tuning cell failed; no pair can be selected",
            operation="select_tuning",
        )
    lowest = min(e.mse_hat for e in valid)
    tied = [e for e in valid if e.mse_hat - lowest <= MSE_TIE_TOL]
    return max(tied, key=lambda e: (e.pair.beta, abs(e.pair.alpha)))


def select_tuning(
    sample,
    model: ParametricModel,
    grid: Optional[TuningGrid] = None,
    *,
    pilot: Optional[ThetaLike] = None,
    init_strategy: StartStrategy = StartStrategy.GRID,
) -> tuple[TuningPair, list[MSEEstimate]]:
    """Evaluate the criterion over the grid and return the minimizing pair.

    The L2 pilot is computed once (unless given) and reused for every cell.
    The surface is returned in grid order.
    """
    x = model.check_sample(sample)
    grid = grid or TuningGrid.default()
    if pilot is None:
        pilot_arr = fit_l2_pilot(x, model, with_sandwich=False).theta_hat.as_array()
    else:
        pilot_arr = as_theta(pilot)
    logger.debug("tuning over %d cells with pilot %s", len(grid), pilot_arr)

    surface = [
        estimate_mse(x, pair, model, pilot_arr, init_strategy) for pair in grid.pairs()
    ]
    return best_estimate(surface).pair, surface
