"""Fitting front-end: MLE, MBEDE, GBEDE(α, β), MDPDE and the minimum L2 pilot.

GBEDE fits solve the estimating equation from a set of starts in the
model's unconstrained coordinates. When several roots survive, the one with
the smallest empirical divergence is reported and all of them are kept on
the result. Divergence ties go to the root nearest the L2 pilot.
"""

import logging
from collections.abc import Callable
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np

from gbede.asymptotics import SandwichCov, empirical_JK
from gbede.divergence import (
    L2_PAIR,
    MLE_PAIR,
    TuningPair,
    bed_objective,
    empirical_divergence,
    estimating_fn,
)
from gbede.exceptions import ConvergenceError, DomainError, GbedeError, NoRootError
from gbede.models import GRID_POINTS, ParametricModel, ParamVector, ThetaLike, as_theta
from gbede.numerics import minimize, solve_multistart


logger = logging.getLogger(__name__)

DEFAULT_TOL = 1e-10
DIVERGENCE_TIE_TOL = 1e-10
MBEDE_CHECK_TOL = 1e-4


class Method(str, Enum):
    """Which estimator produced a result."""

    MLE = "MLE"
    MBEDE = "MBEDE"
    GBEDE = "GBEDE"
    MDPDE = "MDPDE"
    L2_PILOT = "L2-pilot"


class SelectionRule(str, Enum):
    """How the reported root was chosen."""

    UNIQUE_ROOT = "unique-root"
    MIN_EMPIRICAL_DIVERGENCE = "min-empirical-divergence"
    MIN_OBJECTIVE = "min-objective"


class StartStrategy(str, Enum):
    """Start sets for the multistart solver.

    GRID adds a grid over the data range and the L2 pilot to the MLE and
    median-type starts; BASIC uses only the latter two.
    """

    GRID = "grid"
    BASIC = "basic"


@dataclass
class EstimationResult:
    """Outcome of one fit."""

    theta_hat: ParamVector
    pair: TuningPair
    method: Method
    residual_norm: float
    all_roots: list[ParamVector]
    selected_by: SelectionRule
    converged: bool = True
    iterations: int = 0
    objective_value: Optional[float] = None
    divergences: list[float] = field(default_factory=list)
    sandwich: Optional[SandwichCov] = None
    n: int = 0

    @property
    def std_errors(self) -> Optional[np.ndarray]:
        if self.sandwich is None:
            return None
        return self.sandwich.std_errors

    def to_dict(self) -> dict:
        """JSON-ready summary."""
        data = {
            "method": self.method.value,
            "pair": {"alpha": self.pair.alpha, "beta": self.pair.beta},
            "estimate": self.theta_hat.to_dict(),
            "residual_norm": self.residual_norm,
            "selected_by": self.selected_by.value,
            "converged": self.converged,
            "roots": [root.to_dict() for root in self.all_roots],
            "empirical_divergences": list(self.divergences),
            "n": self.n,
        }
        if self.objective_value is not None:
            data["objective_value"] = self.objective_value
        if self.sandwich is not None:
            data["std_errors"] = dict(
                zip(self.theta_hat.names, self.sandwich.std_errors.tolist())
            )
        return data


def _attach_sandwich(
    result: EstimationResult, sample: np.ndarray, model: ParametricModel
) -> EstimationResult:
    try:
        result.sandwich = empirical_JK(sample, result.theta_hat, result.pair, model)
    except GbedeError as e:
        logger.debug("no sandwich for %s at %s: %s", result.method.value, result.pair, e)
    return result


def _start_set(
    sample: np.ndarray,
    model: ParametricModel,
    strategy: StartStrategy,
    pilot: Optional[np.ndarray],
    init: Optional[np.ndarray],
    fitting_pilot: bool = False,
    grid_points: int = GRID_POINTS,
) -> tuple[list[np.ndarray], Optional[np.ndarray]]:
    """Starts for the solver, and the L2 pilot if one was used or computed."""
    starts: list[np.ndarray] = []
    if init is not None:
        starts.append(init)
    try:
        starts.append(model.closed_form_mle(sample))
    except DomainError:
        pass
    starts.append(model.moment_start(sample))
    if strategy is StartStrategy.GRID:
        if pilot is None and not fitting_pilot:
            pilot = _pilot_or_none(sample, model)
        if pilot is not None:
            starts.insert(1 if init is not None else 0, pilot)
        starts.extend(model.grid_starts(sample, grid_points))
    elif pilot is not None:
        starts.append(pilot)
    return [s for s in starts if model.feasible(s)], pilot


def _pilot_or_none(sample: np.ndarray, model: ParametricModel) -> Optional[np.ndarray]:
    try:
        return fit_l2_pilot(sample, model, with_sandwich=False).theta_hat.as_array()
    except GbedeError as e:
        logger.debug("L2 pilot unavailable: %s", e)
        return None


def _solve(
    sample: np.ndarray,
    model: ParametricModel,
    pair: TuningPair,
    starts: list[np.ndarray],
    tol: float,
) -> list[np.ndarray]:
    def equations(eta: np.ndarray) -> np.ndarray:
        return estimating_fn(sample, model.from_unconstrained(eta), pair, model)

    def accept(eta: np.ndarray) -> bool:
        theta = model.from_unconstrained(eta)
        return model.feasible(theta) and model.plausible(theta, sample)

    etas = solve_multistart(
        equations, [model.to_unconstrained(s) for s in starts], tol, accept
    )
    return [model.from_unconstrained(eta) for eta in etas]


def _select_root(
    sample: np.ndarray,
    model: ParametricModel,
    pair: TuningPair,
    roots: list[np.ndarray],
    anchor: Callable[[], np.ndarray],
) -> tuple[int, list[float], SelectionRule]:
    divergences = [empirical_divergence(sample, root, pair, model) for root in roots]
    if len(roots) == 1:
        return 0, divergences, SelectionRule.UNIQUE_ROOT

    best = min(divergences)
    tied = [i for i, d in enumerate(divergences) if d - best < DIVERGENCE_TIE_TOL]
    if len(tied) > 1:
        target = anchor()
        logger.debug("%d roots tie on divergence; nearest to %s wins", len(tied), target)
        tied.sort(key=lambda i: float(np.linalg.norm(roots[i] - target)))
    return tied[0], divergences, SelectionRule.MIN_EMPIRICAL_DIVERGENCE


def fit_gbede(
    sample,
    model: ParametricModel,
    pair: TuningPair,
    init_strategy: StartStrategy = StartStrategy.GRID,
    *,
    init: Optional[ThetaLike] = None,
    pilot: Optional[ThetaLike] = None,
    tol: float = DEFAULT_TOL,
    with_sandwich: bool = True,
    method: Method = Method.GBEDE,
    grid_points: int = GRID_POINTS,
) -> EstimationResult:
    """Solve the GBEDE(α, β) estimating equation.

    Args:
        sample: observations
        model: parametric family
        pair: tuning parameters
        init_strategy: which start set to use
        init: extra start tried first
        pilot: precomputed L2 pilot; used as a start and as the tie anchor
        tol: root acceptance tolerance on max|F|
        with_sandwich: attach the empirical sandwich covariance
        grid_points: size of the location grid for the GRID strategy

    Raises:
        NoRootError: when no start reaches an acceptable root.
    """
    x = model.check_sample(sample)
    init_arr = as_theta(init) if init is not None else None
    pilot_arr = as_theta(pilot) if pilot is not None else None
    strategy = StartStrategy(init_strategy)
    fitting_pilot = method is Method.L2_PILOT
    starts, pilot_arr = _start_set(
        x,
        model,
        strategy,
        pilot_arr,
        init_arr,
        fitting_pilot=fitting_pilot,
        grid_points=grid_points,
    )

    def tie_anchor() -> np.ndarray:
        pilot = pilot_arr
        if pilot is None and not fitting_pilot:
            pilot = _pilot_or_none(x, model)
        return pilot if pilot is not None else model.moment_start(x)

    roots = _solve(x, model, pair, starts, tol)
    logger.debug("%s %s: %d starts, %d roots", method.value, pair, len(starts), len(roots))
    if not roots:
        raise NoRootError(
            f"no root of the {pair} estimating equation found from {len(starts)} "
            "starts; try a wider start grid",
            operation="fit_gbede",
        )

    chosen, divergences, rule = _select_root(x, model, pair, roots, tie_anchor)
    theta_hat = roots[chosen]
    residual = float(np.max(np.abs(estimating_fn(x, theta_hat, pair, model))))

    result = EstimationResult(
        theta_hat=model.parameter(theta_hat),
        pair=pair,
        method=method,
        residual_norm=residual,
        all_roots=[model.parameter(r) for r in roots],
        selected_by=rule,
        converged=residual <= tol,
        iterations=len(starts),
        divergences=divergences,
        n=x.size,
    )
    return _attach_sandwich(result, x, model) if with_sandwich else result


def fit_mle(
    sample,
    model: ParametricModel,
    init: Optional[ThetaLike] = None,
    *,
    tol: float = DEFAULT_TOL,
    with_sandwich: bool = True,
) -> EstimationResult:
    """Maximum likelihood: the root of the score equation, pair (0, 0)."""
    x = model.check_sample(sample)
    start = as_theta(init) if init is not None else model.closed_form_mle(x)
    roots = _solve(x, model, MLE_PAIR, [start], tol)
    if not roots:
        raise ConvergenceError(
            "score equation did not converge from the closed-form start",
            best_point=start,
            operation="fit_mle",
        )
    theta_hat = roots[0]
    residual = float(np.max(np.abs(estimating_fn(x, theta_hat, MLE_PAIR, model))))
    result = EstimationResult(
        theta_hat=model.parameter(theta_hat),
        pair=MLE_PAIR,
        method=Method.MLE,
        residual_norm=residual,
        all_roots=[model.parameter(theta_hat)],
        selected_by=SelectionRule.UNIQUE_ROOT,
        converged=residual <= tol,
        iterations=1,
        n=x.size,
    )
    return _attach_sandwich(result, x, model) if with_sandwich else result


def fit_l2_pilot(
    sample,
    model: ParametricModel,
    init: Optional[ThetaLike] = None,
    *,
    init_strategy: StartStrategy = StartStrategy.GRID,
    tol: float = DEFAULT_TOL,
    with_sandwich: bool = True,
) -> EstimationResult:
    """Minimum L2 distance estimator, the GBEDE(0, 1) root."""
    return fit_gbede(
        sample,
        model,
        L2_PAIR,
        init_strategy,
        init=init,
        tol=tol,
        with_sandwich=with_sandwich,
        method=Method.L2_PILOT,
    )


def fit_mdpde(
    sample,
    model: ParametricModel,
    beta: float,
    init: Optional[ThetaLike] = None,
    *,
    init_strategy: StartStrategy = StartStrategy.GRID,
    tol: float = DEFAULT_TOL,
    with_sandwich: bool = True,
    grid_points: int = GRID_POINTS,
) -> EstimationResult:
    """Minimum density power divergence estimator, the GBEDE(0, β) root."""
    return fit_gbede(
        sample,
        model,
        TuningPair(0.0, beta),
        init_strategy,
        init=init,
        tol=tol,
        with_sandwich=with_sandwich,
        method=Method.MDPDE,
        grid_points=grid_points,
    )


def fit_mbede(
    sample,
    model: ParametricModel,
    alpha: float,
    init: Optional[ThetaLike] = None,
    *,
    tol: float = DEFAULT_TOL,
    with_sandwich: bool = True,
) -> EstimationResult:
    """Minimize the empirical BED objective at ``alpha``.

    Each start (init, MLE, median-type) runs a simplex search in
    unconstrained coordinates; the lowest objective wins. The reported
    residual is that of the GBEDE(α, 1) equation at the minimizer.
    """
    if alpha == 0:
        raise DomainError("MBEDE needs alpha != 0", operation="fit_mbede")
    x = model.check_sample(sample)
    pair = TuningPair(alpha, 1.0)

    def objective(eta: np.ndarray) -> float:
        try:
            with np.errstate(all="ignore"):
                value = bed_objective(x, model, model.from_unconstrained(eta), alpha)
        except (DomainError, ArithmeticError):
            return np.inf
        return value if np.isfinite(value) else np.inf

    starts = [as_theta(init)] if init is not None else []
    starts.append(model.moment_start(x))
    try:
        starts.append(model.closed_form_mle(x))
    except DomainError:
        pass

    candidates: list[tuple[float, np.ndarray]] = []
    last_error: Optional[GbedeError] = None
    for start in starts:
        try:
            eta, value = minimize(objective, model.to_unconstrained(start), tol)
        except GbedeError as e:
            last_error = e
            continue
        theta = model.from_unconstrained(eta)
        if model.plausible(theta, x):
            candidates.append((value, theta))
    if not candidates:
        raise ConvergenceError(
            f"MBEDE objective minimization failed: {last_error or 'no plausible minimum'}",
            best_point=getattr(last_error, "best_point", None),
            operation="fit_mbede",
        )

    candidates.sort(key=lambda c: c[0])
    value, theta_hat = candidates[0]
    residual = float(np.max(np.abs(estimating_fn(x, theta_hat, pair, model))))
    if residual > MBEDE_CHECK_TOL:
        logger.debug("MBEDE minimizer leaves GBEDE(%g, 1) residual %.3g", alpha, residual)

    result = EstimationResult(
        theta_hat=model.parameter(theta_hat),
        pair=pair,
        method=Method.MBEDE,
        residual_norm=residual,
        all_roots=[model.parameter(theta_hat)],
        selected_by=SelectionRule.MIN_OBJECTIVE,
        converged=residual <= MBEDE_CHECK_TOL,
        iterations=len(starts),
        objective_value=value,
        n=x.size,
    )
    return _attach_sandwich(result, x, model) if with_sandwich else result
