"""Numerical kernel: quadrature, series, special functions, solvers, matrices.

Everything here is a pure function of its inputs. Model integrals on the hot
path use fixed Gauss-Legendre rules (see ``gauss_legendre``); ``integrate`` is
the general-purpose adaptive routine used for diagnostics and tests.
"""

import logging
import math
from collections.abc import Callable, Sequence
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from typing import Optional

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy import integrate as sp_integrate
from scipy import optimize, special

from gbede.exceptions import (
    ConvergenceError,
    DomainError,
    QuadratureError,
    SingularMatrixError,
)


logger = logging.getLogger(__name__)

ROOT_DEDUP_TOL = 1e-6
DISCRETE_SUM_CAP = 10**6
DISCRETE_STOP_RUN = 50

# QUADPACK ier codes that mean the result cannot be trusted
_QUAD_FATAL = {1: "maximum subdivisions reached", 3: "bad integrand", 5: "divergent"}


class SupportKind(str, Enum):
    """Kind of domain an integral or sum runs over."""

    CONTINUOUS = "continuous-interval"
    INTEGERS = "nonnegative-integers"


@dataclass(frozen=True)
class SupportSpec:
    """Integration domain of a model."""

    kind: SupportKind
    lower: float
    upper: float

    def __post_init__(self):
        if not self.lower < self.upper:
            raise DomainError(
                f"support lower bound {self.lower} must be below {self.upper}",
                operation="SupportSpec",
            )
        if self.kind is SupportKind.INTEGERS:
            for bound in (self.lower, self.upper):
                if math.isfinite(bound) and bound != int(bound):
                    raise DomainError(
                        f"integer support has non-integer bound {bound}",
                        operation="SupportSpec",
                    )

    @classmethod
    def real_line(cls) -> "SupportSpec":
        return cls(SupportKind.CONTINUOUS, -math.inf, math.inf)

    @classmethod
    def nonnegative_integers(cls) -> "SupportSpec":
        return cls(SupportKind.INTEGERS, 0, math.inf)


@dataclass(frozen=True)
class QuadResult:
    """Value of an integral or sum with its error estimate."""

    value: float
    abs_error_estimate: float
    evaluations: int


def integrate(
    f: Callable[[float], float],
    support: SupportSpec,
    tol: float = 1e-10,
    limit: int = 200,
) -> QuadResult:
    """Integrate ``f`` over ``support`` to absolute/relative tolerance ``tol``.

    Continuous supports go through QUADPACK (infinite ends are mapped onto a
    finite interval); integer supports are delegated to ``sum_discrete``.

    Raises:
        QuadratureError: if the adaptive scheme gives up; the exception
            carries the best estimate reached.
    """
    if tol <= 0:
        raise DomainError("tolerance must be positive", operation="integrate")
    if support.kind is SupportKind.INTEGERS:
        return sum_discrete(f, support, tol)

    result = sp_integrate.quad(
        f,
        support.lower,
        support.upper,
        epsabs=tol,
        epsrel=tol,
        limit=limit,
        full_output=1,
    )
    value, abserr, info = result[0], result[1], result[2]
    evaluations = int(info.get("neval", 1))

    if len(result) > 3:
        ier = _ier_from_message(result[3])
        if ier in _QUAD_FATAL or not math.isfinite(value):
            raise QuadratureError(
                f"quadrature failed ({_QUAD_FATAL.get(ier, result[3])})",
                best_estimate=value,
                operation="integrate",
            )
        logger.debug("quad accepted with warning: %s", result[3])

    if not math.isfinite(abserr):
        raise QuadratureError(
            "quadrature error estimate is not finite",
            best_estimate=value,
            operation="integrate",
        )
    return QuadResult(
        value=float(value),
        abs_error_estimate=float(abserr),
        evaluations=max(evaluations, 1),
    )


def _ier_from_message(message: str) -> int:
    text = str(message).lower()
    if "maximum number of subdivisions" in text:
        return 1
    if "divergent" in text:
        return 5
    if "bad integrand" in text or "extremely bad" in text:
        return 3
    return 2


def sum_discrete(
    f: Callable[[int], float],
    support: SupportSpec,
    tol: float = 1e-12,
    cap: int = DISCRETE_SUM_CAP,
) -> QuadResult:
    """Sum ``f(k)`` over an integer support until the tail is negligible.

    Stops after ``DISCRETE_STOP_RUN`` consecutive terms each below
    ``tol * |partial sum|``. The returned ``evaluations`` is the truncation
    index.
    """
    if tol <= 0:
        raise DomainError("tolerance must be positive", operation="sum_discrete")
    k = int(support.lower)
    upper = support.upper
    terms: list[float] = []
    partial = 0.0
    run = 0
    tail = 0.0
    while k <= upper:
        if k - int(support.lower) >= cap:
            raise QuadratureError(
                f"series shows no decay within {cap} terms",
                best_estimate=math.fsum(terms),
                operation="sum_discrete",
            )
        term = float(f(k))
        if not math.isfinite(term):
            raise QuadratureError(
                f"non-finite term at k={k}",
                best_estimate=math.fsum(terms),
                operation="sum_discrete",
            )
        terms.append(term)
        partial += term
        if abs(term) < tol * abs(partial):
            run += 1
            tail += abs(term)
            if run >= DISCRETE_STOP_RUN:
                break
        else:
            run = 0
            tail = 0.0
        k += 1

    return QuadResult(
        value=math.fsum(terms), abs_error_estimate=tail, evaluations=max(k, 1)
    )


@lru_cache(maxsize=8)
def gauss_legendre(n_nodes: int = 256) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes and weights on [-1, 1]."""
    nodes, weights = leggauss(n_nodes)
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return nodes, weights


def fixed_nodes(
    lower: float, upper: float, n_nodes: int = 256
) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre rule mapped onto [lower, upper]."""
    nodes, weights = gauss_legendre(n_nodes)
    half = 0.5 * (upper - lower)
    return lower + half * (nodes + 1.0), half * weights


def upper_incomplete_gamma(a: float, y):
    """Upper incomplete gamma function Γ(a, y) = ∫_y^∞ t^{a-1} e^{-t} dt.

    Vectorized over ``y``.

    Raises:
        DomainError: if ``a <= 0`` or any ``y < 0``.
    """
    if not a > 0:
        raise DomainError(
            f"incomplete gamma needs a > 0, got {a}",
            operation="upper_incomplete_gamma",
        )
    y_arr = np.asarray(y, dtype=float)
    if np.any(y_arr < 0):
        raise DomainError(
            "incomplete gamma needs y >= 0", operation="upper_incomplete_gamma"
        )
    value = special.gammaincc(a, y_arr) * special.gamma(a)
    return float(value) if np.ndim(value) == 0 else value


def _newton_polish(
    F: Callable[[np.ndarray], np.ndarray],
    x: np.ndarray,
    tol: float,
    max_iter: int = 20,
    max_halvings: int = 30,
) -> np.ndarray:
    """Damped Newton steps with a finite-difference Jacobian."""
    fx = np.asarray(F(x), dtype=float)
    for _ in range(max_iter):
        norm = np.max(np.abs(fx))
        if not np.isfinite(norm) or norm <= tol:
            break
        try:
            step = np.linalg.solve(finite_diff_jacobian(F, x), fx)
        except np.linalg.LinAlgError:
            break
        scale = 1.0
        for _ in range(max_halvings):
            candidate = x - scale * step
            f_candidate = np.asarray(F(candidate), dtype=float)
            if np.all(np.isfinite(f_candidate)) and np.max(np.abs(f_candidate)) < norm:
                x, fx = candidate, f_candidate
                break
            scale *= 0.5
        else:
            break
    return x


def solve_multistart(
    F: Callable[[np.ndarray], np.ndarray],
    starts: Sequence[Sequence[float]],
    tol: float = 1e-10,
    accept: Optional[Callable[[np.ndarray], bool]] = None,
) -> list[np.ndarray]:
    """Find the distinct roots of ``F`` reachable from ``starts``.

    Each start runs MINPACK's hybrid Powell method followed by damped Newton
    polishing. A candidate is kept only if ``max|F| <= tol`` on re-evaluation
    and ``accept`` (when given) approves it. Roots closer than
    ``ROOT_DEDUP_TOL`` in the sup norm are merged, first one wins.
    """
    if len(starts) == 0:
        raise DomainError("at least one start is required", operation="solve_multistart")

    roots: list[np.ndarray] = []
    with np.errstate(all="ignore"):
        for index, start in enumerate(starts):
            x0 = np.atleast_1d(np.asarray(start, dtype=float))
            try:
                solution = optimize.root(
                    lambda x: np.atleast_1d(F(x)), x0, method="hybr", options={"xtol": 1e-13}
                )
                x = _newton_polish(F, np.atleast_1d(solution.x), tol)
                residual = np.max(np.abs(np.atleast_1d(F(x))))
            except (ArithmeticError, ValueError, np.linalg.LinAlgError) as e:
                logger.debug("start %d failed: %s", index, e)
                continue
            if not (np.all(np.isfinite(x)) and np.isfinite(residual)) or residual > tol:
                logger.debug("start %d stopped at residual %.3g", index, residual)
                continue
            if accept is not None and not accept(x):
                logger.debug("start %d root %s rejected", index, x)
                continue
            if any(np.max(np.abs(x - r)) <= ROOT_DEDUP_TOL for r in roots):
                continue
            roots.append(x)
    return roots


def minimize(
    f: Callable[[np.ndarray], float],
    start: Sequence[float],
    tol: float = 1e-10,
    max_iter: Optional[int] = None,
) -> tuple[np.ndarray, float]:
    """Derivative-free Nelder-Mead minimization.

    Terminates when the simplex diameter drops below ``tol``.

    Raises:
        ConvergenceError: on hitting the iteration cap, carrying the best point.
    """
    x0 = np.atleast_1d(np.asarray(start, dtype=float))
    if not np.isfinite(f(x0)):
        raise DomainError("objective is not finite at the start", operation="minimize")
    max_iter = max_iter or 2000 * x0.size
    result = optimize.minimize(
        f,
        x0,
        method="Nelder-Mead",
        options={
            "xatol": tol,
            "fatol": np.inf,
            "maxiter": max_iter,
            "maxfev": 2 * max_iter,
        },
    )
    if not result.success:
        raise ConvergenceError(
            f"simplex search did not converge: {result.message}",
            best_point=result.x,
            iterations=int(result.nit),
            operation="minimize",
        )
    return result.x, float(result.fun)


def finite_diff_jacobian(
    F: Callable[[np.ndarray], np.ndarray], x: Sequence[float], h: float = 1e-6
) -> np.ndarray:
    """Central-difference Jacobian with step ``h * max(1, |x_i|)``."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    columns = []
    for i in range(x.size):
        step = h * max(1.0, abs(x[i]))
        forward, backward = x.copy(), x.copy()
        forward[i] += step
        backward[i] -= step
        columns.append(
            (np.atleast_1d(F(forward)) - np.atleast_1d(F(backward))) / (2.0 * step)
        )
    return np.column_stack(columns)


def matrix_inverse(A, name: str = "matrix") -> np.ndarray:
    """Inverse of a square matrix.

    Raises:
        SingularMatrixError: naming ``name`` when A is (numerically) singular.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if A.shape[0] != A.shape[1]:
        raise DomainError(f"{name} is not square", operation="matrix_inverse")
    if not np.all(np.isfinite(A)) or np.linalg.cond(A) > 1e14:
        raise SingularMatrixError(
            f"{name} is singular", matrix_name=name, operation="matrix_inverse"
        )
    try:
        return np.linalg.inv(A)
    except np.linalg.LinAlgError:
        raise SingularMatrixError(
            f"{name} is singular", matrix_name=name, operation="matrix_inverse"
        )


def matrix_trace(A) -> float:
    return float(np.trace(np.atleast_2d(A)))


def sym_inv_sqrt(A, name: str = "matrix") -> np.ndarray:
    """Inverse symmetric square root of a positive definite matrix."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if not np.allclose(A, A.T, rtol=1e-10, atol=1e-12 * np.max(np.abs(A))):
        raise DomainError(f"{name} is not symmetric", operation="sym_inv_sqrt")
    eigenvalues, eigenvectors = np.linalg.eigh(0.5 * (A + A.T))
    if eigenvalues[0] <= 1e-14 * max(eigenvalues[-1], 0.0):
        raise SingularMatrixError(
            f"{name} is not positive definite",
            matrix_name=name,
            operation="sym_inv_sqrt",
        )
    return (eigenvectors / np.sqrt(eigenvalues)) @ eigenvectors.T
