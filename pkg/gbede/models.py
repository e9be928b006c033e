"""Parametric model families: density, score, information and support.

The normal model is parameterized by (μ, σ). Every model also knows how to
map its parameter onto an unconstrained vector for the solvers, where to put
quadrature nodes, and which roots of an estimating equation are plausible
for a given sample.
"""

import math
from abc import ABC, abstractmethod
from collections.abc import Sequence
from dataclasses import dataclass
from enum import Enum
from typing import Union

import numpy as np
from scipy import special

from gbede.exceptions import DomainError
from gbede.numerics import SupportSpec, fixed_nodes


NORMAL_HALF_WIDTH = 9.0
MAD_SCALE = 1.4826
GRID_POINTS = 9
# a root with no observation this many sds away sits on a flat tail
NEAREST_POINT_SDS = 6.0


@dataclass(frozen=True)
class ParamVector:
    """A parameter value with component labels."""

    values: tuple[float, ...]
    names: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        object.__setattr__(self, "names", tuple(self.names))
        if len(self.values) != len(self.names):
            raise DomainError(
                f"{len(self.values)} values for {len(self.names)} names",
                operation="ParamVector",
            )
        if not all(math.isfinite(v) for v in self.values):
            raise DomainError(
                f"parameter has non-finite entries: {self.values}",
                operation="ParamVector",
            )

    def __len__(self) -> int:
        return len(self.values)

    def __getitem__(self, key: Union[int, str]) -> float:
        if isinstance(key, str):
            return self.values[self.names.index(key)]
        return self.values[key]

    def as_array(self) -> np.ndarray:
        return np.array(self.values, dtype=float)

    def to_dict(self) -> dict[str, float]:
        return dict(zip(self.names, self.values))


ThetaLike = Union[ParamVector, Sequence[float], np.ndarray, float]


def as_theta(theta: ThetaLike) -> np.ndarray:
    """Coerce a parameter value to a 1-d float array."""
    if isinstance(theta, ParamVector):
        return theta.as_array()
    return np.atleast_1d(np.asarray(theta, dtype=float))


class ParametricModel(ABC):
    """A univariate parametric family f_θ."""

    name: str
    param_names: tuple[str, ...]
    support: SupportSpec

    @property
    def p(self) -> int:
        return len(self.param_names)

    def parameter(self, theta: ThetaLike) -> ParamVector:
        return ParamVector(tuple(as_theta(theta)), self.param_names)

    @abstractmethod
    def feasible(self, theta: np.ndarray) -> bool:
        """Whether θ lies in the parameter space."""

    def check(self, theta: ThetaLike) -> np.ndarray:
        values = as_theta(theta)
        if values.size != self.p or not np.all(np.isfinite(values)):
            raise DomainError(
                f"{self.name} expects {self.p} finite parameters, got {values}",
                operation="check",
            )
        if not self.feasible(values):
            raise DomainError(
                f"infeasible {self.name} parameter {values}", operation="check"
            )
        return values

    @abstractmethod
    def log_density(self, x, theta: ThetaLike) -> np.ndarray: ...

    def density(self, x, theta: ThetaLike) -> np.ndarray:
        return np.exp(self.log_density(x, theta))

    @abstractmethod
    def score(self, x, theta: ThetaLike) -> np.ndarray:
        """∂ log f / ∂θ, shape ``x.shape + (p,)``."""

    @abstractmethod
    def information(self, x, theta: ThetaLike) -> np.ndarray:
        """-∂ score / ∂θ, shape ``x.shape + (p, p)``."""

    @abstractmethod
    def nodes(self, theta: ThetaLike) -> tuple[np.ndarray, np.ndarray]:
        """Points and weights with Σ w h(x) ≈ ∫ h dx for density-weighted h."""

    @abstractmethod
    def to_unconstrained(self, theta: ThetaLike) -> np.ndarray: ...

    @abstractmethod
    def from_unconstrained(self, eta) -> np.ndarray: ...

    def check_sample(self, sample) -> np.ndarray:
        x = np.asarray(sample, dtype=float).ravel()
        if x.size == 0:
            raise DomainError("sample is empty", operation="check_sample")
        if not np.all(np.isfinite(x)):
            raise DomainError("sample has non-finite values", operation="check_sample")
        return x

    @abstractmethod
    def closed_form_mle(self, sample: np.ndarray) -> np.ndarray: ...

    @abstractmethod
    def moment_start(self, sample: np.ndarray) -> np.ndarray:
        """Robust starting value from median-type statistics."""

    @abstractmethod
    def grid_starts(self, sample: np.ndarray, points: int = GRID_POINTS) -> list[np.ndarray]:
        """Starts spanning the data range in the location coordinate."""

    @abstractmethod
    def plausible(self, theta: np.ndarray, sample: np.ndarray) -> bool:
        """Rejects plateau solutions far outside the data."""

    @abstractmethod
    def draw(self, rng: np.random.Generator, theta: ThetaLike, size: int) -> np.ndarray: ...

    def __repr__(self) -> str:
        return f"{type(self).__name__}()"


def _shape_out(x, values: np.ndarray) -> np.ndarray:
    return values[0] if np.ndim(x) == 0 else values


def _data_span(sample: np.ndarray) -> tuple[float, float, float]:
    lo, hi = float(np.min(sample)), float(np.max(sample))
    span = max(hi - lo, float(np.std(sample)), 1e-8 * max(1.0, abs(hi)))
    return lo, hi, span


class NormalModel(ParametricModel):
    """N(μ, σ²) with both parameters free."""

    name = "normal"
    param_names = ("mu", "sigma")
    support = SupportSpec.real_line()

    def feasible(self, theta):
        return bool(theta[1] > 0)

    def _z(self, x, theta):
        mu, sigma = self.check(theta)
        return (np.atleast_1d(np.asarray(x, dtype=float)) - mu) / sigma, sigma

    def log_density(self, x, theta):
        z, sigma = self._z(x, theta)
        return _shape_out(x, -0.5 * z**2 - math.log(sigma) - 0.5 * math.log(2 * math.pi))

    def score(self, x, theta):
        z, sigma = self._z(x, theta)
        return _shape_out(x, np.stack([z / sigma, (z**2 - 1.0) / sigma], axis=-1))

    def information(self, x, theta):
        z, sigma = self._z(x, theta)
        s2 = sigma**2
        out = np.empty(z.shape + (2, 2))
        out[..., 0, 0] = 1.0 / s2
        out[..., 0, 1] = out[..., 1, 0] = 2.0 * z / s2
        out[..., 1, 1] = (3.0 * z**2 - 1.0) / s2
        return _shape_out(x, out)

    def nodes(self, theta):
        mu, sigma = self.check(theta)
        z, w = fixed_nodes(-NORMAL_HALF_WIDTH, NORMAL_HALF_WIDTH)
        return mu + sigma * z, sigma * w

    def to_unconstrained(self, theta):
        mu, sigma = self.check(theta)
        return np.array([mu, math.log(sigma)])

    def from_unconstrained(self, eta):
        eta = as_theta(eta)
        return np.array([eta[0], math.exp(eta[1])])

    def closed_form_mle(self, sample):
        sd = float(np.std(sample))
        if sd <= 0:
            raise DomainError(
                "all observations are equal; sigma would be zero",
                operation="closed_form_mle",
            )
        return np.array([float(np.mean(sample)), sd])

    def moment_start(self, sample):
        median = float(np.median(sample))
        scale = MAD_SCALE * float(np.median(np.abs(sample - median)))
        if scale <= 0:
            scale = float(np.std(sample))
        if scale <= 0:
            raise DomainError(
                "all observations are equal; sigma would be zero",
                operation="moment_start",
            )
        return np.array([median, scale])

    def grid_starts(self, sample, points=GRID_POINTS):
        scale = self.moment_start(sample)[1]
        lo, hi = float(np.min(sample)), float(np.max(sample))
        return [np.array([g, scale]) for g in np.linspace(lo, hi, points)]

    def plausible(self, theta, sample):
        lo, hi, span = _data_span(sample)
        mu, sigma = theta
        if not (lo - span <= mu <= hi + span and 1e-8 * span < sigma <= 10.0 * span):
            return False
        return bool(np.min(np.abs(sample - mu)) <= NEAREST_POINT_SDS * sigma)

    def draw(self, rng, theta, size):
        mu, sigma = self.check(theta)
        return rng.normal(mu, sigma, size)


class NormalLocationModel(ParametricModel):
    """N(μ, σ²) with σ known."""

    name = "normal-location"
    param_names = ("mu",)
    support = SupportSpec.real_line()

    def __init__(self, sigma: float = 1.0):
        if not sigma > 0:
            raise DomainError(
                f"sigma must be positive, got {sigma}",
                operation="normal_location_model",
            )
        self.sigma = float(sigma)

    def feasible(self, theta):
        return True

    def _z(self, x, theta):
        (mu,) = self.check(theta)
        return (np.atleast_1d(np.asarray(x, dtype=float)) - mu) / self.sigma

    def log_density(self, x, theta):
        z = self._z(x, theta)
        return _shape_out(
            x, -0.5 * z**2 - math.log(self.sigma) - 0.5 * math.log(2 * math.pi)
        )

    def score(self, x, theta):
        z = self._z(x, theta)
        return _shape_out(x, (z / self.sigma)[..., np.newaxis])

    def information(self, x, theta):
        z = self._z(x, theta)
        return _shape_out(x, np.full(z.shape + (1, 1), 1.0 / self.sigma**2))

    def nodes(self, theta):
        (mu,) = self.check(theta)
        z, w = fixed_nodes(-NORMAL_HALF_WIDTH, NORMAL_HALF_WIDTH)
        return mu + self.sigma * z, self.sigma * w

    def to_unconstrained(self, theta):
        return self.check(theta).copy()

    def from_unconstrained(self, eta):
        return as_theta(eta).copy()

    def closed_form_mle(self, sample):
        return np.array([float(np.mean(sample))])

    def moment_start(self, sample):
        return np.array([float(np.median(sample))])

    def grid_starts(self, sample, points=GRID_POINTS):
        lo, hi = float(np.min(sample)), float(np.max(sample))
        return [np.array([g]) for g in np.linspace(lo, hi, points)]

    def plausible(self, theta, sample):
        lo, hi, span = _data_span(sample)
        span = max(span, self.sigma)
        if not lo - span <= theta[0] <= hi + span:
            return False
        return bool(np.min(np.abs(sample - theta[0])) <= NEAREST_POINT_SDS * self.sigma)

    def draw(self, rng, theta, size):
        (mu,) = self.check(theta)
        return rng.normal(mu, self.sigma, size)

    def __repr__(self) -> str:
        return f"NormalLocationModel(sigma={self.sigma})"


class PoissonModel(ParametricModel):
    """Poisson(λ); pmf values play the role of the density."""

    name = "poisson"
    param_names = ("lambda",)
    support = SupportSpec.nonnegative_integers()

    def feasible(self, theta):
        return bool(theta[0] > 0)

    def log_density(self, x, theta):
        (lam,) = self.check(theta)
        k = np.atleast_1d(np.asarray(x, dtype=float))
        return _shape_out(x, k * math.log(lam) - lam - special.gammaln(k + 1.0))

    def score(self, x, theta):
        (lam,) = self.check(theta)
        k = np.atleast_1d(np.asarray(x, dtype=float))
        return _shape_out(x, (k / lam - 1.0)[..., np.newaxis])

    def information(self, x, theta):
        (lam,) = self.check(theta)
        k = np.atleast_1d(np.asarray(x, dtype=float))
        return _shape_out(x, (k / lam**2)[..., np.newaxis, np.newaxis])

    def nodes(self, theta):
        (lam,) = self.check(theta)
        k_max = math.ceil(lam + 10.0 * math.sqrt(lam) + 20.0)
        k = np.arange(k_max + 1, dtype=float)
        return k, np.ones_like(k)

    def to_unconstrained(self, theta):
        (lam,) = self.check(theta)
        return np.array([math.log(lam)])

    def from_unconstrained(self, eta):
        return np.array([math.exp(as_theta(eta)[0])])

    def check_sample(self, sample):
        x = super().check_sample(sample)
        if np.any(x < 0) or np.any(x != np.round(x)):
            raise DomainError(
                "Poisson data must be non-negative integers", operation="check_sample"
            )
        return x

    def closed_form_mle(self, sample):
        mean = float(np.mean(sample))
        if mean <= 0:
            raise DomainError(
                "all counts are zero; lambda would be zero",
                operation="closed_form_mle",
            )
        return np.array([mean])

    def moment_start(self, sample):
        return np.array([max(float(np.median(sample)), 0.1)])

    def grid_starts(self, sample, points=GRID_POINTS):
        lo, hi = float(np.min(sample)), float(np.max(sample))
        return [np.array([max(g, 0.1)]) for g in np.linspace(lo, hi, points)]

    def plausible(self, theta, sample):
        return bool(1e-8 < theta[0] <= 2.0 * float(np.max(sample)) + 10.0)

    def draw(self, rng, theta, size):
        (lam,) = self.check(theta)
        return rng.poisson(lam, size).astype(float)


class ModelFamily(str, Enum):
    """Names accepted wherever a model is chosen by string."""

    NORMAL = "normal"
    NORMAL_LOCATION = "normal-location"
    POISSON = "poisson"


def normal_model() -> NormalModel:
    return NormalModel()


def normal_location_model(sigma: float = 1.0) -> NormalLocationModel:
    return NormalLocationModel(sigma)


def poisson_model() -> PoissonModel:
    return PoissonModel()


def get_model(family: Union[ModelFamily, str], sigma: float = 1.0) -> ParametricModel:
    """Build a model from its family name."""
    try:
        family = ModelFamily(family)
    except ValueError:
        valid = ", ".join(m.value for m in ModelFamily)
        raise DomainError(
            f"unknown model {family!r}; expected one of: {valid}",
            operation="get_model",
        )
    if family is ModelFamily.NORMAL:
        return normal_model()
    if family is ModelFamily.NORMAL_LOCATION:
        return normal_location_model(sigma)
    return poisson_model()


def fisher_information(model: ParametricModel, theta: ThetaLike) -> np.ndarray:
    """E_θ[u uᵀ] by quadrature over the model's nodes.

    Uses the same node rule as ``model_JK`` so that J, K and the Fisher bound
    in ``are`` share one discretisation and their ratio is exact at (0, 0).
    """
    x, w = model.nodes(theta)
    f = model.density(x, theta)
    u = model.score(x, theta)
    return (u.T * (w * f)) @ u
