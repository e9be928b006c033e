"""Contamination Monte Carlo studies.

This module provides:
1. ContaminationSpec - (1-ε)·target + ε·contaminant data-generating process
2. MCConfig - an experiment, loadable from TOML
3. run_efficiency_study - n·MSE and relative efficiency per tuning pair
4. run_root_study - how often several roots appear and which one is selected
5. poisson_expected_frequencies - fitted cell counts for count data

Every replication draws from its own counter-based stream keyed by
``seed ^ index``, so serial and parallel runs produce the same table.
"""

import hashlib
import io
import json
import logging

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Union

import numpy as np
import pandas as pd
from scipy import stats

from gbede import __version__
from gbede.divergence import TuningPair, empirical_divergence
from gbede.estimators import StartStrategy, fit_gbede, fit_mbede
from gbede.exceptions import DomainError, GbedeError
from gbede.models import ModelFamily, ParametricModel, as_theta, get_model


logger = logging.getLogger(__name__)

FAILURE_FLAG_RATE = 0.01
POISSON_CELLS = 6


# ============================================================================
# Experiment description
# ============================================================================


@dataclass(frozen=True)
class ContaminationSpec:
    """A two-component mixture from one model family.

    Attributes:
        family: model family of both components
        target: parameter of the main component
        contaminant: parameter of the contaminating component
        epsilon: contamination fraction, 0 <= ε < 1
        sigma: known σ for the normal-location family
    """

    family: ModelFamily
    target: tuple[float, ...]
    contaminant: tuple[float, ...]
    epsilon: float = 0.0
    sigma: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "family", ModelFamily(self.family))
        object.__setattr__(self, "target", tuple(float(v) for v in self.target))
        object.__setattr__(self, "contaminant", tuple(float(v) for v in self.contaminant))
        object.__setattr__(self, "epsilon", float(self.epsilon))
        if not 0.0 <= self.epsilon < 1.0:
            raise DomainError(
                f"epsilon must lie in [0, 1), got {self.epsilon}",
                operation="ContaminationSpec",
            )
        model = self.model
        model.check(self.target)
        model.check(self.contaminant)

    @property
    def model(self) -> ParametricModel:
        return get_model(self.family, self.sigma)

    def to_dict(self) -> dict:
        return {
            "family": self.family.value,
            "target": list(self.target),
            "contaminant": list(self.contaminant),
            "epsilon": self.epsilon,
            "sigma": self.sigma,
        }


@dataclass(frozen=True)
class MCConfig:
    """One Monte Carlo experiment.

    ``method`` is ``"gbede"`` (solve the estimating equation for each pair)
    or ``"mbede"`` (minimize the BED objective at each pair's α).
    ``target_param`` defaults to the target component's parameter.
    """

    spec: ContaminationSpec
    n: int
    replications: int
    seed: int
    pairs: tuple[TuningPair, ...]
    target_param: Optional[tuple[float, ...]] = None
    method: str = "gbede"
    tol: float = 1e-10

    def __post_init__(self):
        object.__setattr__(self, "pairs", tuple(self.pairs))
        if self.target_param is None:
            object.__setattr__(self, "target_param", self.spec.target)
        else:
            object.__setattr__(
                self, "target_param", tuple(float(v) for v in self.target_param)
            )
        if self.n < 2:
            raise DomainError(f"n must be at least 2, got {self.n}", operation="MCConfig")
        if self.replications < 1:
            raise DomainError(
                f"replications must be at least 1, got {self.replications}",
                operation="MCConfig",
            )
        if not 0 <= self.seed < 2**64:
            raise DomainError(
                f"seed must be a 64-bit unsigned integer, got {self.seed}",
                operation="MCConfig",
            )
        if self.method not in ("gbede", "mbede"):
            raise DomainError(
                f"method must be 'gbede' or 'mbede', got {self.method!r}",
                operation="MCConfig",
            )
        if len(self.target_param) != self.spec.model.p:
            raise DomainError(
                f"target_param has {len(self.target_param)} entries, "
                f"model has {self.spec.model.p} parameters",
                operation="MCConfig",
            )

    @classmethod
    def from_dict(cls, data: dict) -> "MCConfig":
        """Build from a mapping with a nested ``spec`` table.

        Raises:
            DomainError: on missing keys or invalid values
        """
        try:
            spec_data = dict(data["spec"])
            spec = ContaminationSpec(
                family=spec_data["family"],
                target=tuple(spec_data["target"]),
                contaminant=tuple(spec_data.get("contaminant", spec_data["target"])),
                epsilon=spec_data.get("epsilon", 0.0),
                sigma=spec_data.get("sigma", 1.0),
            )
            pairs = tuple(TuningPair(a, b) for a, b in data.get("pairs", []))
            target_param = data.get("target_param")
            return cls(
                spec=spec,
                n=int(data["n"]),
                replications=int(data["replications"]),
                seed=int(data["seed"]),
                pairs=pairs,
                target_param=tuple(target_param) if target_param is not None else None,
                method=data.get("method", "gbede"),
                tol=float(data.get("tol", 1e-10)),
            )
        except (KeyError, TypeError, ValueError) as e:
            if isinstance(e, GbedeError):
                raise
            raise DomainError(f"invalid experiment config: {e!r}", operation="MCConfig")

    @classmethod
    def from_toml(cls, path: Union[str, Path]) -> "MCConfig":
        try:
            with open(path, "rb") as f:
                data = tomllib.load(f)
        except (OSError, tomllib.TOMLDecodeError) as e:
            raise DomainError(f"cannot read {path}: {e}", operation="MCConfig")
        return cls.from_dict(data)

    def to_dict(self) -> dict:
        return {
            "spec": self.spec.to_dict(),
            "n": self.n,
            "replications": self.replications,
            "seed": self.seed,
            "pairs": [[p.alpha, p.beta] for p in self.pairs],
            "target_param": list(self.target_param),
            "method": self.method,
            "tol": self.tol,
        }

    def config_hash(self) -> str:
        canonical = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]


# ============================================================================
# Random generation
# ============================================================================


def replication_rng(seed: int, index: int) -> np.random.Generator:
    """Philox stream for replication ``index``."""
    return np.random.Generator(np.random.Philox(key=seed ^ index))


def generate_sample(
    spec: ContaminationSpec, n: int, rng: np.random.Generator
) -> np.ndarray:
    """Draw n observations, each from the contaminant with probability ε."""
    model = spec.model
    contaminated = rng.random(n) < spec.epsilon
    values = model.draw(rng, spec.target, n)
    k = int(np.count_nonzero(contaminated))
    if k:
        values[contaminated] = model.draw(rng, spec.contaminant, k)
    return values


def metadata_header(seed: Optional[int], config_hash: str) -> str:
    seed_text = "none" if seed is None else str(seed)
    return f"# seed={seed_text}, version={__version__}, config_hash={config_hash}\n"


# ============================================================================
# Efficiency study
# ============================================================================


@dataclass(frozen=True)
class EfficiencyRow:
    """n·MSE of one estimator for one parameter component."""

    estimator: str
    alpha: Optional[float]
    beta: Optional[float]
    component: str
    n_mse: float
    relative_efficiency: float
    failures: int
    flagged: bool


@dataclass
class EfficiencyTable:
    """Result of ``run_efficiency_study``."""

    config: MCConfig
    rows: list[EfficiencyRow] = field(default_factory=list)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame([row.__dict__ for row in self.rows])

    def row(self, estimator: str, component: Optional[str] = None) -> EfficiencyRow:
        for row in self.rows:
            if row.estimator == estimator and (component is None or row.component == component):
                return row
        raise KeyError(estimator)

    def to_csv(self, path: Optional[Union[str, Path]] = None) -> str:
        """CSV text with a ``#`` metadata line; also written to ``path`` if given."""
        buffer = io.StringIO()
        buffer.write(metadata_header(self.config.seed, self.config.config_hash()))
        self.to_frame().to_csv(buffer, index=False, float_format="%.6f", lineterminator="\n")
        text = buffer.getvalue()
        if path is not None:
            Path(path).write_text(text, encoding="utf-8")
        return text


def _fit_pair(sample: np.ndarray, config: MCConfig, pair: TuningPair) -> np.ndarray:
    model = config.spec.model
    if config.method == "mbede" and pair.alpha != 0:
        fit = fit_mbede(sample, model, pair.alpha, tol=config.tol, with_sandwich=False)
    else:
        fit = fit_gbede(
            sample, model, pair, StartStrategy.BASIC, tol=config.tol, with_sandwich=False
        )
    return fit.theta_hat.as_array()


def _replicate(config: MCConfig, index: int) -> list[Optional[np.ndarray]]:
    """Estimates for one replication: MLE first, then each pair in order."""
    rng = replication_rng(config.seed, index)
    sample = generate_sample(config.spec, config.n, rng)
    model = config.spec.model

    estimates: list[Optional[np.ndarray]] = []
    try:
        estimates.append(model.closed_form_mle(sample))
    except GbedeError as e:
        logger.debug("replication %d: MLE failed: %s", index, e)
        estimates.append(None)
    for pair in config.pairs:
        try:
            estimates.append(_fit_pair(sample, config, pair))
        except GbedeError as e:
            logger.debug("replication %d: %s failed: %s", index, pair, e)
            estimates.append(None)
    return estimates


def _replicate_star(args: tuple[MCConfig, int]) -> list[Optional[np.ndarray]]:
    return _replicate(*args)


def _run_replications(config: MCConfig, workers: int) -> list[list[Optional[np.ndarray]]]:
    jobs = [(config, i) for i in range(config.replications)]
    if workers <= 1:
        return [_replicate_star(job) for job in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_replicate_star, jobs, chunksize=max(1, len(jobs) // (4 * workers))))


def run_efficiency_study(config: MCConfig, workers: int = 1) -> EfficiencyTable:
    """n·MSE against ``target_param`` for the MLE and every configured pair.

    Relative efficiency is MSE(MLE)/MSE(estimator), per component. Failed
    fits are left out of the MSE and counted; more than 1% failures flags
    the row.
    """
    model = config.spec.model
    target = np.asarray(config.target_param, dtype=float)
    logger.debug(
        "efficiency study: %d replications, n=%d, %d pairs, %d workers",
        config.replications,
        config.n,
        len(config.pairs),
        workers,
    )
    results = _run_replications(config, workers)

    labels: list[tuple[str, Optional[TuningPair]]] = [("MLE", None)]
    labels += [(str(pair), pair) for pair in config.pairs]

    n_mse = []
    failures = []
    for column in range(len(labels)):
        fits = [r[column] for r in results if r[column] is not None]
        failures.append(config.replications - len(fits))
        if fits:
            errors = np.vstack(fits) - target
            n_mse.append(config.n * np.mean(errors**2, axis=0))
        else:
            n_mse.append(np.full(model.p, np.nan))

    table = EfficiencyTable(config)
    for column, (label, pair) in enumerate(labels):
        for j, name in enumerate(model.param_names):
            mse = n_mse[column][j]
            table.rows.append(
                EfficiencyRow(
                    estimator=label,
                    alpha=pair.alpha if pair is not None else 0.0,
                    beta=pair.beta if pair is not None else 0.0,
                    component=name,
                    n_mse=float(mse),
                    relative_efficiency=float(n_mse[0][j] / mse) if mse > 0 else np.nan,
                    failures=failures[column],
                    flagged=failures[column] > FAILURE_FLAG_RATE * config.replications,
                )
            )
    for label, count in zip((lbl for lbl, _ in labels), failures):
        if count:
            logger.debug("%s: %d of %d replications failed", label, count, config.replications)
    return table


# ============================================================================
# Root-selection study
# ============================================================================


@dataclass
class RootStudy:
    """How the multiple-root case behaves over repeated samples.

    Attributes:
        replications: samples drawn
        root_counts: number of roots found in each replication
        multi_root_fraction: share of replications with ``expected_roots`` roots
        mean_roots: mean location of each root, by rank, over those replications
        mean_divergences: mean empirical divergence of each root, by rank
        selected_nearest_fraction: share of those replications where the
            selected root is the one nearest the target location
        selected_distances: |selected - target| for every replication that fitted
        failures: replications with no root at all
    """

    replications: int
    root_counts: list[int]
    multi_root_fraction: float
    mean_roots: list[float]
    mean_divergences: list[float]
    selected_nearest_fraction: float
    selected_distances: list[float]
    failures: int

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {
                "rank": list(range(1, len(self.mean_roots) + 1)),
                "mean_root": self.mean_roots,
                "mean_empirical_divergence": self.mean_divergences,
            }
        )


def run_root_study(
    spec: ContaminationSpec,
    n: int,
    replications: int,
    seed: int,
    pair: TuningPair,
    model: Optional[ParametricModel] = None,
    expected_roots: int = 3,
) -> RootStudy:
    """Fit every replication with the full start grid and tally the roots.

    Roots are ranked by their first coordinate. Only the first parameter
    component is tracked.
    """
    model = model or spec.model
    target = float(spec.target[0])
    counts: list[int] = []
    ranked_roots: list[list[float]] = []
    ranked_divs: list[list[float]] = []
    nearest_hits = 0
    distances: list[float] = []
    failures = 0

    for index in range(replications):
        sample = generate_sample(spec, n, replication_rng(seed, index))
        try:
            fit = fit_gbede(sample, model, pair, StartStrategy.GRID, with_sandwich=False)
        except GbedeError as e:
            logger.debug("root study replication %d failed: %s", index, e)
            failures += 1
            counts.append(0)
            continue

        roots = np.array([r[0] for r in fit.all_roots])
        selected = fit.theta_hat[0]
        counts.append(roots.size)
        distances.append(abs(selected - target))
        if roots.size != expected_roots:
            continue
        order = np.argsort(roots)
        ranked_roots.append(roots[order].tolist())
        ranked_divs.append(
            [
                empirical_divergence(sample, as_theta(fit.all_roots[i]), pair, model)
                for i in order
            ]
        )
        nearest = roots[np.argmin(np.abs(roots - target))]
        if nearest == selected:
            nearest_hits += 1

    multi = len(ranked_roots)
    return RootStudy(
        replications=replications,
        root_counts=counts,
        multi_root_fraction=multi / replications,
        mean_roots=np.mean(ranked_roots, axis=0).tolist() if multi else [],
        mean_divergences=np.mean(ranked_divs, axis=0).tolist() if multi else [],
        selected_nearest_fraction=nearest_hits / multi if multi else float("nan"),
        selected_distances=distances,
        failures=failures,
    )


# ============================================================================
# Expected frequencies
# ============================================================================


def poisson_expected_frequencies(
    lam: float, n: int, cells: int = POISSON_CELLS
) -> np.ndarray:
    """n·pmf(k) for k < cells - 1 and the remainder in the last cell.

    The last cell is n minus the others, so the vector sums to n.
    """
    if not lam >= 0:
        raise DomainError(
            f"lambda must be non-negative, got {lam}",
            operation="poisson_expected_frequencies",
        )
    if cells < 2:
        raise DomainError(
            f"need at least two cells, got {cells}",
            operation="poisson_expected_frequencies",
        )
    head = n * stats.poisson.pmf(np.arange(cells - 1), lam)
    return np.append(head, max(n - float(np.sum(head)), 0.0))
