#!/usr/bin/env python3
"""Command-line interface for gbede."""

import math
from collections.abc import Iterator
from contextlib import contextmanager
from enum import Enum
from pathlib import Path
from typing import Optional

import click
import numpy as np
import pandas as pd
import typer
from rich.console import Console

from gbede import config as settings
from gbede.asymptotics import are, influence_function, optimal_alpha, score_weights
from gbede.divergence import TuningPair
from gbede.estimators import fit_gbede, fit_l2_pilot, fit_mbede, fit_mdpde, fit_mle
from gbede.exceptions import GbedeError
from gbede.formatter import (
    format_error,
    format_fit,
    format_frame,
    format_regression,
    format_roots,
    format_success_message,
    format_tuning_surface,
    frame_to_csv,
    setup_logging,
    surface_frame,
    to_json,
)
from gbede.helpers.datasets import Dataset, load_dataset
from gbede.models import ModelFamily, ParametricModel, get_model
from gbede.regression import fit_gbede_regression, select_regression_tuning
from gbede.simulation import (
    ContaminationSpec,
    MCConfig,
    poisson_expected_frequencies,
    run_efficiency_study,
    run_root_study,
)
from gbede.tuning import TuningGrid, best_estimate, select_tuning


# Initialize Typer app and console
app = typer.Typer(
    name="gbede",
    help="Robust parametric estimation with generalized B-exponential divergences",
    add_completion=True,
    no_args_is_help=True,
    rich_markup_mode="rich",
)
console = Console()

DEFAULT_THETA = {
    ModelFamily.NORMAL: "0,1",
    ModelFamily.NORMAL_LOCATION: "0",
    ModelFamily.POISSON: "1",
}


class OutputFormat(str, Enum):
    """Output format for CLI commands."""

    RICH = "rich"
    JSON = "json"
    CSV = "csv"


class StudyMethod(str, Enum):
    GBEDE = "gbede"
    MBEDE = "mbede"


@app.callback()
def main_callback(
    verbose: bool = typer.Option(False, "--verbose", "-v", help="Show debug logging"),
) -> None:
    """Robust estimation with GBEDE(α, β) and MBEDE."""
    setup_logging(verbose)


@contextmanager
def handle_errors() -> Iterator[None]:
    """Map failures to exit codes: 1 for numerical errors, 130 on Ctrl-C.

    Usage errors pass through so click reports them with exit code 2.
    """
    try:
        yield
    except (typer.Exit, click.ClickException):
        raise
    except KeyboardInterrupt:
        console.print("\n[yellow]Cancelled by user[/yellow]")
        raise typer.Exit(code=130)
    except GbedeError as e:
        format_error(str(e), console, operation=e.operation)
        raise typer.Exit(code=1)
    except Exception as e:
        format_error(str(e), console)
        raise typer.Exit(code=1)


# ============================================================================
# Argument parsing helpers
# ============================================================================


def parse_values(spec: str, name: str = "value") -> list[float]:
    """Parse ``0,-1,-2`` or ``LO..HI:STEP`` (inclusive), or a mix of both.

    Raises:
        typer.BadParameter: on malformed input
    """
    values: list[float] = []
    for item in spec.split(","):
        item = item.strip()
        if not item:
            continue
        try:
            if ".." in item:
                bounds, _, step_text = item.partition(":")
                lo_text, hi_text = bounds.split("..")
                lo, hi = float(lo_text), float(hi_text)
                step = float(step_text) if step_text else 1.0
                if step <= 0 or hi < lo:
                    raise ValueError
                count = int(math.floor((hi - lo) / step + 1e-9))
                values.extend(round(lo + i * step, 10) for i in range(count + 1))
            else:
                values.append(float(item))
        except ValueError:
            raise typer.BadParameter(
                f"cannot parse {item!r}; use 0,-1,-2 or LO..HI:STEP", param_hint=name
            )
    if not values:
        raise typer.BadParameter("no values given", param_hint=name)
    return values


def _resolve_model(
    family: Optional[ModelFamily], dataset: Optional[Dataset], sigma: float
) -> ParametricModel:
    if family is None:
        hint = dataset.model_hint if dataset is not None else None
        family = ModelFamily(hint or ModelFamily.NORMAL.value)
    return get_model(family, sigma)


def _univariate(dataset: Dataset) -> np.ndarray:
    if dataset.values is None:
        raise typer.BadParameter(
            f"{dataset.name} is a regression dataset; use 'gbede regress'",
            param_hint="DATASET",
        )
    return dataset.values


def _pair(alpha: Optional[float], beta: Optional[float]) -> TuningPair:
    if alpha is None or beta is None:
        raise typer.BadParameter("both --alpha and --beta are required")
    return TuningPair(alpha, beta)


def _observed_cells(values: np.ndarray, cells: int) -> np.ndarray:
    counts = np.array([np.sum(values == k) for k in range(cells - 1)], dtype=float)
    return np.append(counts, np.sum(values >= cells - 1))


def _emit(text: str, output: Optional[Path]) -> None:
    if output is None:
        typer.echo(text, nl=False)
    else:
        output.write_text(text, encoding="utf-8")
        format_success_message(f"Wrote {output}", console)


# ============================================================================
# Commands
# ============================================================================


@app.command()
def fit(
    dataset: str = typer.Argument(..., help="Dataset name or CSV path"),
    model: Optional[ModelFamily] = typer.Option(
        None, "--model", "-m", help="Model family (default: the dataset's usual model)"
    ),
    alpha: Optional[float] = typer.Option(None, "--alpha", "-a", help="GBEDE α"),
    beta: Optional[float] = typer.Option(None, "--beta", "-b", help="GBEDE β"),
    mle: bool = typer.Option(False, "--mle", help="Maximum likelihood"),
    mbede: Optional[float] = typer.Option(
        None, "--mbede", help="MBEDE at this α (objective minimization)"
    ),
    mdpde: Optional[float] = typer.Option(
        None, "--mdpde", help="Density power divergence estimator at this β"
    ),
    pilot: bool = typer.Option(False, "--pilot", help="Minimum L2 estimator"),
    tune: bool = typer.Option(False, "--tune", help="Pick (α, β) on the default grid"),
    sigma: float = typer.Option(1.0, "--sigma", help="Known σ for normal-location"),
    output_format: OutputFormat = typer.Option(
        OutputFormat.RICH, "--output-format", "-o", help="rich or json"
    ),
) -> None:
    """Fit one estimator to a univariate dataset.

    [bold cyan]EXAMPLES[/bold cyan]:
      [dim]$[/dim] gbede fit drosophila --alpha=-2 --beta 0.4
      [dim]$[/dim] gbede fit drosophila --mbede=-2
      [dim]$[/dim] gbede fit telephone-fault --mdpde 0.5
      [dim]$[/dim] gbede fit telephone-fault --model normal --tune
      [dim]$[/dim] gbede fit data.csv --mle --output-format json
    """
    selectors = [
        mle,
        mbede is not None,
        mdpde is not None,
        pilot,
        tune,
        alpha is not None or beta is not None,
    ]
    if sum(selectors) != 1:
        raise typer.BadParameter(
            "choose exactly one of --alpha/--beta, --mle, --mbede, --mdpde, --pilot, --tune"
        )

    with handle_errors():
        data = load_dataset(dataset)
        x = _univariate(data)
        family = _resolve_model(model, data, sigma)
        tol = settings.get_tolerance()

        if mle:
            result = fit_mle(x, family, tol=tol)
        elif mbede is not None:
            result = fit_mbede(x, family, mbede, tol=tol)
        elif mdpde is not None:
            result = fit_mdpde(
                x, family, mdpde, tol=tol, grid_points=settings.get_grid_points()
            )
        elif pilot:
            result = fit_l2_pilot(x, family, tol=tol)
        elif tune:
            with console.status("[bold green]Searching the tuning grid...", spinner="dots"):
                best_pair, _ = select_tuning(x, family)
            result = fit_gbede(
                x, family, best_pair, tol=tol, grid_points=settings.get_grid_points()
            )
        else:
            result = fit_gbede(
                x,
                family,
                _pair(alpha, beta),
                tol=tol,
                grid_points=settings.get_grid_points(),
            )

        frequencies = observed = None
        if family.name == ModelFamily.POISSON.value:
            frequencies = poisson_expected_frequencies(result.theta_hat[0], x.size)
            observed = _observed_cells(x, len(frequencies))

        if output_format is OutputFormat.JSON:
            data_out = result.to_dict()
            if frequencies is not None:
                data_out["expected_frequencies"] = frequencies.tolist()
            typer.echo(to_json(data_out))
        else:
            format_fit(result, console, frequencies, observed)


@app.command()
def roots(
    dataset: str = typer.Argument(..., help="Dataset name or CSV path"),
    alpha: float = typer.Option(..., "--alpha", "-a", help="GBEDE α"),
    beta: float = typer.Option(..., "--beta", "-b", help="GBEDE β"),
    model: Optional[ModelFamily] = typer.Option(None, "--model", "-m", help="Model family"),
    sigma: float = typer.Option(1.0, "--sigma", help="Known σ for normal-location"),
    output_format: OutputFormat = typer.Option(
        OutputFormat.RICH, "--output-format", "-o", help="rich or json"
    ),
) -> None:
    """List every root of the estimating equation with its empirical divergence.

    [bold cyan]EXAMPLE[/bold cyan]:
      [dim]$[/dim] gbede roots telephone-fault --alpha=-1 --beta 0.2
    """
    with handle_errors():
        data = load_dataset(dataset)
        x = _univariate(data)
        family = _resolve_model(model, data, sigma)
        result = fit_gbede(
            x,
            family,
            TuningPair(alpha, beta),
            tol=settings.get_tolerance(),
            grid_points=settings.get_grid_points(),
            with_sandwich=False,
        )
        if output_format is OutputFormat.JSON:
            typer.echo(to_json(result.to_dict()))
        else:
            format_roots(result, console)


@app.command()
def regress(
    dataset: str = typer.Argument(..., help="belgium-calls, salinity or a CSV path"),
    response: Optional[str] = typer.Option(
        None, "--response", "-r", help="Response column (default: last column)"
    ),
    alpha: Optional[float] = typer.Option(None, "--alpha", "-a", help="GBEDE α"),
    beta: Optional[float] = typer.Option(None, "--beta", "-b", help="GBEDE β"),
    tune: bool = typer.Option(False, "--tune", help="Pick (α, β) on the default grid"),
    output_format: OutputFormat = typer.Option(
        OutputFormat.RICH, "--output-format", "-o", help="rich or json"
    ),
) -> None:
    """Fit the normal linear model by GBEDE(α, β).

    [bold cyan]EXAMPLES[/bold cyan]:
      [dim]$[/dim] gbede regress belgium-calls --alpha 0 --beta 0
      [dim]$[/dim] gbede regress salinity --alpha=-1 --beta 0.5
    """
    if not tune and (alpha is None or beta is None):
        raise typer.BadParameter("give --alpha and --beta, or --tune")

    with handle_errors():
        data = load_dataset(dataset, response)
        if data.regression is None:
            raise typer.BadParameter(
                f"{dataset} has a single column; use 'gbede fit'", param_hint="DATASET"
            )
        if tune:
            with console.status("[bold green]Searching the tuning grid...", spinner="dots"):
                pair, _ = select_regression_tuning(data.regression)
        else:
            pair = TuningPair(alpha, beta)
        result = fit_gbede_regression(data.regression, pair)

        if output_format is OutputFormat.JSON:
            typer.echo(to_json(result.to_dict(data.regression.names)))
        else:
            format_regression(result, data.regression.names, console)


@app.command()
def tune(
    dataset: str = typer.Argument(..., help="Dataset name or CSV path"),
    model: Optional[ModelFamily] = typer.Option(None, "--model", "-m", help="Model family"),
    alphas: str = typer.Option("-3..0:0.1", "--alphas", help="α values"),
    betas: str = typer.Option("0..1:0.1", "--betas", help="β values"),
    sigma: float = typer.Option(1.0, "--sigma", help="Known σ for normal-location"),
    output_format: OutputFormat = typer.Option(
        OutputFormat.RICH, "--output-format", "-o", help="rich or csv"
    ),
) -> None:
    """Estimate the MSE over an (α, β) grid and report the minimizer.

    [bold cyan]EXAMPLES[/bold cyan]:
      [dim]$[/dim] gbede tune telephone-fault
      [dim]$[/dim] gbede tune drosophila --alphas=-1..0:0.1 --betas 0..0.5:0.1 -o csv
    """
    grid_alphas = parse_values(alphas, "--alphas")
    grid_betas = parse_values(betas, "--betas")

    with handle_errors():
        grid = TuningGrid.from_values(grid_alphas, grid_betas)
        data = load_dataset(dataset)
        with console.status("[bold green]Searching the tuning grid...", spinner="dots"):
            if data.regression is not None:
                _, surface = select_regression_tuning(data.regression, grid)
            else:
                family = _resolve_model(model, data, sigma)
                _, surface = select_tuning(data.values, family, grid)
        best = best_estimate(surface)

        if output_format is OutputFormat.CSV:
            description = f"tune {dataset} {grid_alphas} {grid_betas}"
            typer.echo(frame_to_csv(surface_frame(surface), None, description), nl=False)
        elif output_format is OutputFormat.JSON:
            typer.echo(
                to_json(
                    {
                        "selected": {"alpha": best.pair.alpha, "beta": best.pair.beta},
                        "surface": surface_frame(surface).to_dict(orient="records"),
                    }
                )
            )
        else:
            format_tuning_surface(surface, best, console)


@app.command(name="are-table")
def are_table(
    model: ModelFamily = typer.Option(
        ModelFamily.NORMAL_LOCATION, "--model", "-m", help="Model family"
    ),
    alpha: str = typer.Option("0,-1,-2,-3,-4", "--alpha", help="α values"),
    beta: str = typer.Option("0..1:0.1", "--beta", help="β values"),
    theta: Optional[str] = typer.Option(None, "--theta", help="Parameter value"),
    component: int = typer.Option(0, "--component", help="Parameter component"),
    sigma: float = typer.Option(1.0, "--sigma", help="Known σ for normal-location"),
    output_format: OutputFormat = typer.Option(
        OutputFormat.RICH, "--output-format", "-o", help="rich or csv"
    ),
) -> None:
    """Asymptotic relative efficiency (%) for every (α, β) combination.

    [bold cyan]EXAMPLE[/bold cyan]:
      [dim]$[/dim] gbede are-table --model normal-location --alpha 0,-1,-2,-3,-4 --beta 0..1:0.1
    """
    alphas = parse_values(alpha, "--alpha")
    betas = parse_values(beta, "--beta")
    theta_values = parse_values(theta or DEFAULT_THETA[model], "--theta")

    with handle_errors():
        family = get_model(model, sigma)
        rows = [
            [are(TuningPair(a, b), family, theta_values, component) for b in betas]
            for a in alphas
        ]
        frame = pd.DataFrame(rows, columns=[f"{b:g}" for b in betas])
        frame.insert(0, "alpha", alphas)

        if output_format is OutputFormat.CSV:
            tag = f"are {model.value} {component} {alpha} {beta} {theta_values} {sigma}"
            typer.echo(frame_to_csv(frame, None, tag), nl=False)
        else:
            format_frame(frame, f"ARE (%) of {family.param_names[component]}", console)


@app.command(name="optimal-alpha")
def optimal_alpha_command(
    beta: float = typer.Option(..., "--beta", "-b", help="Fixed β"),
    bracket: str = typer.Option("-12,0", "--bracket", help="Search interval LO,HI"),
    model: ModelFamily = typer.Option(
        ModelFamily.NORMAL_LOCATION, "--model", "-m", help="Model family"
    ),
    theta: Optional[str] = typer.Option(None, "--theta", help="Parameter value"),
    component: int = typer.Option(0, "--component", help="Parameter component"),
    sigma: float = typer.Option(1.0, "--sigma", help="Known σ for normal-location"),
) -> None:
    """α maximizing the ARE at fixed β.

    [bold cyan]EXAMPLE[/bold cyan]:
      [dim]$[/dim] gbede optimal-alpha --beta 1
    """
    bounds = parse_values(bracket, "--bracket")
    if len(bounds) != 2:
        raise typer.BadParameter("bracket needs exactly two values", param_hint="--bracket")
    theta_values = parse_values(theta or DEFAULT_THETA[model], "--theta")

    with handle_errors():
        family = get_model(model, sigma)
        alpha_star, value = optimal_alpha(
            beta, family, theta_values, (bounds[0], bounds[1]), component
        )
        format_success_message(
            f"β = {beta:g}: optimal α = {alpha_star:.2f}, ARE = {value:.2f}%", console
        )


@app.command()
def simulate(
    config_file: Optional[Path] = typer.Option(
        None, "--config", "-c", help="TOML experiment file", exists=True, dir_okay=False
    ),
    model: ModelFamily = typer.Option(ModelFamily.NORMAL, "--model", "-m", help="Model family"),
    target: str = typer.Option("0,1", "--target", help="Target component parameter"),
    contaminant: Optional[str] = typer.Option(
        None, "--contaminant", help="Contaminating component parameter"
    ),
    epsilon: float = typer.Option(0.0, "--epsilon", help="Contamination fraction"),
    sigma: float = typer.Option(1.0, "--sigma", help="Known σ for normal-location"),
    n: int = typer.Option(100, "--n", help="Sample size"),
    replications: Optional[int] = typer.Option(None, "--replications", "-R"),
    seed: Optional[int] = typer.Option(None, "--seed"),
    pairs: list[str] = typer.Option(
        [], "--pair", "-p", help="Tuning pair α,β (repeatable)"
    ),
    method: StudyMethod = typer.Option(StudyMethod.GBEDE, "--method"),
    root_study: bool = typer.Option(
        False, "--root-study", help="Tally roots of the first pair instead"
    ),
    workers: Optional[int] = typer.Option(None, "--workers", "-w"),
    output: Optional[Path] = typer.Option(None, "--output", help="Write CSV here"),
) -> None:
    """Monte Carlo efficiency study under contamination.

    [bold cyan]EXAMPLES[/bold cyan]:
      [dim]$[/dim] gbede simulate --pair 0,0.5 --pair=-2,0.3 --replications 2000
      [dim]$[/dim] gbede simulate --epsilon 0.05 --contaminant 3,1 --pair=-2,0.6
      [dim]$[/dim] gbede simulate --config experiment.toml --output table.csv
    """
    if config_file is None:
        parsed_pairs = []
        for text in pairs:
            values = parse_values(text, "--pair")
            if len(values) != 2:
                raise typer.BadParameter(f"pair {text!r} needs α,β", param_hint="--pair")
            parsed_pairs.append(values)

    with handle_errors():
        if config_file is not None:
            experiment = MCConfig.from_toml(config_file)
        else:
            target_values = parse_values(target, "--target")
            spec = ContaminationSpec(
                family=model,
                target=target_values,
                contaminant=parse_values(contaminant, "--contaminant")
                if contaminant
                else target_values,
                epsilon=epsilon,
                sigma=sigma,
            )
            experiment = MCConfig(
                spec=spec,
                n=n,
                replications=replications or settings.get_replications(),
                seed=seed if seed is not None else settings.get_seed(),
                pairs=tuple(TuningPair(a, b) for a, b in parsed_pairs),
                method=method.value,
                tol=settings.get_tolerance(),
            )

        if root_study:
            if not experiment.pairs:
                raise typer.BadParameter("--root-study needs a --pair")
            with console.status("[bold green]Running root study...", spinner="dots"):
                study = run_root_study(
                    experiment.spec,
                    experiment.n,
                    experiment.replications,
                    experiment.seed,
                    experiment.pairs[0],
                )
            frame = study.to_frame()
            if output is not None:
                _emit(
                    frame_to_csv(frame, experiment.seed, f"roots {experiment.config_hash()}"),
                    output,
                )
            format_frame(frame, "Roots by rank", console, digits=4)
            console.print(
                f"[dim]multiple roots:[/dim] {study.multi_root_fraction:.1%}   "
                f"[dim]selected root nearest target:[/dim] "
                f"{study.selected_nearest_fraction:.1%}"
            )
            return

        with console.status("[bold green]Running replications...", spinner="dots"):
            table = run_efficiency_study(experiment, workers or settings.get_workers())
        if output is not None:
            table.to_csv(output)
            format_frame(table.to_frame(), "Efficiency", console)
            format_success_message(f"Wrote {output}", console)
        else:
            typer.echo(table.to_csv(), nl=False)


@app.command()
def influence(
    model: ModelFamily = typer.Option(
        ModelFamily.NORMAL_LOCATION, "--model", "-m", help="Model family"
    ),
    theta: Optional[str] = typer.Option(None, "--theta", help="Parameter value"),
    alpha: float = typer.Option(..., "--alpha", "-a", help="GBEDE α"),
    beta: float = typer.Option(..., "--beta", "-b", help="GBEDE β"),
    y: str = typer.Option("-10..10:0.1", "--y", help="Evaluation points"),
    weights: bool = typer.Option(False, "--weights", help="Add the f^β e^{αf} column"),
    sigma: float = typer.Option(1.0, "--sigma", help="Known σ for normal-location"),
    output: Optional[Path] = typer.Option(None, "--output", help="Write CSV here"),
) -> None:
    """Influence function on a grid of points, as plot-ready CSV.

    [bold cyan]EXAMPLE[/bold cyan]:
      [dim]$[/dim] gbede influence --alpha=-1 --beta 0.1 --y=-10..10:0.5
    """
    points = np.array(parse_values(y, "--y"))
    theta_values = parse_values(theta or DEFAULT_THETA[model], "--theta")

    with handle_errors():
        family = get_model(model, sigma)
        pair = TuningPair(alpha, beta)
        values = np.atleast_2d(influence_function(points, theta_values, pair, family))
        frame = pd.DataFrame({"y": points})
        for j, name in enumerate(family.param_names):
            frame[f"if_{name}"] = values[:, j]
        if weights:
            frame["weight"] = score_weights(points, theta_values, pair, family)
        tag = f"influence {model.value} {theta_values} {pair} {y} {sigma}"
        _emit(frame_to_csv(frame, None, tag), output)


@app.command()
def config(
    action: str = typer.Argument("show", help="show, set or reset"),
    key: Optional[str] = typer.Argument(None, help="Setting name"),
    value: Optional[str] = typer.Argument(None, help="New value (for set)"),
) -> None:
    """Show or change persistent defaults.

    [bold cyan]EXAMPLES[/bold cyan]:
      [dim]$[/dim] gbede config show                 [dim]# Show current configuration[/dim]
      [dim]$[/dim] gbede config set replications 500 [dim]# Fewer Monte Carlo runs[/dim]
      [dim]$[/dim] gbede config reset seed           [dim]# Back to the default seed[/dim]
      [dim]$[/dim] gbede config reset                [dim]# Back to all defaults[/dim]
    """
    with handle_errors():
        if action == "show":
            stored = settings.load_config()
            console.print()
            console.print("[bold cyan]Current Configuration[/bold cyan]")
            console.print()
            for name, current in settings.effective_config().items():
                origin = "" if name in stored else " [yellow](default)[/yellow]"
                console.print(f"[dim]{name}:[/dim] {current}{origin}")
            console.print()
            return

        if action == "set":
            if key is None or value is None:
                raise typer.BadParameter("usage: gbede config set KEY VALUE")
            settings.set_setting(key, value)
            console.print()
            console.print(f"[green]✓[/green] {key} set to: [bold]{value}[/bold]")
            console.print()
            return

        if action == "reset":
            settings.reset_setting(key)
            console.print()
            console.print(f"[green]✓[/green] {key or 'all settings'} reset to default")
            console.print()
            return

        raise typer.BadParameter(
            f"unknown action {action!r}; use show, set or reset", param_hint="ACTION"
        )


def main():
    """Main CLI entry point."""
    app()


if __name__ == "__main__":
    main()
