"""Rich formatting for gbede output."""

import hashlib
import io
import json
import logging
from collections.abc import Sequence
from typing import Optional

import numpy as np
import pandas as pd
from rich.console import Console
from rich.logging import RichHandler
from rich.markup import escape
from rich.panel import Panel
from rich.table import Table

from gbede.estimators import EstimationResult
from gbede.regression import RegressionFit
from gbede.simulation import metadata_header
from gbede.tuning import MSEEstimate


# standardized residuals beyond this are shown as outliers
OUTLIER_CUTOFF = 3.0


def setup_logging(verbose: bool = False, console: Optional[Console] = None) -> None:
    """Route the ``gbede`` loggers through a RichHandler.

    Args:
        verbose: DEBUG when true, WARNING otherwise
        console: console to log to (default: stderr)
    """
    logger = logging.getLogger("gbede")
    logger.handlers.clear()
    handler = RichHandler(
        console=console or Console(stderr=True),
        show_path=False,
        rich_tracebacks=False,
    )
    handler.setFormatter(logging.Formatter("%(message)s"))
    logger.addHandler(handler)
    logger.setLevel(logging.DEBUG if verbose else logging.WARNING)
    logger.propagate = False


def _fmt(value: float, digits: int = 4) -> str:
    if value is None or (isinstance(value, float) and np.isnan(value)):
        return "-"
    return f"{value:.{digits}f}"


def format_fit(
    result: EstimationResult,
    console: Console,
    frequencies: Optional[np.ndarray] = None,
    observed: Optional[np.ndarray] = None,
) -> None:
    """Display one fit: estimate, standard errors, roots and divergences.

    Args:
        result: the fit
        console: Rich console for output
        frequencies: expected Poisson cell counts, shown when given
        observed: observed cell counts matching ``frequencies``
    """
    table = Table(show_header=True, header_style="bold cyan", box=None, padding=(0, 2))
    table.add_column("Parameter")
    table.add_column("Estimate", justify="right")
    table.add_column("Std. error", justify="right")
    std_errors = result.std_errors
    for j, (name, value) in enumerate(result.theta_hat.to_dict().items()):
        se = _fmt(float(std_errors[j])) if std_errors is not None else "-"
        table.add_row(name, _fmt(value), se)

    details = Table(show_header=False, box=None, padding=(0, 1))
    details.add_column(style="cyan bold", width=16)
    details.add_column(style="white")
    details.add_row("Method:", f"[bold green]{result.method.value}[/bold green]")
    details.add_row("Tuning pair:", str(result.pair))
    details.add_row("Selected by:", result.selected_by.value)
    details.add_row("Residual:", f"{result.residual_norm:.3g}")
    if result.objective_value is not None:
        details.add_row("Objective:", _fmt(result.objective_value, 6))
    details.add_row("n:", str(result.n))

    console.print()
    console.print(
        Panel(
            table,
            title=f"[bold green]✅ {result.method.value} {result.pair}[/bold green]",
            border_style="green",
        )
    )
    console.print(details)
    if len(result.all_roots) > 1:
        format_roots(result, console)
    if frequencies is not None:
        format_frequencies(frequencies, console, observed)
    console.print()


def format_roots(result: EstimationResult, console: Console) -> None:
    """Display every root with its empirical divergence; the selected one starred."""
    table = Table(title="Roots", header_style="bold cyan")
    table.add_column("")
    for name in result.theta_hat.names:
        table.add_column(name, justify="right")
    table.add_column("Empirical divergence", justify="right")
    for i, root in enumerate(result.all_roots):
        marker = "[green]*[/green]" if root == result.theta_hat else ""
        divergence = result.divergences[i] if i < len(result.divergences) else None
        table.add_row(marker, *(_fmt(v) for v in root.values), _fmt(divergence, 6))
    console.print(table)


def format_frequencies(
    frequencies: np.ndarray, console: Console, observed: Optional[np.ndarray] = None
) -> None:
    """Display expected cell counts 0, 1, ..., ≥k."""
    cells = len(frequencies)
    table = Table(title="Expected frequencies", header_style="bold cyan")
    table.add_column("")
    labels = [str(k) for k in range(cells - 1)] + [f"≥{cells - 1}"]
    for label in labels:
        table.add_column(label, justify="right")
    if observed is not None:
        table.add_row("observed", *(str(int(v)) for v in observed))
    table.add_row("expected", *(_fmt(float(v), 2) for v in frequencies))
    console.print(table)


def format_regression(
    fit: RegressionFit, names: Sequence[str], console: Console
) -> None:
    """Display coefficients, σ² and the standardized residuals."""
    table = Table(show_header=True, header_style="bold cyan", box=None, padding=(0, 2))
    table.add_column("Term")
    table.add_column("Estimate", justify="right")
    table.add_column("Std. error", justify="right")
    se = fit.std_errors
    labels = list(names) or [f"gamma{j}" for j in range(len(fit.params.gamma))]
    for j, (label, value) in enumerate(zip(labels, fit.params.gamma)):
        table.add_row(label, _fmt(value), _fmt(float(se[j])))
    table.add_row("sigma2", _fmt(fit.params.sigma2), _fmt(float(se[-1])))

    console.print()
    console.print(
        Panel(
            table,
            title=f"[bold green]✅ GBEDE regression {fit.pair}[/bold green]",
            border_style="green",
        )
    )

    residuals = Table(title="Standardized residuals", header_style="bold cyan")
    residuals.add_column("Obs", justify="right")
    residuals.add_column("Residual", justify="right")
    for i, r in enumerate(fit.std_residuals, start=1):
        style = "bold red" if abs(r) > OUTLIER_CUTOFF else ""
        residuals.add_row(str(i), f"[{style}]{r:.3f}[/{style}]" if style else f"{r:.3f}")
    console.print(residuals)
    console.print()


def surface_frame(surface: Sequence[MSEEstimate]) -> pd.DataFrame:
    return pd.DataFrame(
        {
            "alpha": [e.pair.alpha for e in surface],
            "beta": [e.pair.beta for e in surface],
            "mse_hat": [e.mse_hat if e.valid else np.nan for e in surface],
            "bias_part": [e.bias_part if e.valid else np.nan for e in surface],
            "var_part": [e.var_part if e.valid else np.nan for e in surface],
            "valid": [e.valid for e in surface],
        }
    )


def format_tuning_surface(
    surface: Sequence[MSEEstimate], best: MSEEstimate, console: Console
) -> None:
    """Display the MSE surface as an α × β grid with the minimum highlighted."""
    alphas = sorted({e.pair.alpha for e in surface}, reverse=True)
    betas = sorted({e.pair.beta for e in surface})
    cells = {(e.pair.alpha, e.pair.beta): e for e in surface}

    table = Table(title="Estimated MSE", header_style="bold cyan")
    table.add_column("α \\ β", style="cyan")
    for beta in betas:
        table.add_column(f"{beta:g}", justify="right")
    for alpha in alphas:
        row = []
        for beta in betas:
            cell = cells.get((alpha, beta))
            if cell is None or not cell.valid:
                row.append("[dim]-[/dim]")
            elif cell.pair == best.pair:
                row.append(f"[bold green]{cell.mse_hat:.4g}[/bold green]")
            else:
                row.append(f"{cell.mse_hat:.4g}")
        table.add_row(f"{alpha:g}", *row)

    console.print()
    console.print(table)
    console.print(
        Panel(
            f"Selected pair [bold]{best.pair}[/bold] with estimated MSE {best.mse_hat:.6g}",
            title="✅ Tuning",
            border_style="green",
        )
    )
    console.print()


def format_frame(frame: pd.DataFrame, title: str, console: Console, digits: int = 2) -> None:
    """Render a DataFrame as a rich table."""
    table = Table(title=title, header_style="bold cyan")
    for column in frame.columns:
        table.add_column(str(column), justify="right")
    for _, row in frame.iterrows():
        table.add_row(
            *(
                f"{v:.{digits}f}" if isinstance(v, float) else str(v)
                for v in row.tolist()
            )
        )
    console.print(table)


def frame_to_csv(frame: pd.DataFrame, seed: Optional[int], description: str) -> str:
    """CSV text preceded by the ``#`` metadata line.

    ``description`` names the inputs that produced the table; its hash goes
    in the header.
    """
    config_hash = hashlib.sha256(description.encode("utf-8")).hexdigest()[:16]
    buffer = io.StringIO()
    buffer.write(metadata_header(seed, config_hash))
    frame.to_csv(buffer, index=False, float_format="%.6f", lineterminator="\n")
    return buffer.getvalue()


def to_json(data: dict) -> str:
    return json.dumps(data, indent=2, default=float)


def format_error(
    error_msg: str, console: Optional[Console] = None, operation: Optional[str] = None
) -> None:
    """Format and display error message.

    Args:
        error_msg: Error message to display
        console: Rich console for output
        operation: name of the failing operation, shown in the title
    """
    console = console or Console()
    title = f"❌ Error in {operation}" if operation else "❌ Error"
    console.print()
    console.print(Panel(f"[red]{escape(error_msg)}[/red]", title=title, border_style="red"))
    console.print()


def format_success_message(message: str, console: Optional[Console] = None) -> None:
    """Format and display success message.

    Args:
        message: Success message
        console: Rich console for output
    """
    console = console or Console()
    console.print()
    console.print(
        Panel(f"[green]{message}[/green]", title="✅ Success", border_style="green")
    )
    console.print()
