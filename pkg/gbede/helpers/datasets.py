"""Dataset loading for gbede.

This module provides:
1. Dataset dataclass - univariate sample or regression data with provenance
2. Embedded datasets - telephone-fault and Drosophila, kept verbatim in code
3. Bundled datasets - Belgian phone calls and salinity, shipped as CSV
4. CSV parsing - user files with row-level error messages
"""

from dataclasses import dataclass
from importlib import resources
from io import StringIO
from pathlib import Path
from typing import Optional

import numpy as np
import pandas as pd

from gbede.exceptions import DatasetError
from gbede.regression import RegressionData


# ============================================================================
# Dataset - container for loaded data
# ============================================================================


@dataclass(frozen=True)
class Dataset:
    """A named dataset.

    Attributes:
        name: dataset name or file path
        values: univariate observations, when the data is a sample
        regression: design and response, when the data is a regression problem
        provenance: where the numbers come from
        model_hint: model family the data is usually fitted with
    """

    name: str
    values: Optional[np.ndarray] = None
    regression: Optional[RegressionData] = None
    provenance: str = ""
    model_hint: Optional[str] = None

    @property
    def is_regression(self) -> bool:
        return self.regression is not None


# ============================================================================
# Embedded and bundled datasets
# ============================================================================

TELEPHONE_FAULT = (
    -988, -135, -78, 3, 59, 83, 93, 110, 189, 197, 204, 229, 269, 310,
)

# counts 0, 1, 2 observed 23, 7 and 3 times, plus one count of 91
DROSOPHILA = (0,) * 23 + (1,) * 7 + (2,) * 3 + (91,)

BUNDLED = {
    "belgium-calls": ("belgium_calls.csv", "calls"),
    "salinity": ("salinity.csv", "Y"),
}

DATASET_NAMES = ("telephone-fault", "drosophila", *BUNDLED)


def _bundled_path(filename: str):
    return resources.files("gbede").joinpath("data", filename)


def _read_provenance(text: str) -> str:
    lines = [line[1:].strip() for line in text.splitlines() if line.startswith("#")]
    return " ".join(lines)


def parse_csv_frame(text: str, source: str) -> pd.DataFrame:
    """Parse CSV text with a header row; every value must be numeric.

    Raises:
        DatasetError: listing each offending row and column.
    """
    try:
        frame = pd.read_csv(StringIO(text), comment="#", skipinitialspace=True)
    except (pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise DatasetError(f"{source}: cannot parse CSV: {e}", operation="load_dataset")
    if frame.empty:
        raise DatasetError(f"{source}: no data rows", operation="load_dataset")

    problems = []
    numeric = frame.apply(pd.to_numeric, errors="coerce")
    for column in frame.columns:
        bad = numeric[column].isna()
        for row in np.flatnonzero(bad.to_numpy()):
            problems.append(
                f"row {row + 1}: column {column!r} value {frame[column].iloc[row]!r} is not numeric"
            )
    if problems:
        raise DatasetError(
            f"{source}: malformed CSV\n" + "\n".join(problems),
            operation="load_dataset",
        )
    return numeric.astype(float)


def frame_to_dataset(
    frame: pd.DataFrame, name: str, response: Optional[str] = None, provenance: str = ""
) -> Dataset:
    """A one-column frame is a sample; otherwise a regression on ``response``."""
    if frame.shape[1] == 1 and response is None:
        return Dataset(name=name, values=frame.iloc[:, 0].to_numpy(), provenance=provenance)
    if response is None:
        response = frame.columns[-1]
    try:
        regression = RegressionData.from_frame(frame, response)
    except ValueError as e:
        raise DatasetError(f"{name}: {e}", operation="load_dataset")
    return Dataset(name=name, regression=regression, provenance=provenance)


def load_dataset(name: str, response: Optional[str] = None) -> Dataset:
    """Load a dataset by name or from a CSV file.

    Args:
        name: one of ``DATASET_NAMES`` or a path to a CSV file with a header
        response: response column for regression CSVs (default: last column)

    Returns:
        The loaded Dataset

    Raises:
        DatasetError: unknown name, unreadable file or malformed rows
    """
    if name == "telephone-fault":
        return Dataset(
            name=name,
            values=np.array(TELEPHONE_FAULT, dtype=float),
            provenance="Telephone-fault data: differences between two fault-rate measurements.",
            model_hint="normal",
        )
    if name == "drosophila":
        return Dataset(
            name=name,
            values=np.array(DROSOPHILA, dtype=float),
            provenance="Drosophila recessive lethal counts, one extreme count of 91.",
            model_hint="poisson",
        )
    if name in BUNDLED:
        filename, default_response = BUNDLED[name]
        text = _bundled_path(filename).read_text(encoding="utf-8")
        frame = parse_csv_frame(text, name)
        return frame_to_dataset(
            frame, name, response or default_response, _read_provenance(text)
        )

    path = Path(name).expanduser()
    if not path.is_file():
        valid = ", ".join(DATASET_NAMES)
        raise DatasetError(
            f"unknown dataset {name!r}: not a file and not one of {valid}",
            operation="load_dataset",
        )
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise DatasetError(f"cannot read {path}: {e}", operation="load_dataset")
    frame = parse_csv_frame(text, str(path))
    return frame_to_dataset(frame, str(path), response, _read_provenance(text))
