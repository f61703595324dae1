"""CSV ingestion for multichannel series."""
from __future__ import annotations

import logging
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
import pandas as pd

from src.common.errors import EmptyInput, FormatError
from src.models.series import TimeSeries

LOGGER = logging.getLogger(__name__)

TIMESTAMP_COLUMNS = {"date", "time", "timestamp", "datetime"}


def read_series_csv(
    path: Path | str,
    channels: Optional[Sequence[str]] = None,
) -> TimeSeries:
    """
    Read a comma-separated series with a header row.

    The first column is treated as a timestamp when it is named like one or is
    not numeric; it is kept as metadata only. Every remaining column must be
    numeric.

    Args:
        path: CSV file
        channels: Optional subset of channel columns to keep, in order

    Returns:
        TimeSeries with absolute time origin 0
    """
    path = Path(path)
    try:
        frame = pd.read_csv(path, sep=",", decimal=".")
    except pd.errors.EmptyDataError as exc:
        raise EmptyInput(f"{path} is empty") from exc
    except pd.errors.ParserError as exc:
        raise FormatError(f"Cannot parse {path}: {exc}") from exc

    if frame.empty:
        raise EmptyInput(f"{path} has a header but no rows")

    timestamps = None
    first = frame.columns[0]
    if str(first).strip().lower() in TIMESTAMP_COLUMNS or not pd.api.types.is_numeric_dtype(frame[first]):
        timestamps = tuple(frame[first].astype(str))
        frame = frame.drop(columns=[first])

    if channels:
        missing = [name for name in channels if name not in frame.columns]
        if missing:
            raise FormatError(f"Columns {missing} not found in {path}")
        frame = frame[list(channels)]

    if frame.shape[1] == 0:
        raise FormatError(f"{path} has no numeric channels")

    for column in frame.columns:
        if not pd.api.types.is_numeric_dtype(frame[column]):
            bad = pd.to_numeric(frame[column], errors="coerce").isna()
            row = int(np.argmax(bad.to_numpy())) + 2  # header is line 1
            raise FormatError(f"Column '{column}' is not numeric", line=row)

    values = frame.to_numpy(dtype=np.float64)
    if not np.all(np.isfinite(values)):
        row = int(np.argmax(~np.isfinite(values).all(axis=1))) + 2
        raise FormatError(f"{path} contains missing or non-finite values", line=row)

    LOGGER.info("Loaded %s: %d steps, %d channels", path.name, values.shape[0], values.shape[1])
    return TimeSeries(
        values=values,
        channel_names=tuple(str(column) for column in frame.columns),
        timestamps=timestamps,
        metadata={"source": str(path)},
    )


def write_series_csv(series: TimeSeries, path: Path | str) -> Path:
    """Write a series in the format :func:`read_series_csv` accepts."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame = series.to_frame().reset_index(drop=True)
    if "date" not in frame.columns:
        frame.insert(0, "date", np.arange(series.start_index, series.start_index + series.length))
    frame.to_csv(path, index=False, float_format="%.17g")
    return path
