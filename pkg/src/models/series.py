"""Time-series containers shared by every calibration stage."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

STD_FLOOR = 1e-8


def _readonly(array: np.ndarray) -> np.ndarray:
    array = np.array(array, dtype=np.float64, copy=True)
    array.setflags(write=False)
    return array


@dataclass(frozen=True)
class TimeSeries:
    """An N×M real-valued series with channel names and a time origin."""

    values: np.ndarray
    channel_names: Tuple[str, ...]
    start_index: int = 0
    timestamps: Optional[Tuple[str, ...]] = None
    metadata: Dict[str, Any] = field(default_factory=dict, compare=False)

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim == 1:
            values = values[:, None]
        if values.ndim != 2:
            raise ValueError(f"Series values must be 2-D, got shape {values.shape}")
        if values.shape[1] < 1:
            raise ValueError("Series needs at least one channel")
        if not np.all(np.isfinite(values)):
            raise ValueError("Series values must be finite")

        names = tuple(str(name) for name in self.channel_names)
        if len(names) != values.shape[1]:
            raise ValueError(
                f"Expected {values.shape[1]} channel names, got {len(names)}"
            )
        if len(set(names)) != len(names):
            raise ValueError(f"Channel names must be unique: {names}")
        if self.timestamps is not None and len(self.timestamps) != values.shape[0]:
            raise ValueError("Timestamps must match the series length")

        object.__setattr__(self, "values", _readonly(values))
        object.__setattr__(self, "channel_names", names)

    @classmethod
    def from_array(
        cls,
        values: np.ndarray | Sequence[float],
        channel_names: Optional[Sequence[str]] = None,
        start_index: int = 0,
    ) -> TimeSeries:
        """Build a series from a 1-D or 2-D array with default channel names."""
        array = np.asarray(values, dtype=np.float64)
        if array.ndim == 1:
            array = array[:, None]
        names = channel_names or [f"ch{index}" for index in range(array.shape[1])]
        return cls(values=array, channel_names=tuple(names), start_index=start_index)

    @property
    def length(self) -> int:
        """Number of time steps N."""
        return int(self.values.shape[0])

    @property
    def n_channels(self) -> int:
        """Number of channels M."""
        return int(self.values.shape[1])

    def slice(self, start: int, stop: int) -> TimeSeries:
        """Return rows [start, stop) by position, keeping absolute time indices."""
        timestamps = self.timestamps[start:stop] if self.timestamps is not None else None
        return TimeSeries(
            values=self.values[start:stop],
            channel_names=self.channel_names,
            start_index=self.start_index + start,
            timestamps=timestamps,
            metadata=dict(self.metadata),
        )

    def with_values(self, values: np.ndarray) -> TimeSeries:
        """Return a copy carrying new values of identical shape."""
        if np.shape(values) != self.values.shape:
            raise ValueError(f"Expected shape {self.values.shape}, got {np.shape(values)}")
        return TimeSeries(
            values=values,
            channel_names=self.channel_names,
            start_index=self.start_index,
            timestamps=self.timestamps,
            metadata=dict(self.metadata),
        )

    def to_frame(self) -> pd.DataFrame:
        """Convert to a DataFrame indexed by absolute time."""
        index = pd.RangeIndex(self.start_index, self.start_index + self.length, name="t")
        frame = pd.DataFrame(self.values, columns=list(self.channel_names), index=index)
        if self.timestamps is not None:
            frame.insert(0, "date", list(self.timestamps))
        return frame

    @staticmethod
    def concatenate(parts: Sequence[TimeSeries]) -> TimeSeries:
        """Join contiguous parts back into one series."""
        non_empty = [part for part in parts if part.length > 0]
        if not non_empty:
            raise ValueError("Nothing to concatenate")
        first = non_empty[0]
        timestamps = None
        if all(part.timestamps is not None for part in non_empty):
            timestamps = tuple(ts for part in non_empty for ts in part.timestamps)
        return TimeSeries(
            values=np.concatenate([part.values for part in non_empty], axis=0),
            channel_names=first.channel_names,
            start_index=first.start_index,
            timestamps=timestamps,
            metadata=dict(first.metadata),
        )


@dataclass(frozen=True)
class WindowSample:
    """One (history, future) pair anchored at prediction start time t."""

    anchor_t: int
    history: np.ndarray
    future: np.ndarray

    def __post_init__(self) -> None:
        history = np.asarray(self.history, dtype=np.float64)
        future = np.asarray(self.future, dtype=np.float64)
        if history.ndim != 2 or future.ndim != 2:
            raise ValueError("History and future must be 2-D (rows × channels)")
        if history.shape[1] != future.shape[1]:
            raise ValueError("History and future must share the channel count")
        object.__setattr__(self, "history", history)
        object.__setattr__(self, "future", future)

    @property
    def lookback(self) -> int:
        """History length L."""
        return int(self.history.shape[0])

    @property
    def horizon(self) -> int:
        """Future length T."""
        return int(self.future.shape[0])

    @property
    def n_channels(self) -> int:
        """Number of channels M."""
        return int(self.history.shape[1])


@dataclass(frozen=True)
class SplitSpec:
    """Train/validation/test ratios."""

    ratios: Tuple[float, float, float] = (0.7, 0.1, 0.2)

    def __post_init__(self) -> None:
        ratios = tuple(float(ratio) for ratio in self.ratios)
        if len(ratios) != 3:
            raise ValueError(f"Split needs three ratios, got {len(ratios)}")
        if any(ratio < 0.0 or ratio > 1.0 for ratio in ratios):
            raise ValueError(f"Split ratios must lie in [0, 1]: {ratios}")
        if abs(sum(ratios) - 1.0) > 1e-12:
            raise ValueError(f"Split ratios must sum to 1: {ratios}")
        object.__setattr__(self, "ratios", ratios)

    @property
    def train(self) -> float:
        return self.ratios[0]

    @property
    def val(self) -> float:
        return self.ratios[1]

    @property
    def test(self) -> float:
        return self.ratios[2]


@dataclass(frozen=True)
class Standardizer:
    """Per-channel affine scaling fitted on the training split."""

    mean: np.ndarray
    std: np.ndarray

    def __post_init__(self) -> None:
        mean = np.asarray(self.mean, dtype=np.float64).reshape(-1)
        std = np.maximum(np.asarray(self.std, dtype=np.float64).reshape(-1), STD_FLOOR)
        if mean.shape != std.shape:
            raise ValueError("Mean and std must have the same length")
        object.__setattr__(self, "mean", _readonly(mean))
        object.__setattr__(self, "std", _readonly(std))

    @classmethod
    def fit(cls, series: TimeSeries) -> Standardizer:
        """Estimate per-channel mean and population std of ``series``."""
        if series.length < 1:
            raise ValueError("Cannot fit a standardizer on an empty series")
        return cls(mean=series.values.mean(axis=0), std=series.values.std(axis=0))

    def transform(self, series: TimeSeries) -> TimeSeries:
        """Scale a series to zero mean and unit variance per channel."""
        return series.with_values((series.values - self.mean) / self.std)

    def inverse_transform(self, series: TimeSeries) -> TimeSeries:
        """Undo :meth:`transform`."""
        return series.with_values(series.values * self.std + self.mean)

    def to_dict(self) -> Dict[str, List[float]]:
        """Convert to plain lists."""
        return {"mean": self.mean.tolist(), "std": self.std.tolist()}
