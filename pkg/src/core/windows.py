"""Sliding windows, chronological splits and standardization."""
from __future__ import annotations

import logging
import math
from typing import Iterable, List, Tuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from src.common.errors import SeriesTooShort
from src.models.series import SplitSpec, Standardizer, TimeSeries, WindowSample

LOGGER = logging.getLogger(__name__)


def make_windows(
    series: TimeSeries, L: int, T: int, stride: int = 1
) -> List[WindowSample]:
    """
    Cut a series into (history, future) windows.

    Anchors are absolute time indices ``start_index + L + k * stride`` for every
    k whose future still fits inside the series.

    Args:
        series: Source series
        L: Look-back length
        T: Forecast horizon
        stride: Step between consecutive anchors

    Returns:
        Windows ordered by anchor

    Raises:
        SeriesTooShort: if the series is shorter than L + T
    """
    if L < 1 or T < 1 or stride < 1:
        raise ValueError(f"L, T and stride must be positive (got {L}, {T}, {stride})")
    if series.length < L + T:
        raise SeriesTooShort(
            f"Series of length {series.length} cannot hold a window of L={L}, T={T}"
        )

    # (count, L + T, M) read-only views, no copies
    blocks = np.moveaxis(sliding_window_view(series.values, L + T, axis=0)[::stride], -1, 1)
    count = blocks.shape[0]
    windows = [
        WindowSample(anchor_t=series.start_index + L + k * stride, history=block[:L], future=block[L:])
        for k, block in enumerate(blocks)
    ]
    LOGGER.debug("Built %d windows (L=%d, T=%d, stride=%d)", count, L, T, stride)
    return windows


def window_count(length: int, L: int, T: int, stride: int = 1) -> int:
    """Number of windows :func:`make_windows` produces for a series length."""
    if length < L + T:
        return 0
    return (length - L - T) // stride + 1


def chronological_split(
    series: TimeSeries, spec: SplitSpec
) -> Tuple[TimeSeries, TimeSeries, TimeSeries]:
    """
    Split a series into contiguous train/validation/test segments.

    Train and validation lengths are floored, the test segment takes the rest.

    Args:
        series: Series to split (N ≥ 3)
        spec: Split ratios

    Returns:
        (train, val, test) series keeping absolute time indices
    """
    n = series.length
    if n < 3:
        raise SeriesTooShort(f"Need at least 3 observations to split, got {n}")

    n_train = math.floor(n * spec.train)
    n_val = math.floor(n * spec.val)
    n_train = min(n_train, n)
    n_val = min(n_val, n - n_train)

    train = series.slice(0, n_train)
    val = series.slice(n_train, n_train + n_val)
    test = series.slice(n_train + n_val, n)
    LOGGER.info("Split %d steps into train=%d, val=%d, test=%d", n, train.length, val.length, test.length)
    return train, val, test


def split_boundaries(series: TimeSeries, spec: SplitSpec) -> Tuple[int, int, int, int]:
    """Absolute time indices (train_start, val_start, test_start, end_exclusive)."""
    train, val, test = chronological_split(series, spec)
    return (
        train.start_index,
        val.start_index,
        test.start_index,
        series.start_index + series.length,
    )


def windows_between(
    windows: Iterable[WindowSample], start: int, stop: int
) -> List[WindowSample]:
    """
    Select windows whose future lies entirely inside [start, stop).

    Histories may reach back before ``start``; this lets validation and test
    windows use the tail of the preceding segment as look-back.
    """
    return [
        window
        for window in windows
        if window.anchor_t >= start and window.anchor_t + window.horizon <= stop
    ]


def fit_standardizer(train: TimeSeries) -> Standardizer:
    """Fit per-channel statistics on the training split only."""
    standardizer = Standardizer.fit(train)
    LOGGER.debug("Standardizer fitted: %s", standardizer.to_dict())
    return standardizer
