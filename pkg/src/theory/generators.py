"""Synthetic series with known (or absent) context-driven distribution shift."""
from __future__ import annotations

from typing import Optional, Sequence

import numpy as np

from src.models.series import TimeSeries


def _names(n_channels: int) -> tuple:
    return tuple(f"ch{index}" for index in range(n_channels))


def phase_shift_series(
    length: int,
    period: int = 24,
    magnitude: float = 1.0,
    noise_std: float = 0.5,
    seed: int = 0,
    n_channels: int = 1,
    profile: Optional[Sequence[float]] = None,
) -> TimeSeries:
    """
    y_t = magnitude · s(t mod period) + ε_t.

    The seasonal profile s is drawn once per channel (or given) and
    normalized to zero mean and unit standard deviation.
    """
    rng = np.random.default_rng(seed)
    if profile is None:
        shapes = rng.standard_normal((period, n_channels))
    else:
        shapes = np.tile(np.asarray(profile, dtype=np.float64).reshape(period, 1), (1, n_channels))
    shapes = shapes - shapes.mean(axis=0)
    scale = shapes.std(axis=0)
    shapes = shapes / np.where(scale > 0, scale, 1.0)
    t = np.arange(length)
    values = magnitude * shapes[t % period] + rng.normal(0.0, noise_std, size=(length, n_channels))
    return TimeSeries(
        values=values,
        channel_names=_names(n_channels),
        metadata={"generator": "phase", "period": period, "magnitude": magnitude, "seed": seed},
    )


def segment_shift_series(
    length: int,
    num_segments: int = 5,
    magnitude: float = 1.0,
    noise_std: float = 0.5,
    seed: int = 0,
    n_channels: int = 1,
) -> TimeSeries:
    """Piecewise-constant level drawn per contiguous segment, plus noise."""
    rng = np.random.default_rng(seed)
    levels = magnitude * rng.standard_normal((num_segments, n_channels))
    segment_of = np.minimum(np.arange(length) * num_segments // max(length, 1), num_segments - 1)
    values = levels[segment_of] + rng.normal(0.0, noise_std, size=(length, n_channels))
    return TimeSeries(
        values=values,
        channel_names=_names(n_channels),
        metadata={"generator": "segment", "segments": num_segments, "magnitude": magnitude, "seed": seed},
    )


def iid_series(length: int, noise_std: float = 1.0, seed: int = 0, n_channels: int = 1) -> TimeSeries:
    """Pure i.i.d. Gaussian noise: no context carries information."""
    rng = np.random.default_rng(seed)
    return TimeSeries(
        values=rng.normal(0.0, noise_std, size=(length, n_channels)),
        channel_names=_names(n_channels),
        metadata={"generator": "iid", "seed": seed},
    )


def sinusoid_series(
    length: int,
    periods: Sequence[int] = (24,),
    amplitudes: Sequence[float] = (1.0,),
    noise_std: float = 0.0,
    seed: int = 0,
    n_channels: int = 1,
) -> TimeSeries:
    """Sum of sinusoids with random phase per channel, plus optional noise."""
    rng = np.random.default_rng(seed)
    t = np.arange(length)[:, None]
    values = np.zeros((length, n_channels))
    for period, amplitude in zip(periods, amplitudes):
        phase = rng.uniform(0.0, 2 * np.pi, size=n_channels)
        values += amplitude * np.sin(2 * np.pi * t / period + phase)
    if noise_std > 0:
        values += rng.normal(0.0, noise_std, size=values.shape)
    return TimeSeries(values=values, channel_names=_names(n_channels), metadata={"generator": "sinusoid"})
