"""Dominant period detection from the channel-aggregated FFT amplitude."""
from __future__ import annotations

import logging

import numpy as np
from scipy.fft import rfft

from src.common.errors import DegenerateSeries, SeriesTooShort
from src.models.calibration import PeriodEstimate
from src.models.series import TimeSeries

LOGGER = logging.getLogger(__name__)

AMPLITUDE_FLOOR = 1e-12


def amplitude_spectrum(values: np.ndarray) -> np.ndarray:
    """
    Sum of per-channel FFT amplitudes of a mean-centred t×M matrix.

    Returns:
        Aggregate amplitude for frequency indices 0..floor(t/2)
    """
    values = np.asarray(values, dtype=np.float64)
    if values.ndim == 1:
        values = values[:, None]
    centred = values - values.mean(axis=0, keepdims=True)
    return np.abs(rfft(centred, axis=0)).sum(axis=1)


def dominant_period(train: TimeSeries) -> PeriodEstimate:
    """
    Find T* = floor(t_train / k) for the frequency k with the largest summed amplitude.

    Frequency indices 0 and 1 are excluded; ties go to the smallest k.

    Args:
        train: Training split (t_train ≥ 4)

    Returns:
        PeriodEstimate

    Raises:
        DegenerateSeries: if every channel is constant
    """
    length = train.length
    if length < 4:
        raise SeriesTooShort(f"Period detection needs at least 4 steps, got {length}")

    spectrum = amplitude_spectrum(train.values)
    candidates = spectrum[2 : length // 2 + 1]
    if candidates.size == 0 or float(candidates.max()) < AMPLITUDE_FLOOR:
        raise DegenerateSeries("All channels are constant; no dominant frequency exists")

    k = int(np.argmax(candidates)) + 2
    estimate = PeriodEstimate(
        period=length // k,
        dominant_frequency_index=k,
        aggregate_amplitude=float(spectrum[k]),
    )
    LOGGER.info("Dominant period T*=%d (k=%d, amplitude=%.4g)", estimate.period, k, estimate.aggregate_amplitude)
    return estimate
