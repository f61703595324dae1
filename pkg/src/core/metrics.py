"""Forecast error metrics."""
from __future__ import annotations

from typing import Sequence, Tuple

import numpy as np

from src.common.errors import EmptyInput, ShapeMismatch


def mse_mae(
    predictions: Sequence[np.ndarray], truths: Sequence[np.ndarray]
) -> Tuple[float, float]:
    """
    Pooled mean squared and mean absolute error.

    Every sample, horizon step and channel carries equal weight.

    Args:
        predictions: T×M forecasts
        truths: T×M ground truths, same order

    Returns:
        (MSE, MAE)
    """
    if len(predictions) == 0 or len(truths) == 0:
        raise EmptyInput("Metrics need at least one prediction")
    if len(predictions) != len(truths):
        raise ShapeMismatch(
            f"{len(predictions)} predictions but {len(truths)} ground truths"
        )

    predicted = np.stack([np.asarray(p, dtype=np.float64) for p in predictions])
    actual = np.stack([np.asarray(t, dtype=np.float64) for t in truths])
    if predicted.shape != actual.shape:
        raise ShapeMismatch(f"Prediction shape {predicted.shape} != truth shape {actual.shape}")

    errors = predicted - actual
    return float(np.mean(errors**2)), float(np.mean(np.abs(errors)))


def improvement_pct(base: float, adapted: float) -> float:
    """Relative improvement (base − adapted) / base in percent; 0 when base is 0."""
    if base == 0.0:
        return 0.0
    return (base - adapted) / base * 100.0
