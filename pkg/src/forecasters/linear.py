"""Channel-independent direct linear forecaster (DLinear without decomposition)."""
from __future__ import annotations

import logging
from typing import Sequence

import numpy as np

from src.common.errors import EmptyInput, ShapeMismatch
from src.forecasters.base import FeatureExtractor, Forecaster, training_arrays
from src.forecasters.head import fit_head_least_squares
from src.models.forecast import PredictionHead
from src.models.series import WindowSample

LOGGER = logging.getLogger(__name__)

NORMALIZATIONS = ("none", "last", "mean")


class ChannelHistoryExtractor(FeatureExtractor):
    """
    Uses each channel's own L history values as that channel's features.

    With ``normalization="last"`` (or ``"mean"``) the channel's last (mean)
    history value is subtracted from the features and added back to the
    forecast, so heads learn deviations from that reference level.
    """

    def __init__(self, lookback: int, horizon: int, n_channels: int, normalization: str = "none") -> None:
        if normalization not in NORMALIZATIONS:
            raise ValueError(f"normalization must be one of {NORMALIZATIONS}, got '{normalization}'")
        self.lookback = lookback
        self.horizon = horizon
        self.n_channels = n_channels
        self.normalization = normalization

    @property
    def n_groups(self) -> int:
        return self.n_channels

    @property
    def feature_dim(self) -> int:
        return self.lookback

    @property
    def group_outputs(self) -> int:
        return self.horizon

    def _levels(self, history: np.ndarray) -> np.ndarray:
        if self.normalization == "last":
            return history[-1]
        if self.normalization == "mean":
            return history.mean(axis=0)
        return np.zeros(history.shape[1])

    def extract(self, window: WindowSample) -> np.ndarray:
        history = window.history
        if history.shape != (self.lookback, self.n_channels):
            raise ShapeMismatch(
                f"Expected history {(self.lookback, self.n_channels)}, got {history.shape}"
            )
        return history.T - self._levels(history)[:, None]

    def reference(self, window: WindowSample) -> np.ndarray:
        return np.repeat(self._levels(window.history)[:, None], self.horizon, axis=1)

    def assemble(self, outputs: np.ndarray) -> np.ndarray:
        return np.asarray(outputs).T

    def split_targets(self, future: np.ndarray) -> np.ndarray:
        return np.asarray(future).T


def fit_linear_forecaster(
    windows: Sequence[WindowSample],
    ridge: float = 1e-4,
    normalization: str = "none",
) -> Forecaster:
    """
    Train one ridge head per channel on the given training windows.

    Args:
        windows: Training windows sharing L, T and M
        ridge: L2 penalty of each head
        normalization: Reference level removed from inputs ("none", "last", "mean")

    Returns:
        Forecaster with M heads of shape L×T
    """
    if not windows:
        raise EmptyInput("Cannot fit a forecaster without training windows")
    lookback, horizon, n_channels = windows[0].lookback, windows[0].horizon, windows[0].n_channels
    extractor = ChannelHistoryExtractor(lookback, horizon, n_channels, normalization)

    features, targets = training_arrays(extractor, windows)
    heads = []
    for channel in range(n_channels):
        heads.append(fit_head_least_squares(features[:, channel], targets[:, channel], ridge=ridge))
        LOGGER.debug("Fitted head for channel %d on %d windows", channel, len(windows))

    LOGGER.info(
        "Fitted linear forecaster: L=%d, T=%d, M=%d, ridge=%g, normalization=%s",
        lookback,
        horizon,
        n_channels,
        ridge,
        normalization,
    )
    return Forecaster(
        extractor=extractor,
        heads=tuple(heads),
        horizon=horizon,
        n_channels=n_channels,
        name="linear",
    )


def repeat_last_forecaster(lookback: int, horizon: int, n_channels: int) -> Forecaster:
    """A fixed linear model whose heads copy the last history value to every step."""
    weights = np.zeros((lookback, horizon))
    weights[-1, :] = 1.0
    head = PredictionHead(weights, np.zeros(horizon))
    return Forecaster(
        extractor=ChannelHistoryExtractor(lookback, horizon, n_channels),
        heads=tuple(head for _ in range(n_channels)),
        horizon=horizon,
        n_channels=n_channels,
        name="repeat-last",
    )
