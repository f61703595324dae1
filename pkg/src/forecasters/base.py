"""Forecaster contract: a frozen feature extractor topped by linear heads."""
from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from src.common.errors import ShapeMismatch
from src.models.forecast import PredictionHead
from src.models.series import WindowSample


class FeatureExtractor(ABC):
    """
    Maps a window's history to features for each head group.

    A model may split its output across several heads (one per channel for a
    channel-independent model); group g produces ``group_outputs`` values from
    a length ``feature_dim`` feature row. Implementations must be deterministic
    and never change once a model is built.
    """

    @property
    @abstractmethod
    def n_groups(self) -> int:
        """Number of head groups G."""

    @property
    @abstractmethod
    def feature_dim(self) -> int:
        """Feature length d per group."""

    @property
    @abstractmethod
    def group_outputs(self) -> int:
        """Outputs k per group."""

    @abstractmethod
    def extract(self, window: WindowSample) -> np.ndarray:
        """Return the G×d features for ``window``."""

    @abstractmethod
    def assemble(self, outputs: np.ndarray) -> np.ndarray:
        """Turn G×k head outputs into a T×M forecast."""

    @abstractmethod
    def split_targets(self, future: np.ndarray) -> np.ndarray:
        """Turn a T×M future into G×k head targets."""

    def reference(self, window: WindowSample) -> np.ndarray:
        """Additive G×k offset applied after the heads (zero by default)."""
        return np.zeros((self.n_groups, self.group_outputs))


@dataclass(frozen=True)
class Forecaster:
    """f = h ∘ g: an extractor plus one prediction head per group."""

    extractor: FeatureExtractor
    heads: Tuple[PredictionHead, ...]
    horizon: int
    n_channels: int
    name: str = "forecaster"

    def __post_init__(self) -> None:
        heads = tuple(self.heads)
        if len(heads) != self.extractor.n_groups:
            raise ShapeMismatch(
                f"Extractor has {self.extractor.n_groups} groups but {len(heads)} heads were given"
            )
        for head in heads:
            if head.n_features != self.extractor.feature_dim or head.n_outputs != self.extractor.group_outputs:
                raise ShapeMismatch(
                    f"Head {head.n_features}→{head.n_outputs} does not fit extractor "
                    f"{self.extractor.feature_dim}→{self.extractor.group_outputs}"
                )
        object.__setattr__(self, "heads", heads)

    def predict(self, window: WindowSample, heads: Optional[Sequence[PredictionHead]] = None) -> np.ndarray:
        """Forecast the T×M future of ``window``."""
        return forecast(self.extractor, self.heads if heads is None else heads, window)

    def predict_many(self, windows: Sequence[WindowSample]) -> np.ndarray:
        """Forecast a batch of windows into an n×T×M array."""
        return np.stack([self.predict(window) for window in windows])

    def training_arrays(self, windows: Sequence[WindowSample]) -> Tuple[np.ndarray, np.ndarray]:
        """Features and reference-adjusted targets under this model's extractor."""
        return training_arrays(self.extractor, windows)


def training_arrays(extractor: FeatureExtractor, windows: Sequence[WindowSample]) -> Tuple[np.ndarray, np.ndarray]:
    """
    Features and reference-adjusted head targets for a set of windows.

    Returns:
        (n×G×d features, n×G×k targets)
    """
    features = np.stack([extractor.extract(window) for window in windows])
    targets = np.stack(
        [extractor.split_targets(window.future) - extractor.reference(window) for window in windows]
    )
    return features, targets


def forecast(
    extractor: FeatureExtractor,
    heads: Sequence[PredictionHead],
    window: WindowSample,
) -> np.ndarray:
    """
    Apply heads to extracted features and assemble a T×M forecast.

    Raises:
        ShapeMismatch: if the heads do not fit the extractor's features
    """
    features = extractor.extract(window)
    if features.shape != (extractor.n_groups, extractor.feature_dim) or len(heads) != extractor.n_groups:
        raise ShapeMismatch(
            f"Features {features.shape} do not match {len(heads)} heads of width {extractor.feature_dim}"
        )
    try:
        outputs = np.stack([head.apply(row) for head, row in zip(heads, features)])
    except ValueError as exc:
        raise ShapeMismatch(str(exc)) from exc
    return extractor.assemble(outputs + extractor.reference(window))
