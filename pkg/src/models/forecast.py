"""Prediction heads and externally computed latent datasets."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Dict, List

import numpy as np


def _frozen(array: np.ndarray) -> np.ndarray:
    array = np.array(array, dtype=np.float64, copy=True)
    array.setflags(write=False)
    return array


@dataclass(frozen=True)
class PredictionHead:
    """Affine map from d features to k outputs: ``features @ weights + bias``."""

    weights: np.ndarray
    bias: np.ndarray

    def __post_init__(self) -> None:
        weights = np.asarray(self.weights, dtype=np.float64)
        bias = np.asarray(self.bias, dtype=np.float64).reshape(-1)
        if weights.ndim != 2:
            raise ValueError(f"Head weights must be 2-D, got shape {weights.shape}")
        if bias.shape[0] != weights.shape[1]:
            raise ValueError(
                f"Bias length {bias.shape[0]} does not match {weights.shape[1]} outputs"
            )
        object.__setattr__(self, "weights", _frozen(weights))
        object.__setattr__(self, "bias", _frozen(bias))

    @classmethod
    def zeros(cls, n_features: int, n_outputs: int) -> PredictionHead:
        """A head that always predicts zero."""
        return cls(np.zeros((n_features, n_outputs)), np.zeros(n_outputs))

    @property
    def n_features(self) -> int:
        return int(self.weights.shape[0])

    @property
    def n_outputs(self) -> int:
        return int(self.weights.shape[1])

    @property
    def is_finite(self) -> bool:
        """Whether every weight and bias entry is finite."""
        return bool(np.all(np.isfinite(self.weights)) and np.all(np.isfinite(self.bias)))

    def apply(self, features: np.ndarray) -> np.ndarray:
        """Evaluate the head on a feature vector or an n×d feature matrix."""
        return np.asarray(features, dtype=np.float64) @ self.weights + self.bias

    def __add__(self, other: PredictionHead) -> PredictionHead:
        return PredictionHead(self.weights + other.weights, self.bias + other.bias)

    def to_dict(self) -> Dict[str, Any]:
        """Convert to plain lists."""
        return {"weights": self.weights.tolist(), "bias": self.bias.tolist()}


@dataclass
class LatentRecord:
    """One exported (anchor, feature, future) triple."""

    anchor_t: int
    feature: np.ndarray
    future: np.ndarray


@dataclass
class LatentDataset:
    """Features produced by a frozen external extractor, keyed by anchor."""

    model_name: str
    d: int
    T: int
    M: int
    records: List[LatentRecord] = field(default_factory=list)

    @property
    def count(self) -> int:
        return len(self.records)

    @property
    def anchors(self) -> np.ndarray:
        return np.array([record.anchor_t for record in self.records], dtype=np.int64)

    def feature_matrix(self) -> np.ndarray:
        """All features as a count×d matrix."""
        if not self.records:
            return np.zeros((0, self.d))
        return np.stack([record.feature for record in self.records])

    def future_matrix(self) -> np.ndarray:
        """All futures flattened row-major as a count×(T·M) matrix."""
        if not self.records:
            return np.zeros((0, self.T * self.M))
        return np.stack([np.asarray(record.future).reshape(-1) for record in self.records])
