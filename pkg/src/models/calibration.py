"""Domain types for CDS detection and sample-level adaptation."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from enum import Enum
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from src.models.series import WindowSample

SIGMA_FLOOR = 1e-8


class ContextKind(Enum):
    """Observed contexts a residual can be conditioned on."""

    PERIODIC_PHASE = "periodic_phase"
    TEMPORAL_SEGMENT = "temporal_segment"
    CUSTOM = "custom"


@dataclass(frozen=True)
class ContextAssignment:
    """A context label c_t in [0, K) for every anchor."""

    kind: ContextKind
    num_contexts: int
    anchors: Tuple[int, ...]
    labels: Tuple[int, ...]

    def __post_init__(self) -> None:
        if self.num_contexts < 1:
            raise ValueError(f"Need at least one context, got {self.num_contexts}")
        if len(self.anchors) != len(self.labels):
            raise ValueError("Every anchor needs exactly one label")
        for label in self.labels:
            if not 0 <= label < self.num_contexts:
                raise ValueError(f"Label {label} outside [0, {self.num_contexts})")

    def label_of(self) -> Dict[int, int]:
        """Map anchor → label."""
        return dict(zip(self.anchors, self.labels))


@dataclass(frozen=True)
class GaussianSummary:
    """Mean, floored standard deviation and sample count of a residual set."""

    mean: float
    std: float
    count: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "std", max(float(self.std), SIGMA_FLOOR))
        object.__setattr__(self, "mean", float(self.mean))
        if self.count < 1:
            raise ValueError("A Gaussian summary needs at least one sample")

    @classmethod
    def from_samples(cls, samples: np.ndarray) -> GaussianSummary:
        """Fit with population normalisation (divide by n)."""
        samples = np.asarray(samples, dtype=np.float64).reshape(-1)
        return cls(mean=float(samples.mean()), std=float(samples.std()), count=int(samples.size))


@dataclass(frozen=True)
class ContextTerm:
    """Contribution of one context to the detector score."""

    context: int
    summary: GaussianSummary
    weight: float
    kl: float


@dataclass
class DetectorReport:
    """Reconditionor output: δ and its per-context breakdown."""

    kind: ContextKind
    num_contexts: int
    delta: float
    marginal: GaussianSummary
    per_context: List[ContextTerm] = field(default_factory=list)
    dropped_contexts: List[int] = field(default_factory=list)
    pooling: str = "elementwise"
    per_channel_delta: Optional[List[float]] = None

    @property
    def log10_delta(self) -> float:
        """log10 δ; -inf when δ is exactly zero."""
        return math.log10(self.delta) if self.delta > 0 else float("-inf")

    @property
    def per_channel_mean_delta(self) -> Optional[float]:
        """Equal-weight mean of the per-channel δ values, skipping NaN channels."""
        if self.per_channel_delta is None:
            return None
        values = np.asarray(self.per_channel_delta, dtype=np.float64)
        values = values[~np.isnan(values)]
        return float(values.mean()) if values.size else float("nan")

    def is_strong(self, threshold: float = -3.2) -> bool:
        """Whether log10 δ reaches the strong-CDS threshold."""
        return self.log10_delta >= threshold

    def to_record(self, threshold: Optional[float] = None) -> Dict[str, Any]:
        """Machine-readable summary."""
        record: Dict[str, Any] = {
            "delta": self.delta,
            "log10_delta": self.log10_delta,
            "kind": self.kind.value,
            "K": self.num_contexts,
            "dropped_contexts": list(self.dropped_contexts),
            "pooling": self.pooling,
        }
        if self.per_channel_delta is not None:
            record["per_channel_delta"] = list(self.per_channel_delta)
            record["per_channel_mean_delta"] = self.per_channel_mean_delta
        if threshold is not None:
            record["threshold"] = threshold
            record["classification"] = "strong" if self.is_strong(threshold) else "weak"
        return record


@dataclass(frozen=True)
class PeriodEstimate:
    """Dominant period T* found from the aggregated amplitude spectrum."""

    period: int
    dominant_frequency_index: int
    aggregate_amplitude: float

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


class SelectionMode(Enum):
    """How preceding samples are chosen for adaptation."""

    NONE = "none"
    TEMPORAL = "T"
    TEMPORAL_PHASE = "T+P"
    FULL = "T+P+S"


@dataclass(frozen=True)
class SolidParams:
    """Hyperparameters of sample-level contextualized adaptation."""

    lambda_T: int
    lambda_P: float
    lambda_N: int
    lr: float
    T_star: int
    batch_size: Optional[int] = None
    circular_phase: bool = False
    mode: SelectionMode = SelectionMode.FULL

    def __post_init__(self) -> None:
        if not 0.0 < self.lambda_P <= 1.0:
            raise ValueError(f"lambda_P must lie in (0, 1], got {self.lambda_P}")
        if self.lambda_N < 1:
            raise ValueError(f"lambda_N must be at least 1, got {self.lambda_N}")
        if self.lr < 0:
            raise ValueError(f"lr must be non-negative, got {self.lr}")
        if self.T_star < 1:
            raise ValueError(f"T_star must be at least 1, got {self.T_star}")
        if self.batch_size is not None and self.batch_size < 1:
            raise ValueError(f"batch_size must be positive, got {self.batch_size}")

    def check_horizon(self, horizon: int) -> None:
        """lambda_T below the horizon leaves no admissible candidate."""
        if self.lambda_T < horizon:
            raise ValueError(f"lambda_T={self.lambda_T} is smaller than the horizon T={horizon}")

    def to_dict(self) -> Dict[str, Any]:
        record = asdict(self)
        record["mode"] = self.mode.value
        return record


@dataclass
class ContextualizedDataset:
    """Preceding windows selected for one test sample (D_ctx)."""

    target_anchor: int
    samples: List[WindowSample] = field(default_factory=list)
    source_anchors: List[int] = field(default_factory=list)
    similarity_scores: List[float] = field(default_factory=list)
    n_candidates: int = 0

    @property
    def is_empty(self) -> bool:
        return not self.samples

    def __len__(self) -> int:
        return len(self.samples)

    def head(self, n: int) -> ContextualizedDataset:
        """The n most similar samples."""
        return ContextualizedDataset(
            target_anchor=self.target_anchor,
            samples=self.samples[:n],
            source_anchors=self.source_anchors[:n],
            similarity_scores=self.similarity_scores[:n],
            n_candidates=self.n_candidates,
        )


@dataclass
class AdaptationTrace:
    """What happened while adapting to one test sample."""

    anchor: int
    selected_anchors: List[int] = field(default_factory=list)
    n_candidates: int = 0
    pre_loss: Optional[float] = None
    post_loss: Optional[float] = None
    steps: int = 0
    fallback: bool = False
    fallback_reason: Optional[str] = None
    base_mse: Optional[float] = None
    adapted_mse: Optional[float] = None
    selection_seconds: float = 0.0
    finetune_seconds: float = 0.0

    @property
    def n_selected(self) -> int:
        return len(self.selected_anchors)

    def violates_causality(self, horizon: int) -> bool:
        """True if any selected window's future reaches the test anchor."""
        return any(anchor + horizon > self.anchor for anchor in self.selected_anchors)
