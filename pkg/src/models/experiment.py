"""Experiment configuration and report types."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, fields
from typing import Any, Dict, List, Optional, Tuple

from src.common.errors import ConfigError
from src.models.series import SplitSpec

SYNTHETIC_PREFIX = "synthetic:"
SYNTHETIC_KINDS = ("phase", "iid", "segment")


@dataclass
class ExperimentConfig:
    """Everything one calibration run needs; every field is also a config-file key."""

    dataset: str = "synthetic:phase"
    preset: Optional[str] = None
    lookback: int = 336
    horizon: int = 96
    split: Tuple[float, ...] = (0.7, 0.1, 0.2)
    threshold: float = -3.2
    lambda_t: Tuple[int, ...] = (500, 1000, 2000)
    lambda_p: Tuple[float, ...] = (0.02, 0.05, 0.1)
    lambda_n: Tuple[int, ...] = (5, 10, 20)
    lr_ratio: Tuple[float, ...] = (5.0, 10.0, 20.0, 50.0)
    seed: int = 0
    output_dir: str = "results"
    ridge: float = 1e-4
    train_lr: float = 0.005
    batch_size: Optional[int] = None
    stride: int = 1
    num_segments: int = 5
    circular_phase: bool = False
    train_only_pool: bool = False
    fallback_policy: str = "base"
    grid_stride: int = 1
    workers: int = 1
    latents: Optional[str] = None
    period: Optional[int] = None
    normalization: str = "none"
    pooling: str = "elementwise"
    cache_dir: str = "assets/datasets"
    ablation: bool = False
    synthetic_length: int = 6000
    synthetic_period: int = 24
    synthetic_magnitude: float = 1.0
    synthetic_noise: float = 0.5

    def __post_init__(self) -> None:
        self.validate()

    def validate(self) -> None:
        """Raise ConfigError on the first inconsistent value."""
        if self.lookback < 1 or self.horizon < 1:
            raise ConfigError(f"lookback and horizon must be positive (got {self.lookback}, {self.horizon})")
        if not math.isfinite(self.threshold):
            raise ConfigError("threshold must be finite")
        for name in ("lambda_t", "lambda_p", "lambda_n", "lr_ratio"):
            if not getattr(self, name):
                raise ConfigError(f"Grid '{name}' must not be empty")
        if any(value <= 0 or value > 1 for value in self.lambda_p):
            raise ConfigError(f"lambda_p values must lie in (0, 1], got {self.lambda_p}")
        if any(value < 1 for value in self.lambda_n):
            raise ConfigError(f"lambda_n values must be at least 1, got {self.lambda_n}")
        if any(value < 0 for value in self.lr_ratio):
            raise ConfigError(f"lr_ratio values must be non-negative, got {self.lr_ratio}")
        try:
            SplitSpec(tuple(self.split))
        except ValueError as error:
            raise ConfigError(str(error)) from error
        if self.fallback_policy not in ("base", "error"):
            raise ConfigError(f"fallback_policy must be 'base' or 'error', got '{self.fallback_policy}'")
        if self.pooling not in ("elementwise", "per_horizon"):
            raise ConfigError(f"Unknown pooling '{self.pooling}'")
        if self.normalization not in ("none", "last", "mean"):
            raise ConfigError(f"Unknown normalization '{self.normalization}'")
        if self.stride < 1 or self.grid_stride < 1 or self.workers < 1 or self.num_segments < 1:
            raise ConfigError("stride, grid_stride, workers and num_segments must be positive")
        if self.batch_size is not None and self.batch_size < 1:
            raise ConfigError(f"batch_size must be positive, got {self.batch_size}")
        if self.period is not None and self.period < 1:
            raise ConfigError(f"period must be positive, got {self.period}")
        if self.is_synthetic and self.synthetic_kind not in SYNTHETIC_KINDS:
            raise ConfigError(f"Unknown synthetic dataset '{self.dataset}'; expected one of {SYNTHETIC_KINDS}")

    @property
    def split_spec(self) -> SplitSpec:
        return SplitSpec(tuple(self.split))

    @property
    def is_synthetic(self) -> bool:
        return self.dataset.startswith(SYNTHETIC_PREFIX)

    @property
    def synthetic_kind(self) -> str:
        return self.dataset[len(SYNTHETIC_PREFIX) :]

    @property
    def grid_size(self) -> int:
        return len(self.lambda_t) * len(self.lambda_p) * len(self.lambda_n) * len(self.lr_ratio)

    @classmethod
    def keys(cls) -> List[str]:
        return [item.name for item in fields(cls)]

    def to_dict(self) -> Dict[str, Any]:
        record = asdict(self)
        for key, value in record.items():
            if isinstance(value, tuple):
                record[key] = list(value)
        return record


@dataclass
class SampleRow:
    """Per-test-sample outcome written to the per-sample CSV."""

    anchor: int
    base_mse: float
    adapted_mse: float
    n_selected: int
    fallback: bool


@dataclass
class ExperimentReport:
    """Aggregate outcome of one run; runtime and samples are stored beside it."""

    dataset: str
    model: str
    lookback: int
    horizon: int
    T_star: int
    delta_p: float
    log10_delta_p: float
    delta_t: float
    log10_delta_t: float
    threshold: float
    baseline_mse: Optional[float] = None
    baseline_mae: Optional[float] = None
    adapted_mse: Optional[float] = None
    adapted_mae: Optional[float] = None
    mse_improvement: Optional[float] = None
    mae_improvement: Optional[float] = None
    params: Dict[str, Any] = field(default_factory=dict)
    validation_mse: Optional[float] = None
    grid_evaluations: int = 0
    n_test: int = 0
    fallback_count: int = 0
    mean_steps: float = 0.0
    dropped_contexts_p: List[int] = field(default_factory=list)
    per_channel_delta_p: Optional[List[float]] = None
    ablation: Dict[str, Dict[str, float]] = field(default_factory=dict)
    failed_stage: Optional[str] = None
    error: Optional[str] = None
    samples: List[SampleRow] = field(default_factory=list, repr=False)
    runtime: Dict[str, float] = field(default_factory=dict, repr=False)

    @property
    def cds_strong(self) -> bool:
        """log10 δ_P reaches the threshold."""
        return self.log10_delta_p >= self.threshold

    @property
    def improvement_above_1pct(self) -> bool:
        return self.mae_improvement is not None and self.mae_improvement > 1.0

    @property
    def complete(self) -> bool:
        return self.failed_stage is None

    def to_dict(self) -> Dict[str, Any]:
        """JSON body of the report (samples and runtime live in their own files)."""
        record = asdict(self)
        record.pop("samples")
        record.pop("runtime")
        record["cds_strong"] = self.cds_strong
        record["improvement_above_1pct"] = self.improvement_above_1pct
        record["sample_rows"] = len(self.samples)
        return record

    @classmethod
    def from_dict(
        cls,
        record: Dict[str, Any],
        samples: Optional[List[SampleRow]] = None,
        runtime: Optional[Dict[str, float]] = None,
    ) -> ExperimentReport:
        known = {item.name for item in fields(cls)} - {"samples", "runtime"}
        values = {key: value for key, value in record.items() if key in known}
        # δ = 0 is written as a null log10
        for key in ("log10_delta_p", "log10_delta_t"):
            if key in values and values[key] is None:
                values[key] = float("-inf")
        return cls(**values, samples=list(samples or []), runtime=dict(runtime or {}))
