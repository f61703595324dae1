"""Sample-level contextualized adaptation of a forecaster's prediction heads."""
from __future__ import annotations

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from src.common.errors import EmptyCandidates, EmptyInput, NonFiniteUpdate
from src.core.metrics import improvement_pct, mse_mae
from src.forecasters.base import Forecaster
from src.forecasters.head import epoch_steps, head_loss, sgd_epoch
from src.models.calibration import (
    AdaptationTrace,
    ContextualizedDataset,
    SelectionMode,
    SolidParams,
)
from src.models.series import WindowSample

LOGGER = logging.getLogger(__name__)

FALLBACK_POLICIES = ("base", "error")


def phase_difference(t: int, t_prime: int, T_star: int, circular: bool = False) -> float:
    """|(t mod T*) − (t' mod T*)| / T*, optionally wrapped around the period."""
    difference = abs((t % T_star) - (t_prime % T_star)) / T_star
    if circular:
        return min(difference, 1.0 - difference)
    return difference


class WindowPool:
    """
    Preceding windows available for selection, indexed by anchor.

    Features and targets of pool windows are extracted on first use and cached;
    the extractor is frozen so the cache never goes stale.
    """

    def __init__(self, windows: Sequence[WindowSample]) -> None:
        ordered = sorted(windows, key=lambda window: window.anchor_t)
        self.windows: List[WindowSample] = ordered
        self.anchors = np.array([window.anchor_t for window in ordered], dtype=np.int64)
        if self.anchors.size and np.any(np.diff(self.anchors) <= 0):
            raise ValueError("Pool anchors must be unique")
        self._position: Dict[int, int] = {int(anchor): i for i, anchor in enumerate(self.anchors)}
        self._feature_cache: Dict[int, Tuple[np.ndarray, np.ndarray]] = {}

    def __len__(self) -> int:
        return len(self.windows)

    def window(self, anchor: int) -> WindowSample:
        return self.windows[self._position[int(anchor)]]

    def anchors_between(self, low: int, high: int) -> np.ndarray:
        """Pool anchors in [low, high], ascending."""
        left = np.searchsorted(self.anchors, low, side="left")
        right = np.searchsorted(self.anchors, high, side="right")
        return self.anchors[left:right]

    def training_pair(self, model: Forecaster, anchor: int) -> Tuple[np.ndarray, np.ndarray]:
        """(G×d features, G×k targets) of one pool window."""
        cached = self._feature_cache.get(int(anchor))
        if cached is None:
            window = self.window(anchor)
            features = model.extractor.extract(window)
            targets = model.extractor.split_targets(window.future) - model.extractor.reference(window)
            cached = (features, targets)
            self._feature_cache[int(anchor)] = cached
        return cached


def candidate_anchors(
    t: int,
    pool: WindowPool,
    params: SolidParams,
    horizon: int,
) -> List[int]:
    """
    Preceding anchors passing the temporal and (unless disabled) phase filters.

    Keeps t' with t − λ_T ≤ t' ≤ t − T and phase difference < λ_P, ascending.
    """
    if params.mode is SelectionMode.NONE:
        return []
    in_range = pool.anchors_between(t - params.lambda_T, t - horizon)
    if params.mode is SelectionMode.TEMPORAL:
        return [int(anchor) for anchor in in_range]
    return [
        int(anchor)
        for anchor in in_range
        if phase_difference(t, int(anchor), params.T_star, params.circular_phase) < params.lambda_P
    ]


def rank_by_similarity(
    candidates: Sequence[int], pool: WindowPool, test_history: np.ndarray
) -> Tuple[List[int], List[float]]:
    """
    Order candidates by descending similarity (negative Euclidean distance).

    Ties go to the more recent anchor.
    """
    if not candidates:
        return [], []
    histories = np.stack([pool.window(anchor).history.reshape(-1) for anchor in candidates])
    distances = np.linalg.norm(histories - np.asarray(test_history).reshape(-1), axis=1)
    anchors = np.asarray(candidates, dtype=np.int64)
    order = np.lexsort((-anchors, distances))
    return [int(anchors[i]) for i in order], [float(-distances[i]) for i in order]


def select_contextualized(
    t: int,
    candidates: Sequence[int],
    pool: WindowPool,
    params: SolidParams,
    test_history: np.ndarray,
) -> ContextualizedDataset:
    """
    Build D_ctx: the top-λ_N candidates.

    In FULL mode candidates are ranked by similarity to the test history; the
    ablation modes (T, T+P) keep the λ_N most recent candidates instead.
    """
    if params.mode is SelectionMode.FULL:
        ranked, scores = rank_by_similarity(candidates, pool, test_history)
    else:
        ranked = sorted((int(anchor) for anchor in candidates), reverse=True)
        scores = [
            -float(np.linalg.norm(pool.window(anchor).history - test_history)) for anchor in ranked
        ]
    keep = min(params.lambda_N, len(ranked))
    chosen = ranked[:keep]
    return ContextualizedDataset(
        target_anchor=t,
        samples=[pool.window(anchor) for anchor in chosen],
        source_anchors=chosen,
        similarity_scores=scores[:keep],
        n_candidates=len(candidates),
    )


def adapt_and_predict(
    base_model: Forecaster,
    test_window: WindowSample,
    dctx: ContextualizedDataset,
    params: SolidParams,
    pool: Optional[WindowPool] = None,
    fallback_policy: str = "base",
) -> Tuple[np.ndarray, AdaptationTrace]:
    """
    Fine-tune copies of the heads on D_ctx for one epoch and forecast.

    The base model is never modified. With an empty D_ctx, or when an update
    turns non-finite, the base forecast is returned and the trace is flagged
    (``fallback_policy="error"`` raises instead).

    Args:
        base_model: Trained forecaster
        test_window: Sample to forecast (its future is only used for the trace)
        dctx: Selected preceding windows
        params: Learning rate and batch size
        pool: Pool to read cached features from (optional)
        fallback_policy: "base" or "error"

    Returns:
        (T×M forecast, AdaptationTrace)
    """
    if fallback_policy not in FALLBACK_POLICIES:
        raise ValueError(f"fallback_policy must be one of {FALLBACK_POLICIES}")

    base_forecast = base_model.predict(test_window)
    trace = AdaptationTrace(
        anchor=test_window.anchor_t,
        selected_anchors=list(dctx.source_anchors),
        n_candidates=dctx.n_candidates,
    )

    if dctx.is_empty:
        if fallback_policy == "error":
            raise EmptyCandidates(f"No contextualized samples for anchor {test_window.anchor_t}")
        trace.fallback = True
        trace.fallback_reason = "empty"
        return _finish(trace, base_forecast, base_forecast, test_window)

    if pool is not None:
        pairs = [pool.training_pair(base_model, anchor) for anchor in dctx.source_anchors]
        features = np.stack([pair[0] for pair in pairs])
        targets = np.stack([pair[1] for pair in pairs])
    else:
        features, targets = base_model.training_arrays(dctx.samples)

    adapted_heads = []
    pre_losses = []
    post_losses = []
    for group, head in enumerate(base_model.heads):
        group_features = features[:, group, :]
        group_targets = targets[:, group, :]
        pre_losses.append(head_loss(head, group_features, group_targets))
        updated = sgd_epoch(head, group_features, group_targets, params.lr, params.batch_size)
        if not updated.is_finite:
            if fallback_policy == "error":
                raise NonFiniteUpdate(f"Head {group} diverged for anchor {test_window.anchor_t}")
            LOGGER.warning("Non-finite update at anchor %d; using base forecast", test_window.anchor_t)
            trace.fallback = True
            trace.fallback_reason = "non_finite"
            trace.steps = epoch_steps(len(dctx), params.batch_size)
            return _finish(trace, base_forecast, base_forecast, test_window)
        adapted_heads.append(updated)
        post_losses.append(head_loss(updated, group_features, group_targets))

    trace.steps = epoch_steps(len(dctx), params.batch_size)
    trace.pre_loss = float(np.mean(pre_losses))
    trace.post_loss = float(np.mean(post_losses))
    adapted = base_model.predict(test_window, heads=adapted_heads)
    LOGGER.debug(
        "Anchor %d: %d samples, loss %.4g -> %.4g",
        test_window.anchor_t,
        len(dctx),
        trace.pre_loss,
        trace.post_loss,
    )
    return _finish(trace, base_forecast, adapted, test_window)


def _finish(
    trace: AdaptationTrace,
    base_forecast: np.ndarray,
    adapted: np.ndarray,
    window: WindowSample,
) -> Tuple[np.ndarray, AdaptationTrace]:
    trace.base_mse = float(np.mean((base_forecast - window.future) ** 2))
    trace.adapted_mse = float(np.mean((adapted - window.future) ** 2))
    return adapted, trace


@dataclass
class SolidResult:
    """Forecasts, metrics and traces of one adaptation run."""

    anchors: List[int]
    base_forecasts: np.ndarray
    adapted_forecasts: np.ndarray
    truths: np.ndarray
    traces: List[AdaptationTrace] = field(default_factory=list)
    base_seconds: float = 0.0
    adapt_seconds: float = 0.0

    @property
    def base_metrics(self) -> Tuple[float, float]:
        return mse_mae(list(self.base_forecasts), list(self.truths))

    @property
    def adapted_metrics(self) -> Tuple[float, float]:
        return mse_mae(list(self.adapted_forecasts), list(self.truths))

    @property
    def improvements(self) -> Tuple[float, float]:
        """(MSE, MAE) improvement in percent."""
        base_mse, base_mae = self.base_metrics
        adapted_mse, adapted_mae = self.adapted_metrics
        return improvement_pct(base_mse, adapted_mse), improvement_pct(base_mae, adapted_mae)

    @property
    def fallback_count(self) -> int:
        return sum(1 for trace in self.traces if trace.fallback)

    @property
    def selection_seconds(self) -> float:
        return float(sum(trace.selection_seconds for trace in self.traces))

    @property
    def finetune_seconds(self) -> float:
        return float(sum(trace.finetune_seconds for trace in self.traces))

    @property
    def overhead_ratio(self) -> float:
        """Adapted inference time relative to baseline inference time."""
        if self.base_seconds <= 0:
            return float("nan")
        return (self.base_seconds + self.adapt_seconds) / self.base_seconds


def adapt_one(
    base_model: Forecaster,
    window: WindowSample,
    pool: WindowPool,
    params: SolidParams,
    fallback_policy: str = "base",
) -> Tuple[np.ndarray, AdaptationTrace]:
    """Select D_ctx for one window and adapt to it."""
    started = time.perf_counter()
    candidates = candidate_anchors(window.anchor_t, pool, params, base_model.horizon)
    dctx = select_contextualized(window.anchor_t, candidates, pool, params, window.history)
    selected = time.perf_counter()
    forecast, trace = adapt_and_predict(base_model, window, dctx, params, pool=pool, fallback_policy=fallback_policy)
    trace.selection_seconds = selected - started
    trace.finetune_seconds = time.perf_counter() - selected
    return forecast, trace


def run_solid(
    base_model: Forecaster,
    test_windows: Sequence[WindowSample],
    preceding_pool: WindowPool,
    params: SolidParams,
    fallback_policy: str = "base",
    workers: int = 1,
) -> SolidResult:
    """
    Adapt independently to every test window.

    Only pool windows with t' + T ≤ t are ever eligible for the sample at t,
    so a pool that also contains the test windows is used causally.

    Args:
        base_model: Trained forecaster (never modified)
        test_windows: Windows to forecast
        preceding_pool: Candidate windows
        params: SOLID hyperparameters
        fallback_policy: "base" or "error"
        workers: Threads for per-sample adaptation; results keep input order

    Returns:
        SolidResult
    """
    if not test_windows:
        raise EmptyInput("No test windows to adapt to")
    params.check_horizon(base_model.horizon)

    started = time.perf_counter()
    base_forecasts = np.stack([base_model.predict(window) for window in test_windows])
    base_seconds = time.perf_counter() - started

    started = time.perf_counter()
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as executor:
            outcomes = list(
                executor.map(
                    lambda window: adapt_one(base_model, window, preceding_pool, params, fallback_policy),
                    test_windows,
                )
            )
    else:
        outcomes = [adapt_one(base_model, window, preceding_pool, params, fallback_policy) for window in test_windows]
    adapt_seconds = time.perf_counter() - started

    result = SolidResult(
        anchors=[window.anchor_t for window in test_windows],
        base_forecasts=base_forecasts,
        adapted_forecasts=np.stack([outcome[0] for outcome in outcomes]),
        truths=np.stack([window.future for window in test_windows]),
        traces=[outcome[1] for outcome in outcomes],
        base_seconds=base_seconds,
        adapt_seconds=adapt_seconds,
    )
    base_mse, base_mae = result.base_metrics
    adapted_mse, adapted_mae = result.adapted_metrics
    LOGGER.info(
        "SOLID over %d samples: MSE %.4f -> %.4f, MAE %.4f -> %.4f (%d fallbacks)",
        len(test_windows),
        base_mse,
        adapted_mse,
        base_mae,
        adapted_mae,
        result.fallback_count,
    )
    return result
