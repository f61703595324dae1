"""Residual-based detector of context-driven distribution shift.

The score δ is the mutual information between prediction residuals and an
observed context, with every residual population approximated by a Gaussian:
δ = Σ_c (n_c / n) · KL(N(μ_c, σ_c²) || N(μ, σ²)).
"""
from __future__ import annotations

import logging
import math
from typing import List, Optional, Sequence, Tuple

import numpy as np

from src.common.errors import EmptyInput, InsufficientData
from src.forecasters.base import Forecaster
from src.models.calibration import (
    ContextAssignment,
    ContextKind,
    ContextTerm,
    DetectorReport,
    GaussianSummary,
)
from src.models.series import WindowSample

LOGGER = logging.getLogger(__name__)

POOLINGS = ("elementwise", "per_horizon")
MIN_CONTEXT_ENTRIES = 2


def phase_context(anchors: Sequence[int], T_star: int) -> ContextAssignment:
    """Label every anchor with its periodic phase t mod T*."""
    if T_star < 1:
        raise ValueError(f"T_star must be at least 1, got {T_star}")
    anchors = tuple(int(anchor) for anchor in anchors)
    return ContextAssignment(
        kind=ContextKind.PERIODIC_PHASE,
        num_contexts=T_star,
        anchors=anchors,
        labels=tuple(anchor % T_star for anchor in anchors),
    )


def segment_context(anchors: Sequence[int], num_segments: int = 5) -> ContextAssignment:
    """
    Label anchors by contiguous block, in index order.

    Blocks have floor(n / num_segments) anchors; the last block also takes the
    remainder.
    """
    if num_segments < 1:
        raise ValueError(f"num_segments must be at least 1, got {num_segments}")
    anchors = tuple(int(anchor) for anchor in anchors)
    if not anchors:
        raise EmptyInput("Cannot segment an empty anchor list")

    size = len(anchors) // num_segments
    labels = []
    for index in range(len(anchors)):
        block = index // size if size else num_segments - 1
        labels.append(min(block, num_segments - 1))
    return ContextAssignment(
        kind=ContextKind.TEMPORAL_SEGMENT,
        num_contexts=num_segments,
        anchors=anchors,
        labels=tuple(labels),
    )


def residual_matrix(model: Forecaster, windows: Sequence[WindowSample]) -> Tuple[np.ndarray, np.ndarray]:
    """
    Residuals prediction − truth for every window.

    Returns:
        (anchors, n×T×M residual array)
    """
    if not windows:
        raise EmptyInput("No windows to compute residuals on")
    anchors = np.array([window.anchor_t for window in windows], dtype=np.int64)
    residuals = np.stack([model.predict(window) - window.future for window in windows])
    return anchors, residuals


def residual_population(model: Forecaster, windows: Sequence[WindowSample]) -> List[Tuple[int, np.ndarray]]:
    """Per window, the anchor and its T·M residuals flattened row-major."""
    anchors, residuals = residual_matrix(model, windows)
    return [(int(anchor), residual.reshape(-1)) for anchor, residual in zip(anchors, residuals)]


def kl_gaussian(p: GaussianSummary, q: GaussianSummary) -> float:
    """KL(N(μ_p, σ_p²) || N(μ_q, σ_q²)) in nats."""
    value = (
        math.log(q.std / p.std)
        + (p.std**2 + (p.mean - q.mean) ** 2) / (2.0 * q.std**2)
        - 0.5
    )
    return max(value, 0.0)


def _labels_for(anchors: np.ndarray, context: ContextAssignment) -> np.ndarray:
    if len(context.anchors) == len(anchors) and np.array_equal(np.asarray(context.anchors), anchors):
        return np.asarray(context.labels, dtype=np.int64)
    lookup = context.label_of()
    try:
        return np.array([lookup[int(anchor)] for anchor in anchors], dtype=np.int64)
    except KeyError as exc:
        raise InsufficientData(f"Anchor {exc.args[0]} has no context label") from exc


def _score_population(
    residuals: np.ndarray, labels: np.ndarray, num_contexts: int
) -> Tuple[float, GaussianSummary, List[ContextTerm], List[int]]:
    """δ for an n×E residual array where each window contributes E entries."""
    marginal = GaussianSummary.from_samples(residuals)
    summaries = []
    dropped = []
    for context in range(num_contexts):
        entries = residuals[labels == context]
        if entries.size < MIN_CONTEXT_ENTRIES:
            dropped.append(context)
            continue
        summaries.append((context, GaussianSummary.from_samples(entries)))

    if not summaries:
        raise InsufficientData("Every context has fewer than two residual entries")

    total = sum(summary.count for _, summary in summaries)
    terms = [
        ContextTerm(
            context=context,
            summary=summary,
            weight=summary.count / total,
            kl=kl_gaussian(summary, marginal),
        )
        for context, summary in summaries
    ]
    delta = max(sum(term.weight * term.kl for term in terms), 0.0)
    return delta, marginal, terms, dropped


def score_residuals(
    anchors: np.ndarray,
    residuals: np.ndarray,
    context: ContextAssignment,
    pooling: str = "elementwise",
    per_channel: bool = False,
) -> DetectorReport:
    """
    Compute δ from precomputed residuals.

    Args:
        anchors: Window anchors (n)
        residuals: n×T×M residuals (prediction − truth)
        context: Labels for the anchors
        pooling: "elementwise" pools all T·M entries into one population;
            "per_horizon" scores each horizon step separately and averages
        per_channel: Also report δ for each channel separately

    Returns:
        DetectorReport
    """
    if pooling not in POOLINGS:
        raise ValueError(f"pooling must be one of {POOLINGS}, got '{pooling}'")
    anchors = np.asarray(anchors, dtype=np.int64)
    residuals = np.asarray(residuals, dtype=np.float64)
    if residuals.ndim == 2:
        residuals = residuals[:, :, None]
    if residuals.size < 2:
        raise InsufficientData("Need at least two residual entries")

    labels = _labels_for(anchors, context)
    n = residuals.shape[0]
    flat = residuals.reshape(n, -1)

    delta, marginal, terms, dropped = _score_population(flat, labels, context.num_contexts)

    if pooling == "per_horizon":
        per_step = [
            _score_population(residuals[:, step, :], labels, context.num_contexts)
            for step in range(residuals.shape[1])
        ]
        by_context = [{t.context: t.kl for t in step[2]} for step in per_step]
        step_kl = {}
        for term in terms:
            step_kl[term.context] = float(np.mean([kls.get(term.context, 0.0) for kls in by_context]))
        terms = [
            ContextTerm(context=term.context, summary=term.summary, weight=term.weight, kl=step_kl[term.context])
            for term in terms
        ]
        delta = max(sum(term.weight * term.kl for term in terms), 0.0)

    channel_deltas: Optional[List[float]] = None
    if per_channel:
        channel_deltas = []
        for channel in range(residuals.shape[2]):
            try:
                channel_deltas.append(_score_population(residuals[:, :, channel], labels, context.num_contexts)[0])
            except InsufficientData:
                channel_deltas.append(float("nan"))

    if dropped:
        LOGGER.warning(
            "Dropped %d of %d %s contexts with fewer than %d residual entries",
            len(dropped),
            context.num_contexts,
            context.kind.value,
            MIN_CONTEXT_ENTRIES,
        )
    for term in terms:
        LOGGER.debug(
            "Context %d: mu=%.4g sigma=%.4g n=%d weight=%.4f KL=%.4g",
            term.context,
            term.summary.mean,
            term.summary.std,
            term.summary.count,
            term.weight,
            term.kl,
        )

    report = DetectorReport(
        kind=context.kind,
        num_contexts=context.num_contexts,
        delta=delta,
        marginal=marginal,
        per_context=terms,
        dropped_contexts=dropped,
        pooling=pooling,
        per_channel_delta=channel_deltas,
    )
    LOGGER.info(
        "Reconditionor %s (K=%d): delta=%.4g, log10=%.3f",
        context.kind.value,
        context.num_contexts,
        report.delta,
        report.log10_delta,
    )
    return report


def reconditionor_score(
    model: Forecaster,
    train_windows: Sequence[WindowSample],
    context: ContextAssignment,
    pooling: str = "elementwise",
    per_channel: bool = False,
) -> DetectorReport:
    """Score a model's susceptibility to CDS on its training windows."""
    anchors, residuals = residual_matrix(model, train_windows)
    return score_residuals(anchors, residuals, context, pooling=pooling, per_channel=per_channel)
