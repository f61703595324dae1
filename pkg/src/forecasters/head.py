"""Closed-form and gradient training of linear prediction heads."""
from __future__ import annotations

import logging
import math
from typing import Optional, Tuple

import numpy as np

from src.common.errors import EmptyInput, ShapeMismatch, SingularDesign
from src.models.forecast import PredictionHead

LOGGER = logging.getLogger(__name__)

CONDITION_LIMIT = 1e12


def _as_matrices(features: np.ndarray, targets: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    features = np.asarray(features, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64)
    if features.ndim == 1:
        features = features[:, None]
    if targets.ndim == 1:
        targets = targets[:, None]
    if features.shape[0] != targets.shape[0]:
        raise ShapeMismatch(
            f"{features.shape[0]} feature rows but {targets.shape[0]} target rows"
        )
    if features.shape[0] == 0:
        raise EmptyInput("Cannot fit a head without samples")
    return features, targets


def fit_head_least_squares(
    features: np.ndarray,
    targets: np.ndarray,
    ridge: float = 1e-4,
    fit_intercept: bool = True,
) -> PredictionHead:
    """
    Fit a head minimising ``||Y - X W - b||^2 + ridge * ||W||^2``.

    The bias is fitted through a column of ones and is not penalised.

    Args:
        features: n×d feature matrix
        targets: n×k target matrix
        ridge: Non-negative L2 penalty on the weights
        fit_intercept: Fit the bias; when False the bias is fixed at zero

    Returns:
        Fitted PredictionHead

    Raises:
        SingularDesign: if ridge is 0 and the Gram matrix is numerically singular
    """
    if ridge < 0:
        raise ValueError(f"ridge must be non-negative, got {ridge}")
    features, targets = _as_matrices(features, targets)
    n, d = features.shape

    design = np.hstack([features, np.ones((n, 1))]) if fit_intercept else features
    gram = design.T @ design

    if ridge == 0.0:
        condition = np.linalg.cond(gram)
        if not np.isfinite(condition) or condition >= CONDITION_LIMIT:
            raise SingularDesign(f"Gram matrix is singular (condition number {condition:.3g})")

    penalty = np.full(design.shape[1], ridge)
    if fit_intercept:
        penalty[-1] = 0.0
    solution = np.linalg.solve(gram + np.diag(penalty), design.T @ targets)

    if fit_intercept:
        return PredictionHead(weights=solution[:d], bias=solution[d])
    return PredictionHead(weights=solution, bias=np.zeros(targets.shape[1]))


def epoch_steps(n_samples: int, batch_size: Optional[int]) -> int:
    """Number of gradient steps one epoch takes."""
    if n_samples == 0:
        return 0
    if batch_size is None or batch_size >= n_samples:
        return 1
    return math.ceil(n_samples / batch_size)


def mse_gradient(
    head: PredictionHead, features: np.ndarray, targets: np.ndarray
) -> Tuple[np.ndarray, np.ndarray]:
    """Gradient of the mean (over samples and outputs) squared error."""
    residual = head.apply(features) - targets
    scale = 2.0 / residual.size
    return scale * features.T @ residual, scale * residual.sum(axis=0)


def head_loss(head: PredictionHead, features: np.ndarray, targets: np.ndarray) -> float:
    """Mean squared error of a head on a dataset."""
    features, targets = _as_matrices(features, targets)
    return float(np.mean((head.apply(features) - targets) ** 2))


def sgd_epoch(
    head: PredictionHead,
    features: np.ndarray,
    targets: np.ndarray,
    lr: float,
    batch_size: Optional[int] = None,
) -> PredictionHead:
    """
    One epoch of mini-batch gradient descent on the MSE loss.

    Batches are taken in dataset order. ``batch_size=None`` means one full batch.

    Args:
        head: Starting head (left untouched)
        features: n×d features
        targets: n×k targets
        lr: Learning rate (0 returns an equal head)
        batch_size: Samples per step

    Returns:
        A new PredictionHead
    """
    if lr < 0:
        raise ValueError(f"lr must be non-negative, got {lr}")
    features, targets = _as_matrices(features, targets)
    if features.shape[1] != head.n_features or targets.shape[1] != head.n_outputs:
        raise ShapeMismatch(
            f"Head expects {head.n_features}→{head.n_outputs}, "
            f"got {features.shape[1]}→{targets.shape[1]}"
        )

    n = features.shape[0]
    size = n if batch_size is None else max(1, min(batch_size, n))
    weights = np.array(head.weights)
    bias = np.array(head.bias)

    for start in range(0, n, size):
        current = PredictionHead(weights, bias)
        grad_w, grad_b = mse_gradient(current, features[start : start + size], targets[start : start + size])
        weights = weights - lr * grad_w
        bias = bias - lr * grad_b

    return PredictionHead(weights, bias)
