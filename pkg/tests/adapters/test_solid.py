"""Tests for sample-level contextualized adaptation."""
from __future__ import annotations

import math

import numpy as np
import pytest

from src.adapters.solid import (
    WindowPool,
    adapt_and_predict,
    adapt_one,
    candidate_anchors,
    phase_difference,
    rank_by_similarity,
    run_solid,
    select_contextualized,
)
from src.common.errors import EmptyCandidates
from src.core.windows import make_windows
from src.forecasters.linear import fit_linear_forecaster
from src.models.calibration import ContextualizedDataset, SelectionMode, SolidParams
from src.models.series import WindowSample
from src.theory.generators import phase_shift_series

LOOKBACK = 8
HORIZON = 2


def _window(anchor: int, fill: float = 0.0, lookback: int = 2, horizon: int = 2) -> WindowSample:
    return WindowSample(
        anchor_t=anchor,
        history=np.full((lookback, 1), fill),
        future=np.full((horizon, 1), fill),
    )


def _params(**overrides) -> SolidParams:
    values = dict(lambda_T=10, lambda_P=0.05, lambda_N=5, lr=0.01, T_star=24)
    values.update(overrides)
    return SolidParams(**values)


@pytest.fixture(scope="module")
def seasonal_windows():
    series = phase_shift_series(1200, period=24, magnitude=1.0, noise_std=0.3, seed=11)
    return make_windows(series, LOOKBACK, HORIZON)


@pytest.fixture(scope="module")
def base_model(seasonal_windows):
    return fit_linear_forecaster(seasonal_windows[:600])


class TestCandidates:
    """Test suite for the temporal and phase filters."""

    def test_phase_difference(self) -> None:
        assert phase_difference(100, 76, 24) == 0.0
        assert phase_difference(0, 23, 24) == pytest.approx(23 / 24)
        assert phase_difference(0, 23, 24, circular=True) == pytest.approx(1 / 24)

    def test_no_phase_match_in_short_range(self) -> None:
        pool = WindowPool([_window(anchor) for anchor in range(99)])
        assert candidate_anchors(100, pool, _params(lambda_T=10), HORIZON) == []

    def test_phase_match_over_long_range(self) -> None:
        pool = WindowPool([_window(anchor) for anchor in range(99)])
        assert candidate_anchors(100, pool, _params(lambda_T=100), HORIZON) == [4, 28, 52, 76]

    def test_full_phase_tolerance_keeps_range(self) -> None:
        pool = WindowPool([_window(anchor) for anchor in range(120)])
        assert candidate_anchors(100, pool, _params(lambda_T=10, lambda_P=1.0), HORIZON) == list(range(90, 99))

    def test_anchors_respect_horizon(self) -> None:
        pool = WindowPool([_window(anchor) for anchor in range(200)])
        candidates = candidate_anchors(150, pool, _params(lambda_T=150, lambda_P=1.0), HORIZON)
        assert max(candidates) + HORIZON <= 150
        assert min(candidates) == 0

    def test_filters_are_monotone(self) -> None:
        pool = WindowPool([_window(anchor) for anchor in range(500)])
        previous: set = set()
        for lambda_T, lambda_P in [(24, 0.02), (48, 0.02), (48, 0.1), (200, 0.1), (400, 0.5)]:
            current = set(candidate_anchors(480, pool, _params(lambda_T=lambda_T, lambda_P=lambda_P), HORIZON))
            assert previous <= current
            previous = current

    def test_circular_phase_wraps(self) -> None:
        pool = WindowPool([_window(anchor) for anchor in range(48)])
        plain = candidate_anchors(48, pool, _params(lambda_T=48, lambda_P=0.05), HORIZON)
        circular = candidate_anchors(48, pool, _params(lambda_T=48, lambda_P=0.05, circular_phase=True), HORIZON)
        assert 23 not in plain
        assert 23 in circular

    def test_none_mode_selects_nothing(self) -> None:
        pool = WindowPool([_window(anchor) for anchor in range(99)])
        assert candidate_anchors(100, pool, _params(lambda_T=100, mode=SelectionMode.NONE), HORIZON) == []

    def test_duplicate_pool_anchors(self) -> None:
        with pytest.raises(ValueError):
            WindowPool([_window(3), _window(3)])


class TestSelection:
    """Test suite for similarity ranking and top-λ_N selection."""

    def test_ranking_by_distance(self) -> None:
        pool = WindowPool([_window(10, 2.0, lookback=1), _window(20, 1.0, lookback=1), _window(30, 3.0, lookback=1)])
        dctx = select_contextualized(50, [10, 20, 30], pool, _params(lambda_N=2), np.zeros((1, 1)))
        assert dctx.source_anchors == [20, 10]
        assert dctx.similarity_scores == [-1.0, -2.0]
        assert dctx.n_candidates == 3

    def test_identical_history_ranks_first(self) -> None:
        test_history = np.array([[0.5], [1.5]])
        pool = WindowPool(
            [_window(4, 0.3), WindowSample(anchor_t=9, history=test_history, future=np.zeros((2, 1))), _window(14, 1.0)]
        )
        ranked, scores = rank_by_similarity([4, 9, 14], pool, test_history)
        assert ranked[0] == 9
        assert scores[0] == 0.0

    def test_ties_prefer_recent(self) -> None:
        pool = WindowPool([_window(anchor, 1.0) for anchor in (5, 15, 25)])
        ranked, _ = rank_by_similarity([5, 15, 25], pool, np.zeros((2, 1)))
        assert ranked == [25, 15, 5]

    def test_keeps_all_when_few_candidates(self) -> None:
        pool = WindowPool([_window(anchor, float(anchor)) for anchor in (1, 2, 3)])
        dctx = select_contextualized(40, [1, 2, 3], pool, _params(lambda_N=20), np.zeros((2, 1)))
        assert dctx.source_anchors == [1, 2, 3]

    def test_ablation_modes_keep_most_recent(self) -> None:
        pool = WindowPool([_window(anchor, float(-anchor)) for anchor in range(30)])
        params = _params(lambda_N=3, mode=SelectionMode.TEMPORAL)
        dctx = select_contextualized(40, list(range(30)), pool, params, np.zeros((2, 1)))
        assert dctx.source_anchors == [29, 28, 27]

    def test_growing_lambda_n_never_shrinks(self) -> None:
        pool = WindowPool([_window(anchor, float(anchor % 7)) for anchor in range(60)])
        sizes = [
            len(select_contextualized(70, list(range(60)), pool, _params(lambda_N=n), np.zeros((2, 1))))
            for n in (1, 5, 20, 100)
        ]
        assert sizes == sorted(sizes)
        assert sizes[-1] == 60


class TestAdaptation:
    """Test suite for one-epoch head fine-tuning."""

    def test_zero_lr_is_identity(self, base_model, seasonal_windows) -> None:
        window = seasonal_windows[800]
        pool = WindowPool(seasonal_windows[:700])
        dctx = select_contextualized(
            window.anchor_t,
            candidate_anchors(window.anchor_t, pool, _params(lambda_T=500), HORIZON),
            pool,
            _params(lambda_T=500),
            window.history,
        )
        forecast, trace = adapt_and_predict(base_model, window, dctx, _params(lambda_T=500, lr=0.0), pool=pool)
        assert len(dctx) > 0
        np.testing.assert_array_equal(forecast, base_model.predict(window))
        assert not trace.fallback

    def test_empty_context_falls_back(self, base_model, seasonal_windows) -> None:
        window = seasonal_windows[800]
        forecast, trace = adapt_and_predict(base_model, window, ContextualizedDataset(window.anchor_t), _params())
        np.testing.assert_array_equal(forecast, base_model.predict(window))
        assert trace.fallback
        assert trace.fallback_reason == "empty"
        assert trace.base_mse == trace.adapted_mse

    def test_empty_context_error_policy(self, base_model, seasonal_windows) -> None:
        window = seasonal_windows[800]
        with pytest.raises(EmptyCandidates):
            adapt_and_predict(
                base_model, window, ContextualizedDataset(window.anchor_t), _params(), fallback_policy="error"
            )

    def test_unknown_policy(self, base_model, seasonal_windows) -> None:
        window = seasonal_windows[800]
        with pytest.raises(ValueError):
            adapt_and_predict(base_model, window, ContextualizedDataset(window.anchor_t), _params(), fallback_policy="skip")

    def test_self_context_lowers_loss(self, base_model, seasonal_windows) -> None:
        window = seasonal_windows[900]
        dctx = ContextualizedDataset(window.anchor_t, samples=[window], source_anchors=[window.anchor_t])
        _, trace = adapt_and_predict(base_model, window, dctx, _params(lr=0.01))
        assert trace.post_loss < trace.pre_loss
        assert trace.steps == 1

    def test_base_model_untouched(self, base_model, seasonal_windows) -> None:
        before = [np.array(head.weights) for head in base_model.heads]
        pool = WindowPool(seasonal_windows[:900])
        adapt_one(base_model, seasonal_windows[950], pool, _params(lambda_T=500, lr=0.5))
        for head, weights in zip(base_model.heads, before):
            np.testing.assert_array_equal(head.weights, weights)

    def test_isolation_between_samples(self, base_model, seasonal_windows) -> None:
        pool = WindowPool(seasonal_windows)
        params = _params(lambda_T=500, lr=0.05)
        alone, _ = adapt_one(base_model, seasonal_windows[1000], pool, params)
        adapt_one(base_model, seasonal_windows[990], pool, params)
        after, _ = adapt_one(base_model, seasonal_windows[1000], pool, params)
        np.testing.assert_array_equal(alone, after)

    def test_steps_follow_batch_size(self, base_model, seasonal_windows) -> None:
        pool = WindowPool(seasonal_windows[:900])
        params = _params(lambda_T=500, lambda_N=5, batch_size=2)
        _, trace = adapt_one(base_model, seasonal_windows[950], pool, params)
        assert len(trace.selected_anchors) == 5
        assert trace.steps == math.ceil(5 / 2)

    def test_divergent_update_falls_back(self, base_model, seasonal_windows) -> None:
        pool = WindowPool(seasonal_windows[:900])
        window = seasonal_windows[950]
        with np.errstate(all="ignore"):
            forecast, trace = adapt_one(base_model, window, pool, _params(lambda_T=500, lr=1e300, batch_size=1))
        assert trace.fallback
        assert trace.fallback_reason == "non_finite"
        np.testing.assert_array_equal(forecast, base_model.predict(window))


class TestRunSolid:
    """Test suite for adaptation over a whole test split."""

    def test_zero_lr_matches_baseline(self, base_model, seasonal_windows) -> None:
        result = run_solid(
            base_model, seasonal_windows[900:960], WindowPool(seasonal_windows), _params(lambda_T=500, lr=0.0)
        )
        np.testing.assert_array_equal(result.adapted_forecasts, result.base_forecasts)
        assert result.improvements == (0.0, 0.0)

    def test_causal_selection(self, base_model, seasonal_windows) -> None:
        result = run_solid(
            base_model, seasonal_windows[900:960], WindowPool(seasonal_windows), _params(lambda_T=500, lambda_P=0.1)
        )
        for anchor, trace in zip(result.anchors, result.traces):
            assert trace.anchor == anchor
            assert all(selected + HORIZON <= anchor for selected in trace.selected_anchors)

    def test_single_sample_equals_adapt_one(self, base_model, seasonal_windows) -> None:
        pool = WindowPool(seasonal_windows)
        params = _params(lambda_T=500)
        result = run_solid(base_model, [seasonal_windows[930]], pool, params)
        forecast, _ = adapt_one(base_model, seasonal_windows[930], pool, params)
        np.testing.assert_array_equal(result.adapted_forecasts[0], forecast)

    def test_workers_keep_order(self, base_model, seasonal_windows) -> None:
        pool = WindowPool(seasonal_windows)
        params = _params(lambda_T=500)
        serial = run_solid(base_model, seasonal_windows[900:940], pool, params)
        threaded = run_solid(base_model, seasonal_windows[900:940], pool, params, workers=4)
        assert threaded.anchors == serial.anchors
        np.testing.assert_array_equal(threaded.adapted_forecasts, serial.adapted_forecasts)

    def test_none_mode_counts_fallbacks(self, base_model, seasonal_windows) -> None:
        result = run_solid(
            base_model, seasonal_windows[900:910], WindowPool(seasonal_windows), _params(mode=SelectionMode.NONE)
        )
        assert result.fallback_count == 10
        np.testing.assert_array_equal(result.adapted_forecasts, result.base_forecasts)

    def test_time_range_below_horizon(self, base_model, seasonal_windows) -> None:
        with pytest.raises(ValueError):
            run_solid(base_model, seasonal_windows[900:910], WindowPool(seasonal_windows), _params(lambda_T=1))

    def test_timings_recorded(self, base_model, seasonal_windows) -> None:
        result = run_solid(base_model, seasonal_windows[900:910], WindowPool(seasonal_windows), _params(lambda_T=500))
        assert result.base_seconds > 0
        assert result.selection_seconds >= 0
        assert result.finetune_seconds >= 0
