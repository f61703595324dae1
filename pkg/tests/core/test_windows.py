"""Tests for windowing, splits and standardization."""
from __future__ import annotations

import numpy as np
import pytest

from src.common.errors import SeriesTooShort
from src.core.windows import (
    chronological_split,
    fit_standardizer,
    make_windows,
    split_boundaries,
    window_count,
    windows_between,
)
from src.models.series import SplitSpec, Standardizer, TimeSeries


@pytest.fixture
def ramp() -> TimeSeries:
    """Ten steps, two channels: t and 10·t."""
    t = np.arange(10, dtype=float)
    return TimeSeries.from_array(np.column_stack([t, 10 * t]))


class TestMakeWindows:
    """Test suite for make_windows."""

    def test_anchor_enumeration(self, ramp: TimeSeries) -> None:
        """N=10, L=3, T=2 gives anchors 3..8."""
        windows = make_windows(ramp, L=3, T=2)
        assert [w.anchor_t for w in windows] == [3, 4, 5, 6, 7, 8]
        np.testing.assert_array_equal(windows[0].history[:, 0], [0, 1, 2])
        np.testing.assert_array_equal(windows[0].future[:, 0], [3, 4])

    def test_exact_fit_gives_one_window(self, ramp: TimeSeries) -> None:
        """N = L + T yields a single window."""
        assert len(make_windows(ramp, L=6, T=4)) == 1

    def test_too_short(self, ramp: TimeSeries) -> None:
        """N < L + T raises SeriesTooShort."""
        with pytest.raises(SeriesTooShort):
            make_windows(ramp, L=8, T=3)

    def test_stride(self, ramp: TimeSeries) -> None:
        """Stride 2 keeps every other anchor and matches window_count."""
        windows = make_windows(ramp, L=3, T=2, stride=2)
        assert [w.anchor_t for w in windows] == [3, 5, 7]
        assert window_count(10, 3, 2, 2) == 3

    def test_rows_match_series_slices(self, ramp: TimeSeries) -> None:
        """Every window is the (L, T) row slice of the series around its anchor, channels intact."""
        windows = make_windows(ramp, L=3, T=2, stride=3)
        assert [w.anchor_t for w in windows] == [3, 6]
        for window in windows:
            t = window.anchor_t
            np.testing.assert_array_equal(window.history, ramp.values[t - 3 : t])
            np.testing.assert_array_equal(window.future, ramp.values[t : t + 2])
            assert window.history.shape == (3, 2)

    def test_etth1_count(self) -> None:
        """ETTh1 length with L = T = 96 gives 17229 windows."""
        assert window_count(17420, 96, 96) == 17229

    def test_consecutive_histories_overlap(self, ramp: TimeSeries) -> None:
        """The history at t+1 is the history at t shifted by one row."""
        first, second = make_windows(ramp, L=4, T=1)[:2]
        np.testing.assert_array_equal(first.history[1:], second.history[:-1])

    def test_anchor_keeps_absolute_index(self, ramp: TimeSeries) -> None:
        """Anchors of a slice are absolute time indices."""
        tail = ramp.slice(4, 10)
        assert make_windows(tail, L=2, T=1)[0].anchor_t == 6

    def test_windows_between(self, ramp: TimeSeries) -> None:
        """Only windows whose future fits in [start, stop) are kept."""
        windows = make_windows(ramp, L=3, T=2)
        kept = windows_between(windows, 5, 9)
        assert [w.anchor_t for w in kept] == [5, 6, 7]


class TestChronologicalSplit:
    """Test suite for chronological_split."""

    def test_exact_lengths(self, ramp: TimeSeries) -> None:
        """N=10 with (0.7, 0.1, 0.2) gives (7, 1, 2)."""
        train, val, test = chronological_split(ramp, SplitSpec((0.7, 0.1, 0.2)))
        assert (train.length, val.length, test.length) == (7, 1, 2)
        assert val.values[0, 0] == 7.0
        assert test.start_index == 8

    def test_ett_lengths(self) -> None:
        """N=17420 with 6:2:2 gives (10452, 3484, 3484)."""
        series = TimeSeries.from_array(np.zeros(17420))
        parts = chronological_split(series, SplitSpec((0.6, 0.2, 0.2)))
        assert tuple(part.length for part in parts) == (10452, 3484, 3484)

    def test_degenerate_split(self, ramp: TimeSeries) -> None:
        """All weight on train leaves empty val and test segments."""
        train, val, test = chronological_split(ramp, SplitSpec((1.0, 0.0, 0.0)))
        assert train.length == 10
        assert val.length == 0 and test.length == 0

    def test_concatenation_reconstructs(self, ramp: TimeSeries) -> None:
        """Joining the parts gives back the input."""
        parts = chronological_split(ramp, SplitSpec((0.5, 0.2, 0.3)))
        np.testing.assert_array_equal(TimeSeries.concatenate(parts).values, ramp.values)

    def test_boundaries(self, ramp: TimeSeries) -> None:
        """Boundaries are absolute start indices plus the exclusive end."""
        assert split_boundaries(ramp, SplitSpec((0.7, 0.1, 0.2))) == (0, 7, 8, 10)

    def test_too_short(self) -> None:
        """Fewer than three observations cannot be split."""
        with pytest.raises(SeriesTooShort):
            chronological_split(TimeSeries.from_array([1.0, 2.0]), SplitSpec())

    def test_invalid_ratios(self) -> None:
        """Ratios must sum to one."""
        with pytest.raises(ValueError):
            SplitSpec((0.5, 0.2, 0.2))


class TestStandardizer:
    """Test suite for Standardizer."""

    def test_round_trip(self) -> None:
        """Standardize then de-standardize is the identity."""
        rng = np.random.default_rng(3)
        series = TimeSeries.from_array(rng.normal(5.0, 3.0, size=(200, 3)))
        standardizer = fit_standardizer(series)
        scaled = standardizer.transform(series)
        np.testing.assert_allclose(scaled.values.mean(axis=0), 0.0, atol=1e-10)
        np.testing.assert_allclose(scaled.values.std(axis=0), 1.0, atol=1e-10)
        np.testing.assert_allclose(standardizer.inverse_transform(scaled).values, series.values, atol=1e-10)

    def test_constant_channel_is_clamped(self) -> None:
        """A zero standard deviation is floored at 1e-8."""
        series = TimeSeries.from_array(np.column_stack([np.ones(5), np.arange(5.0)]))
        standardizer = Standardizer.fit(series)
        assert standardizer.std[0] == pytest.approx(1e-8)
        assert np.all(np.isfinite(standardizer.transform(series).values))


class TestTimeSeries:
    """Test suite for TimeSeries validation."""

    def test_rejects_non_finite(self) -> None:
        with pytest.raises(ValueError):
            TimeSeries.from_array([1.0, np.nan, 2.0])

    def test_rejects_duplicate_names(self) -> None:
        with pytest.raises(ValueError):
            TimeSeries(values=np.zeros((3, 2)), channel_names=("a", "a"))

    def test_values_are_read_only(self, ramp: TimeSeries) -> None:
        with pytest.raises(ValueError):
            ramp.values[0, 0] = 1.0
