"""Tests for synthetic series generators."""
from __future__ import annotations

import numpy as np

from src.theory.generators import iid_series, phase_shift_series, segment_shift_series


def test_phase_profile_repeats():
    series = phase_shift_series(480, period=24, magnitude=2.0, noise_std=0.0, seed=3)
    values = series.values[:, 0]
    np.testing.assert_allclose(values[:24], values[24:48])
    assert abs(values[:24].std() - 2.0) < 1e-12


def test_given_profile_is_normalized():
    series = phase_shift_series(8, period=4, noise_std=0.0, profile=[0.0, 1.0, 2.0, 3.0])
    profile = series.values[:4, 0]
    assert abs(profile.mean()) < 1e-12
    np.testing.assert_allclose(np.diff(profile), np.full(3, profile[1] - profile[0]))


def test_segment_levels_are_piecewise_constant():
    series = segment_shift_series(100, num_segments=4, noise_std=0.0, seed=1)
    values = series.values[:, 0]
    for block in range(4):
        assert np.unique(values[block * 25 : (block + 1) * 25]).size == 1


def test_iid_channels_and_seed():
    first = iid_series(50, seed=7, n_channels=3)
    second = iid_series(50, seed=7, n_channels=3)
    assert first.channel_names == ("ch0", "ch1", "ch2")
    np.testing.assert_array_equal(first.values, second.values)
