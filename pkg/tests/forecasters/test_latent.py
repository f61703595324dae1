"""Tests for the external latent bridge."""
from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest

from src.common.errors import EmptyInput, FormatError, InsufficientData
from src.core.windows import make_windows
from src.forecasters.latent import (
    LatentExtractor,
    check_latent_futures,
    fit_latent_forecaster,
    history_latents,
    read_latents,
    write_latents,
)
from src.models.forecast import LatentDataset, LatentRecord
from src.models.series import TimeSeries, WindowSample


@pytest.fixture
def dataset() -> LatentDataset:
    """Five records with d=3, T=2, M=2 and awkward float values."""
    rng = np.random.default_rng(21)
    return LatentDataset(
        model_name="patch-encoder",
        d=3,
        T=2,
        M=2,
        records=[
            LatentRecord(anchor_t=100 + 2 * i, feature=rng.standard_normal(3) / 3.0, future=rng.standard_normal((2, 2)))
            for i in range(5)
        ],
    )


def _assert_same(left: LatentDataset, right: LatentDataset) -> None:
    assert (left.model_name, left.d, left.T, left.M) == (right.model_name, right.d, right.T, right.M)
    np.testing.assert_array_equal(left.anchors, right.anchors)
    np.testing.assert_array_equal(left.feature_matrix(), right.feature_matrix())
    np.testing.assert_array_equal(left.future_matrix(), right.future_matrix())


class TestLatentFiles:
    """Test suite for latent file reading and writing."""

    def test_binary_round_trip(self, dataset: LatentDataset, tmp_path: Path) -> None:
        """Binary write→read is bit-exact."""
        path = write_latents(dataset, tmp_path / "latents.bin")
        assert path.read_bytes().startswith(b"CDSLAT1\x00")
        _assert_same(read_latents(path), dataset)

    def test_text_round_trip(self, dataset: LatentDataset, tmp_path: Path) -> None:
        """The CSV twin reproduces every value."""
        path = write_latents(dataset, tmp_path / "latents.csv", binary=False)
        assert path.read_text(encoding="utf-8").startswith("CDSLAT1,patch-encoder,3,2,2,5\n")
        _assert_same(read_latents(path), dataset)

    def test_empty_records(self, tmp_path: Path) -> None:
        """A file with no records raises EmptyInput."""
        path = tmp_path / "empty.csv"
        path.write_text("CDSLAT1,m,2,1,1,0\nanchor_t,f0,f1,y0\n", encoding="utf-8")
        with pytest.raises(EmptyInput):
            read_latents(path)

    def test_d_mismatch(self, tmp_path: Path) -> None:
        """Header d disagreeing with the record columns raises FormatError."""
        path = tmp_path / "bad.csv"
        path.write_text("CDSLAT1,m,3,1,1,1\nanchor_t,f0,f1,y0\n5,0.1,0.2,0.3\n", encoding="utf-8")
        with pytest.raises(FormatError) as excinfo:
            read_latents(path)
        assert excinfo.value.line == 2

    def test_non_numeric_record(self, tmp_path: Path) -> None:
        """A bad value is reported with its line and record number."""
        path = tmp_path / "bad.csv"
        path.write_text("CDSLAT1,m,1,1,1,2\nanchor_t,f0,y0\n5,0.1,0.3\n6,x,0.3\n", encoding="utf-8")
        with pytest.raises(FormatError) as excinfo:
            read_latents(path)
        assert excinfo.value.line == 4
        assert excinfo.value.record == 1

    def test_truncated_binary(self, dataset: LatentDataset, tmp_path: Path) -> None:
        path = write_latents(dataset, tmp_path / "latents.bin")
        path.write_bytes(path.read_bytes()[:-8])
        with pytest.raises(FormatError):
            read_latents(path)

    def test_bad_magic(self, tmp_path: Path) -> None:
        path = tmp_path / "junk.bin"
        path.write_bytes(b"NOTLATENT")
        with pytest.raises(FormatError):
            read_latents(path)

    def test_anchors_must_increase(self, dataset: LatentDataset, tmp_path: Path) -> None:
        dataset.records[2].anchor_t = dataset.records[1].anchor_t
        path = write_latents(dataset, tmp_path / "latents.bin")
        with pytest.raises(FormatError) as excinfo:
            read_latents(path)
        assert excinfo.value.record == 2


class TestLatentForecaster:
    """Test suite for forecasting from external latents."""

    def test_history_template_matches_linear_features(self, tmp_path: Path) -> None:
        """Latents exported from histories give a working single-head model."""
        t = np.arange(300)
        series = TimeSeries.from_array(np.column_stack([np.sin(2 * np.pi * t / 12), np.cos(2 * np.pi * t / 12)]))
        windows = make_windows(series, L=24, T=3)
        path = write_latents(history_latents(windows), tmp_path / "template.bin")

        model = fit_latent_forecaster(read_latents(path), [w.anchor_t for w in windows[:200]], ridge=1e-6)

        assert len(model.heads) == 1
        assert model.heads[0].weights.shape == (48, 6)
        for window in windows[200:205]:
            np.testing.assert_allclose(model.predict(window), window.future, atol=1e-4)

    def test_missing_anchor(self, dataset: LatentDataset) -> None:
        extractor = LatentExtractor(dataset)
        window = WindowSample(anchor_t=7, history=np.zeros((4, 2)), future=np.zeros((2, 2)))
        assert not extractor.has_anchor(7)
        with pytest.raises(InsufficientData):
            extractor.extract(window)

    def test_no_training_records(self, dataset: LatentDataset) -> None:
        with pytest.raises(EmptyInput):
            fit_latent_forecaster(dataset, [1, 2, 3])


def test_futures_must_match_window_futures():
    series = TimeSeries.from_array(np.sin(np.arange(60) / 4.0)[:, None])
    windows = make_windows(series, L=5, T=3)
    dataset = history_latents(windows)
    check_latent_futures(dataset, windows)

    rescaled = LatentDataset(
        model_name=dataset.model_name,
        d=dataset.d,
        T=dataset.T,
        M=dataset.M,
        records=[
            LatentRecord(anchor_t=record.anchor_t, feature=record.feature, future=record.future * 10.0)
            for record in dataset.records
        ],
    )
    with pytest.raises(FormatError, match="record 0"):
        check_latent_futures(rescaled, windows)


def test_futures_check_skips_unrecorded_anchors():
    series = TimeSeries.from_array(np.cos(np.arange(40) / 3.0)[:, None])
    windows = make_windows(series, L=4, T=2)
    dataset = history_latents(windows[::2])
    check_latent_futures(dataset, windows)
