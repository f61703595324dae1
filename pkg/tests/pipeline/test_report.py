"""Tests for report files."""
from __future__ import annotations

import json

import pandas as pd
import pytest

from src.common.errors import FormatError
from src.models.experiment import ExperimentReport, SampleRow
from src.pipeline.report import (
    CORRELATION_COLUMNS,
    SAMPLE_COLUMNS,
    detector_accuracy,
    emit_report,
    load_report,
    write_correlation_csv,
)


def _report(log10_delta_p: float = -2.0, mae_improvement: float | None = 2.0, **overrides) -> ExperimentReport:
    values = dict(
        dataset="synthetic:phase",
        model="linear",
        lookback=48,
        horizon=6,
        T_star=24,
        delta_p=10**log10_delta_p,
        log10_delta_p=log10_delta_p,
        delta_t=1e-3,
        log10_delta_t=-3.0,
        threshold=-3.2,
        baseline_mse=0.5,
        baseline_mae=0.6,
        adapted_mse=0.45,
        adapted_mae=None if mae_improvement is None else 0.6 * (1 - mae_improvement / 100),
        mse_improvement=10.0,
        mae_improvement=mae_improvement,
        params={"lambda_T": 500, "lambda_P": 0.05, "lambda_N": 5, "lr": 0.05, "mode": "T+P+S"},
        n_test=2,
        samples=[
            SampleRow(anchor=100, base_mse=0.4, adapted_mse=0.3, n_selected=5, fallback=False),
            SampleRow(anchor=101, base_mse=0.6, adapted_mse=0.6, n_selected=0, fallback=True),
        ],
        runtime={"baseline_seconds": 0.01, "adapt_seconds": 0.2},
    )
    values.update(overrides)
    return ExperimentReport(**values)


class TestEmitReport:
    """Test suite for writing and reading report files."""

    def test_round_trip(self, tmp_path) -> None:
        report = _report()
        emit_report(report, tmp_path)
        loaded = load_report(tmp_path)
        assert loaded.to_dict() == report.to_dict()
        assert loaded.samples == report.samples
        assert loaded.runtime == report.runtime

    def test_improvement_is_consistent(self, tmp_path) -> None:
        emit_report(_report(), tmp_path)
        record = json.loads((tmp_path / "report.json").read_text(encoding="utf-8"))
        recomputed = (record["baseline_mae"] - record["adapted_mae"]) / record["baseline_mae"] * 100
        assert recomputed == pytest.approx(record["mae_improvement"], abs=1e-9)
        assert record["cds_strong"] is True
        assert record["improvement_above_1pct"] is True

    def test_timings_stay_out_of_report(self, tmp_path) -> None:
        paths = emit_report(_report(), tmp_path)
        assert "adapt_seconds" not in paths["report"].read_text(encoding="utf-8")
        assert json.loads(paths["runtime"].read_text(encoding="utf-8"))["adapt_seconds"] == 0.2

    def test_empty_report_has_headers(self, tmp_path) -> None:
        report = _report(mae_improvement=None, samples=[], n_test=0, baseline_mse=None, adapted_mse=None)
        paths = emit_report(report, tmp_path)
        assert paths["samples"].read_text(encoding="utf-8").strip() == ",".join(SAMPLE_COLUMNS)
        assert paths["correlation"].read_text(encoding="utf-8").strip() == ",".join(CORRELATION_COLUMNS)
        assert json.loads(paths["report"].read_text(encoding="utf-8"))["sample_rows"] == 0
        assert load_report(tmp_path).samples == []

    def test_row_count_mismatch(self, tmp_path) -> None:
        paths = emit_report(_report(), tmp_path)
        frame = pd.read_csv(paths["samples"])
        frame.head(1).to_csv(paths["samples"], index=False)
        with pytest.raises(FormatError):
            load_report(tmp_path)

    def test_zero_delta_is_strict_json(self, tmp_path) -> None:
        report = _report(delta_p=0.0, log10_delta_p=float("-inf"), per_channel_delta_p=[0.1, float("nan")])
        emit_report(report, tmp_path)
        text = (tmp_path / "report.json").read_text(encoding="utf-8")
        assert "Infinity" not in text and "NaN" not in text
        record = json.loads(text, parse_constant=lambda name: pytest.fail(f"non-standard constant {name}"))
        assert record["log10_delta_p"] is None
        assert record["per_channel_delta_p"] == [0.1, None]

        loaded = load_report(tmp_path)
        assert loaded.log10_delta_p == float("-inf")
        assert loaded.cds_strong is False

    def test_invalid_json(self, tmp_path) -> None:
        (tmp_path / "report.json").write_text("{not json", encoding="utf-8")
        with pytest.raises(FormatError):
            load_report(tmp_path)


class TestDetectorAccuracy:
    """Test suite for agreement between δ_P and SOLID's gain."""

    def test_agreement_share(self) -> None:
        reports = [
            _report(log10_delta_p=-2.0, mae_improvement=3.0),
            _report(log10_delta_p=-4.0, mae_improvement=0.5),
            _report(log10_delta_p=-2.5, mae_improvement=0.2),
            _report(log10_delta_p=-4.5, mae_improvement=2.0),
        ]
        assert detector_accuracy(reports) == 0.5

    def test_reports_without_metrics_are_ignored(self) -> None:
        reports = [_report(mae_improvement=None), _report(log10_delta_p=-3.2, mae_improvement=1.5)]
        assert detector_accuracy(reports) == 1.0

    def test_correlation_csv(self, tmp_path) -> None:
        path = write_correlation_csv([_report(), _report(log10_delta_p=-4.0, mae_improvement=0.1)], tmp_path / "c.csv")
        frame = pd.read_csv(path)
        assert list(frame.columns) == CORRELATION_COLUMNS
        assert frame["log10_delta_p"].tolist() == [-2.0, -4.0]
