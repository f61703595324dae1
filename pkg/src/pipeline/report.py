"""Report files: aggregate JSON, runtime JSON, per-sample and correlation CSVs."""
from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict
from pathlib import Path
from typing import Any, Dict, List, Sequence

import pandas as pd

from src.common.errors import FormatError
from src.models.experiment import ExperimentReport, SampleRow

LOGGER = logging.getLogger(__name__)

REPORT_FILE = "report.json"
RUNTIME_FILE = "runtime.json"
SAMPLES_FILE = "samples.csv"
CORRELATION_FILE = "correlation.csv"

SAMPLE_COLUMNS = ["anchor", "base_mse", "adapted_mse", "n_selected", "fallback"]
CORRELATION_COLUMNS = ["dataset", "model", "horizon", "log10_delta_p", "mse_improvement", "mae_improvement"]


def json_safe(value: Any) -> Any:
    """Replace NaN and ±inf floats (at any depth) with None so the result is strict JSON."""
    if isinstance(value, float):
        return value if math.isfinite(value) else None
    if isinstance(value, dict):
        return {key: json_safe(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [json_safe(item) for item in value]
    return value


def dumps(record: Any) -> str:
    """Strict, key-sorted, indented JSON."""
    return json.dumps(json_safe(record), indent=2, sort_keys=True, allow_nan=False)


def _dump_json(record: Dict, path: Path) -> None:
    path.write_text(dumps(record) + "\n", encoding="utf-8")


def correlation_frame(reports: Sequence[ExperimentReport]) -> pd.DataFrame:
    """One (log10 δ_P, improvement) row per complete report."""
    rows = [
        {
            "dataset": report.dataset,
            "model": report.model,
            "horizon": report.horizon,
            "log10_delta_p": report.log10_delta_p,
            "mse_improvement": report.mse_improvement,
            "mae_improvement": report.mae_improvement,
        }
        for report in reports
        if report.mae_improvement is not None
    ]
    return pd.DataFrame(rows, columns=CORRELATION_COLUMNS)


def emit_report(report: ExperimentReport, directory: Path | str) -> Dict[str, Path]:
    """
    Write a report's files into ``directory``.

    ``report.json`` is byte-stable for identical runs; wall-clock timings go to
    ``runtime.json``. An empty test split gives header-only CSVs and
    ``"sample_rows": 0`` in the JSON.

    Returns:
        File role → written path
    """
    directory = Path(directory)
    try:
        directory.mkdir(parents=True, exist_ok=True)
        paths = {
            "report": directory / REPORT_FILE,
            "runtime": directory / RUNTIME_FILE,
            "samples": directory / SAMPLES_FILE,
            "correlation": directory / CORRELATION_FILE,
        }
        _dump_json(report.to_dict(), paths["report"])
        _dump_json(dict(report.runtime), paths["runtime"])
        samples = pd.DataFrame([asdict(row) for row in report.samples], columns=SAMPLE_COLUMNS)
        samples.to_csv(paths["samples"], index=False, float_format="%.17g")
        correlation_frame([report]).to_csv(paths["correlation"], index=False, float_format="%.17g")
    except OSError as error:
        raise OSError(f"Could not write report files to {directory}: {error}") from error
    LOGGER.info("Wrote report (%d sample rows) to %s", len(report.samples), directory)
    return paths


def load_report(directory: Path | str) -> ExperimentReport:
    """Read back what :func:`emit_report` wrote."""
    directory = Path(directory)
    report_path = directory / REPORT_FILE
    try:
        record = json.loads(report_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as error:
        raise FormatError(f"Invalid report JSON in {report_path}: {error.msg}", line=error.lineno) from error

    runtime_path = directory / RUNTIME_FILE
    runtime = json.loads(runtime_path.read_text(encoding="utf-8")) if runtime_path.exists() else {}

    samples: List[SampleRow] = []
    samples_path = directory / SAMPLES_FILE
    if samples_path.exists():
        frame = pd.read_csv(samples_path)
        missing = [column for column in SAMPLE_COLUMNS if column not in frame.columns]
        if missing:
            raise FormatError(f"{samples_path} lacks columns {missing}", line=1)
        samples = [
            SampleRow(
                anchor=int(row.anchor),
                base_mse=float(row.base_mse),
                adapted_mse=float(row.adapted_mse),
                n_selected=int(row.n_selected),
                fallback=bool(row.fallback),
            )
            for row in frame.itertuples(index=False)
        ]
    expected = record.get("sample_rows", len(samples))
    if expected != len(samples):
        raise FormatError(f"{samples_path} holds {len(samples)} rows, report says {expected}")
    return ExperimentReport.from_dict(record, samples=samples, runtime=runtime)


def detector_accuracy(reports: Sequence[ExperimentReport]) -> float:
    """
    Share of reports where the detector's verdict matches the adapter's benefit.

    A report agrees when strong CDS (log10 δ_P ≥ threshold) coincides with an
    MAE improvement above 1%, or weak CDS with an improvement of at most 1%.
    """
    scored = [report for report in reports if report.mae_improvement is not None]
    if not scored:
        return float("nan")
    agree = sum(1 for report in scored if report.cds_strong == report.improvement_above_1pct)
    return agree / len(scored)


def write_correlation_csv(reports: Sequence[ExperimentReport], path: Path | str) -> Path:
    """Plot-ready (log10 δ_P, improvement) pairs across many runs."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    correlation_frame(reports).to_csv(path, index=False, float_format="%.17g")
    return path
