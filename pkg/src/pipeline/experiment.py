"""End-to-end calibration run: load, split, fit, detect, search, adapt."""
from __future__ import annotations

import itertools
import logging
import os
import time
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Dict, Iterator, List, Sequence, Tuple

import numpy as np

from src.adapters.solid import (
    WindowPool,
    adapt_and_predict,
    candidate_anchors,
    run_solid,
    select_contextualized,
)
from src.common.errors import (
    CalibrationError,
    ConfigError,
    EmptyGrid,
    EmptyInput,
    StageError,
)
from src.core.fetch import DatasetFetcher
from src.core.loader import read_series_csv
from src.core.metrics import improvement_pct, mse_mae
from src.core.windows import (
    fit_standardizer,
    make_windows,
    split_boundaries,
    windows_between,
)
from src.detectors.periodicity import dominant_period
from src.detectors.reconditionor import phase_context, reconditionor_score, segment_context
from src.forecasters.base import Forecaster
from src.forecasters.latent import (
    LatentExtractor,
    check_latent_futures,
    fit_latent_forecaster,
    history_latents,
    read_latents,
    write_latents,
)
from src.forecasters.linear import fit_linear_forecaster
from src.models.calibration import (
    ContextualizedDataset,
    DetectorReport,
    PeriodEstimate,
    SelectionMode,
    SolidParams,
)
from src.models.experiment import ExperimentConfig, ExperimentReport, SampleRow
from src.models.series import Standardizer, TimeSeries, WindowSample
from src.pipeline.presets import get_preset
from src.theory.generators import iid_series, phase_shift_series, segment_shift_series

LOGGER = logging.getLogger(__name__)

DATA_DIR_ENV = "CDS_CALIB_DATA_DIR"


@contextmanager
def stage(name: str) -> Iterator[None]:
    """Tag any failure inside the block with the pipeline stage name."""
    LOGGER.debug("Stage '%s' started", name)
    try:
        yield
    except StageError:
        raise
    except (CalibrationError, ValueError, KeyError, OSError) as error:
        raise StageError(name, error) from error


def load_dataset(config: ExperimentConfig) -> TimeSeries:
    """
    Resolve ``config.dataset`` to a series.

    Accepts ``synthetic:<kind>``, a CSV path, or a preset name looked up in
    ``$CDS_CALIB_DATA_DIR`` and then downloaded into ``cache_dir`` when a URL is known.
    """
    if config.is_synthetic:
        kind = config.synthetic_kind
        if kind == "phase":
            return phase_shift_series(
                config.synthetic_length,
                period=config.synthetic_period,
                magnitude=config.synthetic_magnitude,
                noise_std=config.synthetic_noise,
                seed=config.seed,
            )
        if kind == "segment":
            return segment_shift_series(
                config.synthetic_length,
                num_segments=config.num_segments,
                magnitude=config.synthetic_magnitude,
                noise_std=config.synthetic_noise,
                seed=config.seed,
            )
        return iid_series(config.synthetic_length, noise_std=config.synthetic_noise, seed=config.seed)

    path = Path(config.dataset)
    if path.is_file():
        return read_series_csv(path)

    preset = get_preset(config.preset or config.dataset)
    data_dir = os.environ.get(DATA_DIR_ENV)
    if data_dir and (Path(data_dir) / preset.filename).is_file():
        return read_series_csv(Path(data_dir) / preset.filename)
    if preset.url is None:
        raise ConfigError(
            f"Dataset '{preset.name}' has no download URL; place {preset.filename} in ${DATA_DIR_ENV}"
        )
    fetcher = DatasetFetcher(cache_dir=config.cache_dir, urls={preset.name: preset.url})
    return read_series_csv(fetcher.fetch(preset.name))


@dataclass
class PreparedData:
    """Standardized series and the windows of every split."""

    series: TimeSeries
    train: TimeSeries
    standardizer: Standardizer
    boundaries: Tuple[int, int, int, int]
    windows: List[WindowSample]
    train_windows: List[WindowSample]
    val_windows: List[WindowSample]
    test_windows: List[WindowSample]

    def restrict(self, keep: Sequence[int]) -> PreparedData:
        """Keep only windows whose anchors are in ``keep``."""
        wanted = set(keep)
        return replace(
            self,
            windows=[w for w in self.windows if w.anchor_t in wanted],
            train_windows=[w for w in self.train_windows if w.anchor_t in wanted],
            val_windows=[w for w in self.val_windows if w.anchor_t in wanted],
            test_windows=[w for w in self.test_windows if w.anchor_t in wanted],
        )


def prepare_data(series: TimeSeries, config: ExperimentConfig) -> PreparedData:
    """Split chronologically, standardize on train statistics and cut windows."""
    train_start, val_start, test_start, end = split_boundaries(series, config.split_spec)
    raw_train = series.slice(0, val_start - series.start_index)
    standardizer = fit_standardizer(raw_train)
    scaled = standardizer.transform(series)
    windows = make_windows(scaled, config.lookback, config.horizon, config.stride)
    data = PreparedData(
        series=scaled,
        train=standardizer.transform(raw_train),
        standardizer=standardizer,
        boundaries=(train_start, val_start, test_start, end),
        windows=windows,
        train_windows=windows_between(windows, train_start, val_start),
        val_windows=windows_between(windows, val_start, test_start),
        test_windows=windows_between(windows, test_start, end),
    )
    if not data.train_windows:
        raise EmptyInput(f"Training split holds no window of L={config.lookback}, T={config.horizon}")
    LOGGER.info(
        "Windows: train=%d, val=%d, test=%d",
        len(data.train_windows),
        len(data.val_windows),
        len(data.test_windows),
    )
    return data


def fit_model(data: PreparedData, config: ExperimentConfig) -> Tuple[Forecaster, PreparedData]:
    """Fit the linear baseline, or a head on external latents when configured."""
    if config.latents:
        dataset = read_latents(config.latents)
        if (dataset.T, dataset.M) != (config.horizon, data.series.n_channels):
            raise ConfigError(
                f"Latents are for T={dataset.T}, M={dataset.M}; "
                f"config has T={config.horizon}, M={data.series.n_channels}"
            )
        extractor = LatentExtractor(dataset)
        data = data.restrict([w.anchor_t for w in data.windows if extractor.has_anchor(w.anchor_t)])
        check_latent_futures(dataset, data.windows)
        model = fit_latent_forecaster(dataset, [w.anchor_t for w in data.train_windows], ridge=config.ridge)
        return model, data
    return fit_linear_forecaster(data.train_windows, ridge=config.ridge, normalization=config.normalization), data


def estimate_period(data: PreparedData, config: ExperimentConfig) -> int:
    if config.period is not None:
        LOGGER.info("Using configured period T*=%d", config.period)
        return config.period
    estimate: PeriodEstimate = dominant_period(data.train)
    return estimate.period


def detect_shift(
    model: Forecaster, data: PreparedData, T_star: int, config: ExperimentConfig
) -> Tuple[DetectorReport, DetectorReport]:
    """δ over periodic phases (K = T*) and over temporal segments."""
    anchors = [window.anchor_t for window in data.train_windows]
    by_phase = reconditionor_score(
        model,
        data.train_windows,
        phase_context(anchors, T_star),
        pooling=config.pooling,
        per_channel=data.series.n_channels > 1,
    )
    by_segment = reconditionor_score(
        model,
        data.train_windows,
        segment_context(anchors, config.num_segments),
        pooling=config.pooling,
    )
    return by_phase, by_segment


def make_params(
    config: ExperimentConfig,
    lambda_t: int,
    lambda_p: float,
    lambda_n: int,
    lr_ratio: float,
    T_star: int,
    mode: SelectionMode = SelectionMode.FULL,
) -> SolidParams:
    """SolidParams for one grid point; the adaptation lr is lr_ratio × train_lr."""
    return SolidParams(
        lambda_T=lambda_t,
        lambda_P=lambda_p,
        lambda_N=lambda_n,
        lr=lr_ratio * config.train_lr,
        T_star=T_star,
        batch_size=config.batch_size,
        circular_phase=config.circular_phase,
        mode=mode,
    )


@dataclass(frozen=True)
class GridPoint:
    lambda_t: int
    lambda_p: float
    lambda_n: int
    lr_ratio: float
    val_mse: float

    def tie_break_key(self) -> Tuple[float, float, int, float, int]:
        """Lowest MSE; then smaller lr-ratio, smaller λ_N, larger λ_P, larger λ_T."""
        return (self.val_mse, self.lr_ratio, self.lambda_n, -self.lambda_p, -self.lambda_t)


@dataclass
class GridSearchResult:
    best: SolidParams
    best_point: GridPoint
    points: List[GridPoint] = field(default_factory=list)


def grid_combinations(config: ExperimentConfig) -> List[Tuple[int, float, int, float]]:
    """Cartesian product (λ_T, λ_P, λ_N, lr-ratio) in config order."""
    combos = list(itertools.product(config.lambda_t, config.lambda_p, config.lambda_n, config.lr_ratio))
    if not combos:
        raise EmptyGrid("The SOLID search grid has no points")
    return combos


def grid_search(
    config: ExperimentConfig,
    model: Forecaster,
    val_windows: Sequence[WindowSample],
    pool: WindowPool,
    T_star: int,
) -> GridSearchResult:
    """
    Evaluate every grid point on the validation windows and keep the best.

    Selection depends only on (λ_T, λ_P); it is computed once per pair at the
    largest λ_N and truncated for smaller ones.

    Args:
        config: Grids, train_lr, grid_stride, workers
        model: Trained forecaster
        val_windows: Validation windows
        pool: Candidate windows
        T_star: Detected period

    Returns:
        GridSearchResult with every evaluated point
    """
    combos = grid_combinations(config)
    evaluated = list(val_windows)[:: config.grid_stride]
    if not evaluated:
        raise EmptyInput("No validation windows to search the grid on")
    truths = [window.future for window in evaluated]

    widest = max(config.lambda_n)
    selections: Dict[Tuple[int, float], List[ContextualizedDataset]] = {}
    for lambda_t, lambda_p in itertools.product(config.lambda_t, config.lambda_p):
        params = make_params(config, lambda_t, lambda_p, widest, 0.0, T_star)
        params.check_horizon(model.horizon)
        selections[(lambda_t, lambda_p)] = [
            select_contextualized(
                window.anchor_t,
                candidate_anchors(window.anchor_t, pool, params, model.horizon),
                pool,
                params,
                window.history,
            )
            for window in evaluated
        ]

    def evaluate(combo: Tuple[int, float, int, float]) -> GridPoint:
        lambda_t, lambda_p, lambda_n, lr_ratio = combo
        params = make_params(config, lambda_t, lambda_p, lambda_n, lr_ratio, T_star)
        forecasts = [
            adapt_and_predict(model, window, dctx.head(lambda_n), params, pool, config.fallback_policy)[0]
            for window, dctx in zip(evaluated, selections[(lambda_t, lambda_p)])
        ]
        val_mse, _ = mse_mae(forecasts, truths)
        LOGGER.debug("Grid %s: val MSE %.6f", combo, val_mse)
        return GridPoint(lambda_t, lambda_p, lambda_n, lr_ratio, val_mse)

    if config.workers > 1:
        with ThreadPoolExecutor(max_workers=config.workers) as executor:
            points = list(executor.map(evaluate, combos))
    else:
        points = [evaluate(combo) for combo in combos]

    best_point = min(points, key=GridPoint.tie_break_key)
    best = make_params(
        config, best_point.lambda_t, best_point.lambda_p, best_point.lambda_n, best_point.lr_ratio, T_star
    )
    LOGGER.info(
        "Grid search over %d points on %d windows: best %s (val MSE %.6f)",
        len(points),
        len(evaluated),
        best.to_dict(),
        best_point.val_mse,
    )
    return GridSearchResult(best=best, best_point=best_point, points=points)


def _build_pool(data: PreparedData, config: ExperimentConfig) -> WindowPool:
    return WindowPool(data.train_windows if config.train_only_pool else data.windows)


def run_experiment(config: ExperimentConfig, search: bool = True) -> ExperimentReport:
    """
    Run the whole calibration pipeline for one configuration.

    With ``search=False`` the first value of each grid is used and the
    validation search is skipped. A failure while adapting yields a partial
    report (baseline metrics, ``failed_stage="adapt"``); any other stage
    failure raises StageError.

    Args:
        config: Experiment configuration
        search: Whether to grid-search SolidParams on the validation split

    Returns:
        ExperimentReport
    """
    started = time.perf_counter()
    runtime: Dict[str, float] = {}

    with stage("load"):
        series = load_dataset(config)
    with stage("split"):
        data = prepare_data(series, config)
    with stage("fit"):
        tick = time.perf_counter()
        model, data = fit_model(data, config)
        runtime["fit_seconds"] = time.perf_counter() - tick
    with stage("period"):
        T_star = estimate_period(data, config)
    with stage("detect"):
        by_phase, by_segment = detect_shift(model, data, T_star, config)

    report = ExperimentReport(
        dataset=config.dataset,
        model=model.name,
        lookback=config.lookback,
        horizon=config.horizon,
        T_star=T_star,
        delta_p=by_phase.delta,
        log10_delta_p=by_phase.log10_delta,
        delta_t=by_segment.delta,
        log10_delta_t=by_segment.log10_delta,
        threshold=config.threshold,
        dropped_contexts_p=list(by_phase.dropped_contexts),
        per_channel_delta_p=by_phase.per_channel_delta,
        runtime=runtime,
    )

    if not data.test_windows:
        LOGGER.warning("Test split holds no window; emitting an empty report")
        runtime["total_seconds"] = time.perf_counter() - started
        return report

    pool = _build_pool(data, config)
    with stage("grid"):
        tick = time.perf_counter()
        if search:
            searched = grid_search(config, model, data.val_windows, pool, T_star)
            params = searched.best
            report.validation_mse = searched.best_point.val_mse
            report.grid_evaluations = len(searched.points)
        else:
            params = make_params(
                config, config.lambda_t[0], config.lambda_p[0], config.lambda_n[0], config.lr_ratio[0], T_star
            )
            params.check_horizon(model.horizon)
        runtime["grid_seconds"] = time.perf_counter() - tick
    report.params = {**params.to_dict(), "lr_ratio": params.lr / config.train_lr if config.train_lr else 0.0}

    base_forecasts = model.predict_many(data.test_windows)
    truths = [window.future for window in data.test_windows]
    report.baseline_mse, report.baseline_mae = mse_mae(list(base_forecasts), truths)
    report.n_test = len(data.test_windows)

    try:
        with stage("adapt"):
            result = run_solid(model, data.test_windows, pool, params, config.fallback_policy, config.workers)
            if config.ablation:
                report.ablation = _ablation(model, data, pool, params, config)
    except StageError as error:
        LOGGER.error("Adaptation failed: %s", error)
        report.failed_stage = error.stage
        report.error = str(error.cause)
        runtime["total_seconds"] = time.perf_counter() - started
        return report

    report.adapted_mse, report.adapted_mae = result.adapted_metrics
    report.mse_improvement = improvement_pct(report.baseline_mse, report.adapted_mse)
    report.mae_improvement = improvement_pct(report.baseline_mae, report.adapted_mae)
    report.fallback_count = result.fallback_count
    report.mean_steps = float(np.mean([trace.steps for trace in result.traces]))
    report.samples = [
        SampleRow(
            anchor=trace.anchor,
            base_mse=trace.base_mse,
            adapted_mse=trace.adapted_mse,
            n_selected=trace.n_selected,
            fallback=trace.fallback,
        )
        for trace in result.traces
    ]
    runtime.update(
        baseline_seconds=result.base_seconds,
        adapt_seconds=result.adapt_seconds,
        selection_seconds=result.selection_seconds,
        finetune_seconds=result.finetune_seconds,
        overhead_ratio=result.overhead_ratio,
        total_seconds=time.perf_counter() - started,
    )
    LOGGER.info(
        "%s T=%d: log10 δ_P=%.3f, MSE %.4f -> %.4f (%.2f%%), MAE %.4f -> %.4f (%.2f%%)",
        config.dataset,
        config.horizon,
        report.log10_delta_p,
        report.baseline_mse,
        report.adapted_mse,
        report.mse_improvement,
        report.baseline_mae,
        report.adapted_mae,
        report.mae_improvement,
    )
    return report


def _ablation(
    model: Forecaster,
    data: PreparedData,
    pool: WindowPool,
    params: SolidParams,
    config: ExperimentConfig,
) -> Dict[str, Dict[str, float]]:
    """Test-split metrics of every selection mode at the chosen parameters."""
    outcome = {}
    for mode in SelectionMode:
        policy = "base" if mode is SelectionMode.NONE else config.fallback_policy
        result = run_solid(model, data.test_windows, pool, replace(params, mode=mode), policy, config.workers)
        mse, mae = result.adapted_metrics
        outcome[mode.value] = {"mse": mse, "mae": mae}
    return outcome


def detect_only(config: ExperimentConfig) -> Tuple[int, DetectorReport, DetectorReport]:
    """Period and both δ scores, without adaptation."""
    with stage("load"):
        series = load_dataset(config)
    with stage("split"):
        data = prepare_data(series, config)
    with stage("fit"):
        model, data = fit_model(data, config)
    with stage("period"):
        T_star = estimate_period(data, config)
    with stage("detect"):
        by_phase, by_segment = detect_shift(model, data, T_star, config)
    return T_star, by_phase, by_segment


def period_only(config: ExperimentConfig) -> PeriodEstimate:
    """Dominant period of the standardized training split."""
    with stage("load"):
        series = load_dataset(config)
    with stage("period"):
        _, val_start, _, _ = split_boundaries(series, config.split_spec)
        train = series.slice(0, val_start - series.start_index)
        return dominant_period(fit_standardizer(train).transform(train))


def export_latents_template(config: ExperimentConfig, path: Path | str, binary: bool = True) -> Path:
    """Write every window's flattened history as a latent file other models can mimic."""
    with stage("load"):
        series = load_dataset(config)
    with stage("split"):
        data = prepare_data(series, config)
    with stage("report"):
        return write_latents(history_latents(data.windows), path, binary=binary)
