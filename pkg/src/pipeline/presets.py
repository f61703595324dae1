"""Benchmark dataset presets: splits, horizons, look-back and search grids."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Dict, Optional, Tuple

from src.common.errors import ConfigError
from src.core.fetch import DATASET_URLS

LONG_HORIZONS = (96, 192, 336, 720)
ILLNESS_HORIZONS = (24, 36, 48, 60)


@dataclass(frozen=True)
class DatasetPreset:
    """Defaults a benchmark dataset brings to an experiment."""

    name: str
    filename: str
    split: Tuple[float, float, float]
    horizons: Tuple[int, ...]
    lookback: int
    lambda_t: Tuple[int, ...]
    lambda_p: Tuple[float, ...]
    lambda_n: Tuple[int, ...]
    lr_ratio: Tuple[float, ...]
    url: Optional[str] = None

    def config_values(self) -> Dict[str, Any]:
        """Config keys this preset sets (the first horizon is the default)."""
        return {
            "split": self.split,
            "horizon": self.horizons[0],
            "lookback": self.lookback,
            "lambda_t": self.lambda_t,
            "lambda_p": self.lambda_p,
            "lambda_n": self.lambda_n,
            "lr_ratio": self.lr_ratio,
        }


_LONG_T = (500, 1000, 2000)
_PHASE = (0.02, 0.05, 0.1)
_NEIGHBOURS = (5, 10, 20)
_ETT_RATIO = (5.0, 10.0, 20.0, 50.0)


def _ett(name: str) -> DatasetPreset:
    return DatasetPreset(
        name=name,
        filename=f"{name}.csv",
        split=(0.6, 0.2, 0.2),
        horizons=LONG_HORIZONS,
        lookback=336,
        lambda_t=_LONG_T,
        lambda_p=_PHASE,
        lambda_n=_NEIGHBOURS,
        lr_ratio=_ETT_RATIO,
        url=DATASET_URLS.get(name),
    )


PRESETS: Dict[str, DatasetPreset] = {
    **{name: _ett(name) for name in ("ETTh1", "ETTh2", "ETTm1", "ETTm2")},
    "Electricity": DatasetPreset(
        name="Electricity",
        filename="electricity.csv",
        split=(0.7, 0.1, 0.2),
        horizons=LONG_HORIZONS,
        lookback=336,
        lambda_t=_LONG_T,
        lambda_p=_PHASE,
        lambda_n=_NEIGHBOURS,
        lr_ratio=(500.0, 1000.0, 1500.0, 2000.0),
    ),
    "Traffic": DatasetPreset(
        name="Traffic",
        filename="traffic.csv",
        split=(0.7, 0.1, 0.2),
        horizons=LONG_HORIZONS,
        lookback=336,
        lambda_t=_LONG_T,
        lambda_p=_PHASE,
        lambda_n=_NEIGHBOURS,
        lr_ratio=(1000.0, 1500.0, 2000.0, 3000.0),
    ),
    "Weather": DatasetPreset(
        name="Weather",
        filename="weather.csv",
        split=(0.7, 0.1, 0.2),
        horizons=LONG_HORIZONS,
        lookback=336,
        lambda_t=_LONG_T,
        lambda_p=_PHASE,
        lambda_n=_NEIGHBOURS,
        lr_ratio=_ETT_RATIO,
    ),
    "Illness": DatasetPreset(
        name="Illness",
        filename="national_illness.csv",
        split=(0.7, 0.1, 0.2),
        horizons=ILLNESS_HORIZONS,
        lookback=104,
        lambda_t=(100, 200, 300),
        lambda_p=_PHASE,
        lambda_n=(2, 3, 5),
        lr_ratio=(10.0, 20.0, 50.0, 100.0),
    ),
}


def get_preset(name: str) -> DatasetPreset:
    """Look up a preset by name (case-insensitive)."""
    for key, preset in PRESETS.items():
        if key.lower() == name.lower():
            return preset
    raise ConfigError(f"Unknown preset '{name}'; available: {', '.join(PRESETS)}")
