"""Bridge for features exported by an external frozen feature extractor.

Binary layout (little-endian)::

    b"CDSLAT1\\0"               8-byte magic
    uint32 name_length, name    UTF-8 model name
    int64 d, T, M, count
    count × (int64 anchor_t, d × float64 feature, T·M × float64 future)

The CSV twin starts with a ``CDSLAT1,<model_name>,<d>,<T>,<M>,<count>`` line,
followed by a header ``anchor_t,f0..f{d-1},y0..y{T·M-1}`` and one row per record.
"""
from __future__ import annotations

import io
import logging
import struct
from pathlib import Path
from typing import Dict, Sequence

import numpy as np
import pandas as pd

from src.common.errors import EmptyInput, FormatError, InsufficientData, ShapeMismatch
from src.forecasters.base import FeatureExtractor, Forecaster
from src.forecasters.head import fit_head_least_squares
from src.models.forecast import LatentDataset, LatentRecord
from src.models.series import WindowSample

LOGGER = logging.getLogger(__name__)

MAGIC = b"CDSLAT1\x00"
TEXT_MAGIC = "CDSLAT1"


def _record_dtype(d: int, outputs: int) -> np.dtype:
    return np.dtype([("anchor", "<i8"), ("feature", "<f8", (d,)), ("future", "<f8", (outputs,))])


def validate_latents(dataset: LatentDataset) -> LatentDataset:
    """Check shared dimensions and strictly increasing anchors."""
    if dataset.d < 1 or dataset.T < 1 or dataset.M < 1:
        raise FormatError(f"Invalid dimensions d={dataset.d}, T={dataset.T}, M={dataset.M}")
    if not dataset.records:
        raise EmptyInput("Latent dataset has no records")
    previous = None
    for index, record in enumerate(dataset.records):
        if np.shape(record.feature) != (dataset.d,):
            raise FormatError(
                f"Feature length {np.size(record.feature)} does not match d={dataset.d}", record=index
            )
        if np.size(record.future) != dataset.T * dataset.M:
            raise FormatError(
                f"Future has {np.size(record.future)} values, expected T·M={dataset.T * dataset.M}",
                record=index,
            )
        if previous is not None and record.anchor_t <= previous:
            raise FormatError(f"Anchor {record.anchor_t} is not after {previous}", record=index)
        previous = record.anchor_t
    return dataset


def write_latents(dataset: LatentDataset, path: Path | str, binary: bool = True) -> Path:
    """
    Write a latent dataset in the binary format or its CSV twin.

    Args:
        dataset: Records to write
        path: Destination file
        binary: Binary layout when True, CSV twin otherwise

    Returns:
        The written path
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    outputs = dataset.T * dataset.M

    if binary:
        records = np.zeros(dataset.count, dtype=_record_dtype(dataset.d, outputs))
        if dataset.count:
            records["anchor"] = dataset.anchors
            records["feature"] = dataset.feature_matrix()
            records["future"] = dataset.future_matrix()
        name = dataset.model_name.encode("utf-8")
        with open(path, "wb") as handle:
            handle.write(MAGIC)
            handle.write(struct.pack("<I", len(name)))
            handle.write(name)
            handle.write(struct.pack("<4q", dataset.d, dataset.T, dataset.M, dataset.count))
            handle.write(records.tobytes())
        return path

    columns = (
        ["anchor_t"]
        + [f"f{i}" for i in range(dataset.d)]
        + [f"y{i}" for i in range(outputs)]
    )
    body = np.hstack(
        [
            dataset.anchors[:, None].astype(np.float64),
            dataset.feature_matrix(),
            dataset.future_matrix(),
        ]
    ) if dataset.count else np.zeros((0, len(columns)))
    frame = pd.DataFrame(body, columns=columns)
    frame["anchor_t"] = dataset.anchors
    with open(path, "w", encoding="utf-8", newline="") as handle:
        handle.write(
            f"{TEXT_MAGIC},{dataset.model_name},{dataset.d},{dataset.T},{dataset.M},{dataset.count}\n"
        )
        frame.to_csv(handle, index=False, float_format="%.17g")
    return path


def read_latents(path: Path | str) -> LatentDataset:
    """
    Read a latent dataset, detecting binary or CSV layout from the magic.

    Raises:
        FormatError: on malformed headers or records (with line/record numbers)
        EmptyInput: when the file declares or holds no records
    """
    path = Path(path)
    raw = path.read_bytes()
    if raw.startswith(MAGIC):
        dataset = _parse_binary(raw)
    elif raw.startswith(TEXT_MAGIC.encode("ascii")):
        dataset = _parse_text(raw.decode("utf-8"))
    else:
        raise FormatError(f"{path} does not start with the {TEXT_MAGIC} magic", line=1)
    LOGGER.info("Read %d latent records (d=%d) from %s", dataset.count, dataset.d, path)
    return validate_latents(dataset)


def _parse_binary(raw: bytes) -> LatentDataset:
    offset = len(MAGIC)
    try:
        (name_length,) = struct.unpack_from("<I", raw, offset)
        offset += 4
        model_name = raw[offset : offset + name_length].decode("utf-8")
        offset += name_length
        d, horizon, n_channels, count = struct.unpack_from("<4q", raw, offset)
        offset += 32
    except (struct.error, UnicodeDecodeError) as exc:
        raise FormatError(f"Truncated or corrupt header: {exc}") from exc

    if d < 1 or horizon < 1 or n_channels < 1:
        raise FormatError(f"Invalid dimensions d={d}, T={horizon}, M={n_channels}")
    if count == 0:
        raise EmptyInput("Latent file has no records")

    dtype = _record_dtype(d, horizon * n_channels)
    payload = raw[offset:]
    if len(payload) != count * dtype.itemsize:
        complete = len(payload) // dtype.itemsize
        raise FormatError(
            f"Expected {count} records of {dtype.itemsize} bytes, found {len(payload)} bytes",
            record=complete,
        )
    records = np.frombuffer(payload, dtype=dtype, count=count)
    return LatentDataset(
        model_name=model_name,
        d=int(d),
        T=int(horizon),
        M=int(n_channels),
        records=[
            LatentRecord(
                anchor_t=int(row["anchor"]),
                feature=np.array(row["feature"], dtype=np.float64),
                future=np.array(row["future"], dtype=np.float64).reshape(horizon, n_channels),
            )
            for row in records
        ],
    )


def _parse_text(text: str) -> LatentDataset:
    header, _, body = text.partition("\n")
    fields = header.strip().split(",")
    if len(fields) != 6 or fields[0] != TEXT_MAGIC:
        raise FormatError("Header must be CDSLAT1,model_name,d,T,M,count", line=1)
    try:
        d, horizon, n_channels, count = (int(value) for value in fields[2:])
    except ValueError as exc:
        raise FormatError(f"Non-integer header dimension: {exc}", line=1) from exc
    if d < 1 or horizon < 1 or n_channels < 1:
        raise FormatError(f"Invalid dimensions d={d}, T={horizon}, M={n_channels}", line=1)

    try:
        frame = pd.read_csv(io.StringIO(body))
    except pd.errors.EmptyDataError as exc:
        raise FormatError("Missing column header", line=2) from exc
    if frame.empty or count == 0:
        raise EmptyInput("Latent file has no records")

    outputs = horizon * n_channels
    expected = 1 + d + outputs
    if frame.shape[1] != expected:
        raise FormatError(
            f"Expected {expected} columns for d={d} and T·M={outputs}, found {frame.shape[1]}", line=2
        )
    if len(frame) != count:
        raise FormatError(f"Header declares {count} records, found {len(frame)}", line=1)

    values = frame.apply(pd.to_numeric, errors="coerce").to_numpy(dtype=np.float64)
    bad_rows = np.where(~np.isfinite(values).all(axis=1))[0]
    if bad_rows.size:
        raise FormatError("Non-numeric or missing value", line=int(bad_rows[0]) + 3, record=int(bad_rows[0]))

    return LatentDataset(
        model_name=fields[1],
        d=d,
        T=horizon,
        M=n_channels,
        records=[
            LatentRecord(
                anchor_t=int(row[0]),
                feature=row[1 : 1 + d].copy(),
                future=row[1 + d :].reshape(horizon, n_channels).copy(),
            )
            for row in values
        ],
    )


class LatentExtractor(FeatureExtractor):
    """Looks up precomputed features by window anchor; one head with T·M outputs."""

    def __init__(self, dataset: LatentDataset) -> None:
        self.dataset = dataset
        self._index: Dict[int, int] = {record.anchor_t: i for i, record in enumerate(dataset.records)}

    @property
    def n_groups(self) -> int:
        return 1

    @property
    def feature_dim(self) -> int:
        return self.dataset.d

    @property
    def group_outputs(self) -> int:
        return self.dataset.T * self.dataset.M

    def has_anchor(self, anchor_t: int) -> bool:
        return anchor_t in self._index

    def extract(self, window: WindowSample) -> np.ndarray:
        index = self._index.get(window.anchor_t)
        if index is None:
            raise InsufficientData(f"No latent feature recorded for anchor {window.anchor_t}")
        return np.asarray(self.dataset.records[index].feature)[None, :]

    def assemble(self, outputs: np.ndarray) -> np.ndarray:
        return np.asarray(outputs).reshape(self.dataset.T, self.dataset.M)

    def split_targets(self, future: np.ndarray) -> np.ndarray:
        future = np.asarray(future)
        if future.shape != (self.dataset.T, self.dataset.M):
            raise ShapeMismatch(f"Expected future {(self.dataset.T, self.dataset.M)}, got {future.shape}")
        return future.reshape(1, -1)


def check_latent_futures(
    dataset: LatentDataset,
    windows: Sequence[WindowSample],
    rtol: float = 1e-6,
    atol: float = 1e-6,
) -> None:
    """
    Require each record's future to equal the pipeline future of the same anchor.

    Heads are fitted on record futures but scored and adapted on window
    futures, so both must live on the same (standardized) scale.

    Raises:
        FormatError: naming the first record that disagrees
    """
    index = {record.anchor_t: i for i, record in enumerate(dataset.records)}
    for window in windows:
        position = index.get(window.anchor_t)
        if position is None:
            continue
        future = np.asarray(dataset.records[position].future, dtype=np.float64).reshape(window.future.shape)
        if not np.allclose(future, window.future, rtol=rtol, atol=atol):
            gap = float(np.max(np.abs(future - window.future)))
            raise FormatError(
                f"Future of anchor {window.anchor_t} differs from the standardized series "
                f"(max abs gap {gap:.3g}); export futures after train standardization",
                record=position,
            )


def fit_latent_forecaster(
    dataset: LatentDataset,
    train_anchors: Sequence[int],
    ridge: float = 1e-4,
) -> Forecaster:
    """Fit a single head on the records whose anchors are in ``train_anchors``."""
    wanted = set(int(anchor) for anchor in train_anchors)
    rows = [i for i, record in enumerate(dataset.records) if record.anchor_t in wanted]
    if not rows:
        raise EmptyInput("No latent records fall inside the training anchors")
    head = fit_head_least_squares(
        dataset.feature_matrix()[rows], dataset.future_matrix()[rows], ridge=ridge
    )
    LOGGER.info("Fitted latent head for '%s' on %d records", dataset.model_name, len(rows))
    return Forecaster(
        extractor=LatentExtractor(dataset),
        heads=(head,),
        horizon=dataset.T,
        n_channels=dataset.M,
        name=dataset.model_name,
    )


def history_latents(windows: Sequence[WindowSample], model_name: str = "history") -> LatentDataset:
    """Export windows with their flattened histories as features (a format template)."""
    if not windows:
        raise EmptyInput("No windows to export")
    first = windows[0]
    return LatentDataset(
        model_name=model_name,
        d=first.lookback * first.n_channels,
        T=first.horizon,
        M=first.n_channels,
        records=[
            LatentRecord(
                anchor_t=window.anchor_t,
                feature=window.history.reshape(-1).copy(),
                future=window.future.copy(),
            )
            for window in windows
        ],
    )
