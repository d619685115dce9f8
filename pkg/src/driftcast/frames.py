"""Hourly time-series frames: data model, preprocessing, scaling, windowing.

The :class:`TimeFrame` is the unit of exchange between ingestion, window
selection, training, and drift checking.  All operations here are pure:
they never mutate their inputs and return new frames, so frames can be
shared across threads as snapshots.

Missing values are represented as NaN cells; the preprocessing chain
(:func:`drop_sparse_features` -> :func:`drop_incomplete_rows` ->
:func:`variance_filter`) removes them entirely before scaling and
windowing, which both require complete data.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    EmptyFrame,
    InsufficientData,
    InvalidData,
    InvalidGrid,
    ParseError,
    SchemaMismatch,
)

HOUR = np.timedelta64(1, "h")

EARTH_RADIUS_KM = 6371.0
KM_PER_DEGREE_LAT = EARTH_RADIUS_KM * math.pi / 180.0

DEFAULT_LOOKBACK = 24
DEFAULT_HORIZON = 6
DEFAULT_VALIDATION_DAYS = 10
DEFAULT_MAX_MISSING = 40
DEFAULT_VARIANCE_EPS = 1e-12

HOUR_SIN = "hour_sin"
HOUR_COS = "hour_cos"

TIMESTAMP_FORMAT = "%Y-%m-%dT%H:%M:%SZ"


@dataclass(frozen=True)
class TimeFrame:
    """Timestamp-indexed feature table with NaN-marked missing cells.

    Parameters
    ----------
    timestamps
        ``datetime64[s]`` array, strictly increasing, interpreted as UTC.
    columns
        Unique feature names, one per column of ``values``.
    values
        ``(n_rows, n_columns)`` float64 array; NaN means missing.
    """

    timestamps: np.ndarray
    columns: tuple[str, ...]
    values: np.ndarray

    def __post_init__(self):
        ts = np.asarray(self.timestamps, dtype="datetime64[s]")
        vals = np.asarray(self.values, dtype=np.float64)
        if vals.ndim != 2:
            raise InvalidData(f"values must be 2-D, got shape {vals.shape}")
        if vals.shape[0] != ts.shape[0]:
            raise InvalidData(
                f"{ts.shape[0]} timestamps but {vals.shape[0]} value rows"
            )
        if vals.shape[1] != len(self.columns):
            raise InvalidData(
                f"{len(self.columns)} column names but {vals.shape[1]} value columns"
            )
        if len(set(self.columns)) != len(self.columns):
            raise InvalidData("column names must be unique")
        if ts.shape[0] > 1 and not np.all(np.diff(ts) > np.timedelta64(0, "s")):
            raise InvalidData("timestamps must be strictly increasing")
        object.__setattr__(self, "timestamps", ts)
        object.__setattr__(self, "columns", tuple(self.columns))
        object.__setattr__(self, "values", vals)

    @property
    def n_rows(self) -> int:
        return self.values.shape[0]

    @property
    def n_columns(self) -> int:
        return self.values.shape[1]

    def missing_mask(self) -> np.ndarray:
        """Boolean (n_rows, n_columns) mask, True where a cell is missing."""
        return np.isnan(self.values)

    def is_hourly_contiguous(self) -> bool:
        if self.n_rows < 2:
            return True
        return bool(np.all(np.diff(self.timestamps) == HOUR))

    def column_index(self, name: str) -> int:
        try:
            return self.columns.index(name)
        except ValueError:
            raise SchemaMismatch(f"no column named {name!r}") from None

    def column(self, name: str) -> np.ndarray:
        return self.values[:, self.column_index(name)]

    def select_columns(self, names) -> "TimeFrame":
        idx = [self.column_index(n) for n in names]
        return TimeFrame(self.timestamps, tuple(names), self.values[:, idx])

    def tail(self, n_rows: int) -> "TimeFrame":
        if n_rows >= self.n_rows:
            return self
        return TimeFrame(
            self.timestamps[-n_rows:], self.columns, self.values[-n_rows:]
        )

    def head(self, n_rows: int) -> "TimeFrame":
        if n_rows >= self.n_rows:
            return self
        return TimeFrame(
            self.timestamps[:n_rows], self.columns, self.values[:n_rows]
        )

    def append_row(self, timestamp, row_values) -> "TimeFrame":
        """Extend by one row; the new timestamp must be exactly one hour later."""
        ts = np.datetime64(timestamp, "s")
        if self.n_rows and ts - self.timestamps[-1] != HOUR:
            raise InvalidData(
                f"appended row at {ts} does not extend {self.timestamps[-1]} by 1 hour"
            )
        row = np.asarray(row_values, dtype=np.float64).reshape(1, -1)
        if row.shape[1] != self.n_columns:
            raise SchemaMismatch(
                f"row has {row.shape[1]} values, frame has {self.n_columns} columns"
            )
        return TimeFrame(
            np.concatenate([self.timestamps, np.array([ts], dtype="datetime64[s]")]),
            self.columns,
            np.concatenate([self.values, row]),
        )


@dataclass(frozen=True)
class GridSpec:
    """Square grid of coordinates centered on a location.

    ``span_km`` is the side length; ``points_per_side`` points are placed
    equidistantly along each axis (a single point degenerates to the center).
    """

    center: tuple[float, float]
    span_km: float
    points_per_side: int


@dataclass(frozen=True)
class ScalerParams:
    """Per-column min/max learned from training rows.

    Transform maps v -> (v - min) / (max - min); columns with max == min
    map to 0 so the transform stays total (the variance filter normally
    removes such columns before fitting).
    """

    columns: tuple[str, ...]
    mins: np.ndarray
    maxs: np.ndarray

    def __post_init__(self):
        mins = np.asarray(self.mins, dtype=np.float64)
        maxs = np.asarray(self.maxs, dtype=np.float64)
        if mins.shape != (len(self.columns),) or maxs.shape != (len(self.columns),):
            raise SchemaMismatch("scaler arrays must match the column count")
        if np.any(maxs < mins):
            raise InvalidData("scaler max must be >= min for every column")
        object.__setattr__(self, "columns", tuple(self.columns))
        object.__setattr__(self, "mins", mins)
        object.__setattr__(self, "maxs", maxs)

    def _spans(self) -> np.ndarray:
        return self.maxs - self.mins

    def transform_array(self, values: np.ndarray) -> np.ndarray:
        spans = self._spans()
        safe = np.where(spans > 0, spans, 1.0)
        out = (values - self.mins) / safe
        return np.where(spans > 0, out, 0.0)

    def inverse_array(self, values: np.ndarray) -> np.ndarray:
        return values * self._spans() + self.mins

    def transform_column(self, name: str, values: np.ndarray) -> np.ndarray:
        i = self._column_index(name)
        span = self.maxs[i] - self.mins[i]
        if span <= 0:
            return np.zeros_like(np.asarray(values, dtype=np.float64))
        return (np.asarray(values, dtype=np.float64) - self.mins[i]) / span

    def inverse_column(self, name: str, values: np.ndarray) -> np.ndarray:
        i = self._column_index(name)
        span = self.maxs[i] - self.mins[i]
        return np.asarray(values, dtype=np.float64) * span + self.mins[i]

    def _column_index(self, name: str) -> int:
        try:
            return self.columns.index(name)
        except ValueError:
            raise SchemaMismatch(f"scaler has no column named {name!r}") from None


@dataclass(frozen=True)
class WindowedDataset:
    """Supervised look-back/horizon tensors cut from a complete frame.

    ``inputs`` is ``(n, lookback, F)`` in sequence layout or
    ``(n, lookback * F)`` in flat layout (time-major concatenation: all
    features of the oldest hour first).  ``labels`` is ``(n, horizon)``
    for the single target variable, or None for inference-only blocks.
    ``sample_timestamps[k]`` is the instant of the last look-back step of
    sample ``k``; its labels cover offsets +1 .. +horizon hours.
    """

    inputs: np.ndarray
    labels: np.ndarray | None
    sample_timestamps: np.ndarray
    layout: str
    lookback: int
    horizon: int
    n_features: int

    @property
    def n_samples(self) -> int:
        return self.inputs.shape[0]


def build_grid(spec: GridSpec) -> list[tuple[float, float]]:
    """Equidistant square grid of (lat, lon) coordinates around a center.

    Spacing along each axis is ``span_km / (points_per_side - 1)``;
    kilometres are converted to degrees with a local equirectangular
    approximation (Earth radius 6371 km, longitude shrunk by the cosine
    of the center latitude).  Points are ordered row-major: row index
    moves south to north, column index west to east.
    """
    if spec.points_per_side < 1:
        raise InvalidGrid(f"points_per_side must be >= 1, got {spec.points_per_side}")
    if spec.span_km < 0:
        raise InvalidGrid(f"span_km must be >= 0, got {spec.span_km}")
    lat0, lon0 = spec.center
    p = spec.points_per_side
    if p == 1:
        offsets = np.array([0.0])
    else:
        offsets = np.linspace(-spec.span_km / 2.0, spec.span_km / 2.0, p)
    km_per_degree_lon = KM_PER_DEGREE_LAT * math.cos(math.radians(lat0))
    points = []
    for off_lat in offsets:
        for off_lon in offsets:
            points.append(
                (lat0 + off_lat / KM_PER_DEGREE_LAT, lon0 + off_lon / km_per_degree_lon)
            )
    return points


def drop_sparse_features(
    frame: TimeFrame, max_missing: int = DEFAULT_MAX_MISSING
) -> TimeFrame:
    """Remove columns whose missing-cell count exceeds ``max_missing``."""
    counts = np.isnan(frame.values).sum(axis=0)
    keep = np.flatnonzero(counts <= max_missing)
    if keep.size == 0:
        raise EmptyFrame(f"every column has more than {max_missing} missing values")
    if keep.size == frame.n_columns:
        return frame
    return TimeFrame(
        frame.timestamps,
        tuple(frame.columns[i] for i in keep),
        frame.values[:, keep],
    )


def drop_incomplete_rows(frame: TimeFrame) -> TimeFrame:
    """Remove rows containing missing cells, keeping the contiguous suffix.

    Dropping interior rows tears the hourly cadence, so the result is
    truncated to the rows after the last incomplete one: the most recent
    stretch of complete, hourly-contiguous data.
    """
    complete = ~np.isnan(frame.values).any(axis=1)
    if not complete.any():
        raise EmptyFrame("no rows without missing values")
    incomplete_idx = np.flatnonzero(~complete)
    start = 0 if incomplete_idx.size == 0 else int(incomplete_idx[-1]) + 1
    if start >= frame.n_rows:
        raise EmptyFrame("the most recent row is incomplete; no usable suffix")
    out = TimeFrame(frame.timestamps[start:], frame.columns, frame.values[start:])
    if not out.is_hourly_contiguous():
        raise InvalidData("complete suffix is not hourly contiguous")
    return out


def variance_filter(frame: TimeFrame, eps: float = DEFAULT_VARIANCE_EPS) -> TimeFrame:
    """Remove columns with population variance <= ``eps`` (static features)."""
    if np.isnan(frame.values).any():
        raise InvalidData("variance_filter requires a frame without missing cells")
    variances = frame.values.var(axis=0)
    keep = np.flatnonzero(variances > eps)
    if keep.size == 0:
        raise EmptyFrame(f"every column has variance <= {eps}")
    if keep.size == frame.n_columns:
        return frame
    return TimeFrame(
        frame.timestamps,
        tuple(frame.columns[i] for i in keep),
        frame.values[:, keep],
    )


def minmax_fit(frame: TimeFrame) -> ScalerParams:
    """Learn per-column min/max from (training) rows."""
    if frame.n_rows == 0:
        raise InsufficientData("cannot fit a scaler on an empty frame")
    return ScalerParams(
        frame.columns,
        np.nanmin(frame.values, axis=0),
        np.nanmax(frame.values, axis=0),
    )


def _require_same_columns(frame: TimeFrame, params: ScalerParams):
    if frame.columns != params.columns:
        raise SchemaMismatch(
            f"frame columns {frame.columns} do not match scaler columns {params.columns}"
        )


def minmax_transform(frame: TimeFrame, params: ScalerParams) -> TimeFrame:
    """Scale to [0, 1] on the fit range; out-of-range rows extrapolate linearly."""
    _require_same_columns(frame, params)
    return TimeFrame(frame.timestamps, frame.columns, params.transform_array(frame.values))


def minmax_inverse(frame: TimeFrame, params: ScalerParams) -> TimeFrame:
    _require_same_columns(frame, params)
    return TimeFrame(frame.timestamps, frame.columns, params.inverse_array(frame.values))


def hour_of_day(timestamps) -> np.ndarray:
    """UTC hour-of-day in [0, 24) for an array of timestamps."""
    ts = np.asarray(timestamps, dtype="datetime64[s]")
    return ts.astype("datetime64[h]").astype(np.int64) % 24


def encode_hour(timestamp) -> tuple[float, float]:
    """(sin, cos) encoding of the UTC hour-of-day on the 24-hour circle."""
    h = float(hour_of_day(np.array([timestamp]))[0])
    angle = 2.0 * math.pi * h / 24.0
    return math.sin(angle), math.cos(angle)


def append_hour_encoding(frame: TimeFrame) -> TimeFrame:
    """Append ``hour_sin`` / ``hour_cos`` feature columns; no-op if present."""
    if HOUR_SIN in frame.columns and HOUR_COS in frame.columns:
        return frame
    angles = 2.0 * np.pi * hour_of_day(frame.timestamps) / 24.0
    extra = np.column_stack([np.sin(angles), np.cos(angles)])
    return TimeFrame(
        frame.timestamps,
        frame.columns + (HOUR_SIN, HOUR_COS),
        np.concatenate([frame.values, extra], axis=1),
    )


def _require_complete_contiguous(frame: TimeFrame, op: str):
    if np.isnan(frame.values).any():
        raise InvalidData(f"{op} requires a frame without missing cells")
    if not frame.is_hourly_contiguous():
        raise InvalidData(f"{op} requires hourly-contiguous timestamps")


def make_windows(
    frame: TimeFrame,
    target: str,
    lookback: int = DEFAULT_LOOKBACK,
    horizon: int = DEFAULT_HORIZON,
    layout: str = "sequence",
) -> WindowedDataset:
    """Cut a complete frame into supervised (look-back, horizon) samples.

    Sample ``k`` uses rows ``[k, k + lookback)`` as input and the target
    at rows ``[k + lookback, k + lookback + horizon)`` as its label, so
    ``n_samples = n_rows - lookback - horizon + 1``.
    """
    if layout not in ("sequence", "flat"):
        raise InvalidData(f"unknown layout {layout!r}")
    _require_complete_contiguous(frame, "make_windows")
    n = frame.n_rows - lookback - horizon + 1
    if n < 1:
        raise InsufficientData(
            f"{frame.n_rows} rows cannot fit lookback {lookback} + horizon {horizon}"
        )
    n_features = frame.n_columns
    target_values = frame.column(target)
    # Strided view over row windows, materialized once into the sample axis.
    inputs = np.stack([frame.values[k : k + lookback] for k in range(n)])
    labels = np.stack(
        [target_values[k + lookback : k + lookback + horizon] for k in range(n)]
    )
    if layout == "flat":
        inputs = inputs.reshape(n, lookback * n_features)
    return WindowedDataset(
        inputs=inputs,
        labels=labels,
        sample_timestamps=frame.timestamps[lookback - 1 : lookback - 1 + n],
        layout=layout,
        lookback=lookback,
        horizon=horizon,
        n_features=n_features,
    )


def latest_input_block(
    frame: TimeFrame, lookback: int = DEFAULT_LOOKBACK, layout: str = "flat"
) -> WindowedDataset:
    """Single inference sample from the most recent ``lookback`` rows."""
    if frame.n_rows < lookback:
        raise InsufficientData(
            f"{frame.n_rows} rows is fewer than lookback {lookback}"
        )
    block = frame.tail(lookback)
    _require_complete_contiguous(block, "latest_input_block")
    inputs = block.values[np.newaxis, :, :]
    if layout == "flat":
        inputs = inputs.reshape(1, lookback * block.n_columns)
    return WindowedDataset(
        inputs=inputs,
        labels=None,
        sample_timestamps=block.timestamps[-1:],
        layout=layout,
        lookback=lookback,
        horizon=0,
        n_features=block.n_columns,
    )


def split_train_validation(
    frame: TimeFrame, validation_days: int = DEFAULT_VALIDATION_DAYS
) -> tuple[TimeFrame, TimeFrame]:
    """Hold out the most recent ``validation_days`` whole days for validation."""
    val_rows = validation_days * 24
    if frame.n_rows <= val_rows:
        raise InsufficientData(
            f"{frame.n_rows} rows cannot spare {val_rows} validation rows"
        )
    train = TimeFrame(
        frame.timestamps[:-val_rows], frame.columns, frame.values[:-val_rows]
    )
    val = TimeFrame(
        frame.timestamps[-val_rows:], frame.columns, frame.values[-val_rows:]
    )
    return train, val


def format_timestamp(ts) -> str:
    """RFC 3339 UTC string (seconds resolution, Z suffix)."""
    return str(np.datetime64(ts, "s")) + "Z"


def parse_timestamp(text: str) -> np.datetime64:
    cleaned = text.strip()
    if cleaned.endswith("Z"):
        cleaned = cleaned[:-1]
    elif cleaned.endswith("+00:00"):
        cleaned = cleaned[:-6]
    try:
        return np.datetime64(cleaned, "s")
    except ValueError:
        raise ParseError(f"unparseable timestamp {text!r}") from None


def write_frame_csv(frame: TimeFrame, fh):
    """Write the replay exchange format to an open text stream: header
    ``timestamp,<columns...>``, RFC 3339 UTC timestamps, empty cells for
    missing values, floats via ``repr`` for lossless round-trips."""
    writer = csv.writer(fh)
    writer.writerow(("timestamp",) + frame.columns)
    for i in range(frame.n_rows):
        row = [format_timestamp(frame.timestamps[i])]
        for v in frame.values[i]:
            row.append("" if np.isnan(v) else repr(float(v)))
        writer.writerow(row)


def frame_to_csv(frame: TimeFrame, path):
    """Write the replay exchange format to ``path`` (see write_frame_csv)."""
    with open(path, "w", newline="") as fh:
        write_frame_csv(frame, fh)


def frame_from_csv(path, require_hourly: bool = True) -> TimeFrame:
    """Read the replay exchange format written by :func:`frame_to_csv`."""
    with open(path, "r", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(f"{path}: empty file") from None
        if not header or header[0] != "timestamp":
            raise ParseError(f"{path}: first header column must be 'timestamp'")
        columns = tuple(header[1:])
        if not columns:
            raise ParseError(f"{path}: no feature columns")
        timestamps = []
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(columns) + 1:
                raise ParseError(
                    f"{path}: row {lineno} has {len(row)} cells, expected {len(columns) + 1}"
                )
            timestamps.append(parse_timestamp(row[0]))
            parsed = np.empty(len(columns))
            for j, cell in enumerate(row[1:]):
                if cell == "":
                    parsed[j] = np.nan
                else:
                    try:
                        parsed[j] = float(cell)
                    except ValueError:
                        raise ParseError(
                            f"{path}: row {lineno} column {columns[j]!r}: "
                            f"unparseable value {cell!r}"
                        ) from None
            rows.append(parsed)
    if not rows:
        raise ParseError(f"{path}: no data rows")
    ts = np.array(timestamps, dtype="datetime64[s]")
    if ts.shape[0] > 1:
        deltas = np.diff(ts)
        if np.any(deltas <= np.timedelta64(0, "s")):
            raise InvalidData(f"{path}: timestamps not strictly increasing")
        if require_hourly and np.any(deltas != HOUR):
            raise InvalidData(f"{path}: timestamps are not hourly contiguous")
    return TimeFrame(ts, columns, np.array(rows))
