"""Regressor kind backed by pre-computed predictions on disk.

Lets forecasts produced outside this package (for example by large
sequence models trained elsewhere) flow through the same scheduling,
drift-checking, and evaluation pipeline.  The prediction file is a CSV
with header ``timestamp,step1,...,step<horizon>`` holding physical-unit
values, one row per forecast issue time; :meth:`ExternalState.predict`
looks rows up by the sample timestamps and converts them to scaled label
space with the model's scaler so downstream inverse-scaling round-trips.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from ..errors import InvalidData, NotFound, ParseError
from ..frames import parse_timestamp
from .base import ExternalParams, mse


@dataclass(frozen=True)
class ExternalState:
    """Timestamp-keyed prediction table; ignores the numeric inputs."""

    timestamps: np.ndarray
    physical_values: np.ndarray
    target: str
    scaler: object

    input_width = None  # accepts any input width; rows are keyed by time

    def predict(self, X: np.ndarray, timestamps=None) -> np.ndarray:
        if timestamps is None:
            raise InvalidData(
                "external predictions require sample timestamps; "
                "pass a WindowedDataset, not a raw matrix"
            )
        ts = np.asarray(timestamps, dtype="datetime64[s]")
        idx = np.searchsorted(self.timestamps, ts)
        idx_clipped = np.minimum(idx, self.timestamps.shape[0] - 1)
        found = self.timestamps[idx_clipped] == ts
        if not found.all():
            missing = ts[~found][0]
            raise NotFound(f"no stored prediction for issue time {missing}")
        physical = self.physical_values[idx_clipped]
        if self.scaler is None:
            return np.asarray(physical, dtype=np.float64)
        return self.scaler.transform_column(self.target, physical)


def load_prediction_table(path, horizon: int):
    """Parse the prediction CSV into sorted (timestamps, values) arrays."""
    expected_header = ["timestamp"] + [f"step{i}" for i in range(1, horizon + 1)]
    with open(path, "r", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(f"{path}: empty prediction file") from None
        if header != expected_header:
            raise ParseError(
                f"{path}: header {header} != expected {expected_header}"
            )
        timestamps, rows = [], []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != horizon + 1:
                raise ParseError(f"{path}: row {lineno} has {len(row)} cells")
            timestamps.append(parse_timestamp(row[0]))
            try:
                rows.append([float(c) for c in row[1:]])
            except ValueError:
                raise ParseError(f"{path}: row {lineno} has a non-numeric cell") from None
    if not rows:
        raise ParseError(f"{path}: no prediction rows")
    ts = np.array(timestamps, dtype="datetime64[s]")
    order = np.argsort(ts)
    ts = ts[order]
    if np.any(np.diff(ts) == np.timedelta64(0, "s")):
        raise InvalidData(f"{path}: duplicated issue timestamps")
    return ts, np.array(rows)[order]


def save_prediction_table(path, timestamps, physical_values):
    """Inverse of :func:`load_prediction_table` (used to build fixtures)."""
    values = np.asarray(physical_values, dtype=np.float64)
    horizon = values.shape[1]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["timestamp"] + [f"step{i}" for i in range(1, horizon + 1)])
        for ts, row in zip(timestamps, values):
            writer.writerow(
                [str(np.datetime64(ts, "s")) + "Z"] + [repr(float(v)) for v in row]
            )


def train_external(
    params: ExternalParams,
    X: np.ndarray,
    y: np.ndarray,
    Xv: np.ndarray,
    yv: np.ndarray,
    seed: int,
    val_timestamps=None,
    scaler=None,
    target=None,
):
    """Load the prediction table and score it once on the validation set.

    There is nothing to train; the single validation-MSE entry gives the
    drift detector its baseline.  Validation samples missing from the
    table simply don't contribute (the table may cover only the streamed
    range).
    """
    del X, y, Xv, seed
    horizon = yv.shape[1]
    ts, values = load_prediction_table(params.path, horizon)
    state = ExternalState(
        timestamps=ts, physical_values=values, target=target, scaler=scaler
    )
    if val_timestamps is None:
        val_loss = 0.0
    else:
        sample_ts = np.asarray(val_timestamps, dtype="datetime64[s]")
        idx = np.searchsorted(ts, sample_ts)
        idx_clipped = np.minimum(idx, ts.shape[0] - 1)
        found = ts[idx_clipped] == sample_ts
        if found.any():
            pred_physical = values[idx_clipped[found]]
            if scaler is not None and target is not None:
                pred = scaler.transform_column(target, pred_physical)
            else:
                pred = pred_physical
            val_loss = mse(pred, yv[found])
        else:
            val_loss = 0.0
    return state, [val_loss], 0
