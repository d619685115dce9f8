"""Performance-based concept-drift detection.

A trained model's quality is monitored by rebuilding a validation set
over a sliding window of the most recent hours (240 by default, windowed
with the model's own frozen scaler so the drift signal cannot leak into
normalization) and comparing the model's MSE there against the best
validation loss it achieved when trained.  Drift is declared when the
current loss is at least ``(1 + loss_increase_threshold)`` times that
baseline — a relative degradation of 5% or more by default — which the
scheduler treats as a retrain trigger.  Each retrain starts a new model
generation whose own best validation loss becomes the next baseline.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import InsufficientData, InvalidArgument, SchemaMismatch
from .frames import (
    DEFAULT_HORIZON,
    DEFAULT_LOOKBACK,
    ScalerParams,
    TimeFrame,
    WindowedDataset,
    make_windows,
    minmax_transform,
)
from .models.base import TrainedModel, mse

DEFAULT_WINDOW_HOURS = 240
DEFAULT_LOSS_INCREASE_THRESHOLD = 0.05


@dataclass(frozen=True)
class DriftConfig:
    """Sliding-window size, relative-loss trigger level, and check cadence."""

    window_hours: int = DEFAULT_WINDOW_HOURS
    loss_increase_threshold: float = DEFAULT_LOSS_INCREASE_THRESHOLD
    check_period_hours: int = 1

    def __post_init__(self):
        if self.loss_increase_threshold <= 0:
            raise InvalidArgument(
                f"loss_increase_threshold must be > 0, got {self.loss_increase_threshold}"
            )
        if self.check_period_hours < 1:
            raise InvalidArgument(
                f"check_period_hours must be >= 1, got {self.check_period_hours}"
            )
        if self.window_hours < 1:
            raise InvalidArgument(
                f"window_hours must be >= 1, got {self.window_hours}"
            )


@dataclass(frozen=True)
class DriftVerdict:
    """One drift check: the two losses compared and the decision."""

    checked_at: np.datetime64
    baseline_loss: float
    current_loss: float
    relative_increase: float
    drifted: bool


def build_drift_window(
    frame: TimeFrame,
    config: DriftConfig,
    scaler: ScalerParams,
    target: str,
    lookback: int = DEFAULT_LOOKBACK,
    horizon: int = DEFAULT_HORIZON,
) -> WindowedDataset:
    """Supervised samples over the most recent ``window_hours`` rows.

    The frame is narrowed to the columns the model was trained on and
    scaled with the model's frozen parameters (never refit), yielding
    ``window_hours - lookback - horizon + 1`` samples.
    """
    if config.window_hours <= lookback + horizon:
        raise InvalidArgument(
            f"window_hours ({config.window_hours}) must exceed "
            f"lookback + horizon ({lookback + horizon})"
        )
    missing = [c for c in scaler.columns if c not in frame.columns]
    if missing:
        raise SchemaMismatch(f"frame lacks model columns {missing}")
    narrowed = frame.select_columns(scaler.columns)
    if narrowed.n_rows < config.window_hours:
        raise InsufficientData(
            f"{narrowed.n_rows} rows available, drift window needs {config.window_hours}"
        )
    recent = narrowed.tail(config.window_hours)
    if np.isnan(recent.values).any():
        raise InsufficientData(
            "drift window contains missing cells; cannot evaluate the model on it"
        )
    scaled = minmax_transform(recent, scaler)
    return make_windows(scaled, target, lookback=lookback, horizon=horizon, layout="flat")


def check_drift(
    model: TrainedModel,
    window: WindowedDataset,
    config: DriftConfig,
    checked_at: Optional[np.datetime64] = None,
) -> DriftVerdict:
    """Compare the model's loss on the sliding window against its baseline.

    Baseline is the model's own best training-time validation loss.  A
    zero baseline (perfectly fit validation set) degrades to "any
    positive current loss is drift".  The model is never modified.
    """
    if window.labels is None:
        raise InsufficientData("drift window has no labels")
    baseline = model.report.min_val_loss
    current = mse(model.predict(window), window.labels)
    if baseline > 0:
        relative = current / baseline - 1.0
        drifted = current >= (1.0 + config.loss_increase_threshold) * baseline
    else:
        relative = float("inf") if current > 0 else 0.0
        drifted = current > 0
    stamp = (
        np.datetime64(checked_at, "s")
        if checked_at is not None
        else np.datetime64(window.sample_timestamps[-1], "s")
    )
    return DriftVerdict(
        checked_at=stamp,
        baseline_loss=float(baseline),
        current_loss=float(current),
        relative_increase=float(relative),
        drifted=bool(drifted),
    )
