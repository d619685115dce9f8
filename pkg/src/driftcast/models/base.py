"""Shared regressor interface: specs, hyperparameters, reports, trained models.

Every model kind trains on a :class:`~driftcast.frames.WindowedDataset`
pair (train/validation) in scaled feature space, tracks a per-epoch (or
per-boosting-round) validation MSE series, and returns an immutable
:class:`TrainedModel` whose ``predict`` emits a ``(n, horizon)`` matrix
in scaled label space.  Callers apply the stored scaler's inverse to get
physical units.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..errors import InsufficientData, InvalidArgument, InvalidData, SchemaMismatch
from ..frames import ScalerParams, WindowedDataset

KIND_GBT = "gbt"
KIND_MLP = "mlp"
KIND_EXTERNAL = "external"


@dataclass(frozen=True)
class GbtParams:
    """Gradient-boosted-tree hyperparameters (second-order, exact greedy splits)."""

    n_trees: int = 40
    max_depth: int = 6
    min_samples_leaf: int = 5
    l1_alpha: float = 0.5
    l2_lambda: float = 1.0
    learning_rate: float = 0.1

    def __post_init__(self):
        if self.n_trees < 1:
            raise InvalidArgument(f"n_trees must be >= 1, got {self.n_trees}")
        if self.max_depth < 1:
            raise InvalidArgument(f"max_depth must be >= 1, got {self.max_depth}")
        if self.min_samples_leaf < 1:
            raise InvalidArgument(
                f"min_samples_leaf must be >= 1, got {self.min_samples_leaf}"
            )
        if not 0.0 <= self.learning_rate <= 1.0:
            raise InvalidArgument(
                f"learning_rate must be in [0, 1], got {self.learning_rate}"
            )
        if self.l1_alpha < 0 or self.l2_lambda < 0:
            raise InvalidArgument("regularization strengths must be >= 0")


@dataclass(frozen=True)
class MlpParams:
    """Feed-forward network hyperparameters (rectified-linear, dropout, Adam)."""

    hidden_sizes: tuple[int, ...] = (4096, 2056, 1024)
    dropout: float = 0.10
    batch_size: int = 64
    learning_rate: float = 5e-5
    patience: int = 20
    lr_halving_on_plateau: bool = True
    max_epochs: int = 500

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.hidden_sizes)
        if not sizes or any(s < 1 for s in sizes):
            raise InvalidArgument(f"hidden_sizes must be positive ints, got {sizes}")
        if not 0.0 <= self.dropout < 1.0:
            raise InvalidArgument(f"dropout must be in [0, 1), got {self.dropout}")
        if self.batch_size < 1:
            raise InvalidArgument(f"batch_size must be >= 1, got {self.batch_size}")
        if self.patience < 1:
            raise InvalidArgument(f"patience must be >= 1, got {self.patience}")
        if self.learning_rate <= 0:
            raise InvalidArgument(
                f"learning_rate must be > 0, got {self.learning_rate}"
            )
        if self.max_epochs < 1:
            raise InvalidArgument(f"max_epochs must be >= 1, got {self.max_epochs}")
        object.__setattr__(self, "hidden_sizes", sizes)


@dataclass(frozen=True)
class ExternalParams:
    """Pre-computed predictions loaded from a CSV file.

    The file holds one row per forecast issue time in physical units:
    header ``timestamp,step1,...,step<horizon>``.  Lets externally trained
    models join the evaluation pipeline without a fit implementation.
    """

    path: str = ""

    def __post_init__(self):
        if not self.path:
            raise InvalidArgument("external predictions require a file path")


@dataclass(frozen=True)
class RegressorSpec:
    """Which model to train, with what hyperparameters, and from what seed."""

    kind: str
    params: object = None
    seed: int = 0

    def __post_init__(self):
        if self.kind not in (KIND_GBT, KIND_MLP, KIND_EXTERNAL):
            raise InvalidArgument(f"unknown regressor kind {self.kind!r}")
        params = self.params
        if params is None:
            params = {KIND_GBT: GbtParams, KIND_MLP: MlpParams}.get(self.kind)
            if params is None:
                raise InvalidArgument("external kind requires ExternalParams")
            params = params()
        expected = {
            KIND_GBT: GbtParams,
            KIND_MLP: MlpParams,
            KIND_EXTERNAL: ExternalParams,
        }[self.kind]
        if not isinstance(params, expected):
            raise InvalidArgument(
                f"{self.kind} regressor needs {expected.__name__}, "
                f"got {type(params).__name__}"
            )
        if self.seed < 0:
            raise InvalidArgument(f"seed must be >= 0, got {self.seed}")
        object.__setattr__(self, "params", params)


@dataclass(frozen=True)
class TrainReport:
    """Outcome of one fit: best validation loss, measured wall time, and the
    full per-epoch (or per-round) validation series it was selected from."""

    min_val_loss: float
    wall_seconds: float
    epochs_or_trees: int
    val_history: tuple[float, ...] = ()

    def __post_init__(self):
        if self.min_val_loss < 0:
            raise InvalidData(f"min_val_loss must be >= 0, got {self.min_val_loss}")
        if self.wall_seconds <= 0:
            raise InvalidData(f"wall_seconds must be > 0, got {self.wall_seconds}")
        object.__setattr__(self, "val_history", tuple(self.val_history))


@dataclass(frozen=True)
class TrainedModel:
    """Immutable fitted model plus everything needed to use it downstream:
    the frozen scaler it was trained with, the target column it predicts,
    and its training report (whose ``min_val_loss`` seeds drift baselines)."""

    spec: RegressorSpec
    state: object
    report: TrainReport
    horizon: int
    scaler: Optional[ScalerParams] = None
    target: Optional[str] = None
    trained_at: Optional[np.datetime64] = None

    def predict(self, inputs, timestamps=None) -> np.ndarray:
        """Scaled-space predictions, shape (n, horizon); deterministic.

        ``inputs`` may be a WindowedDataset or a plain (n, width) matrix.
        Timestamp-keyed model kinds (external predictions) need per-row
        issue times, taken from the dataset form or passed explicitly.
        """
        X = _as_flat_inputs(inputs)
        expected = self.state.input_width
        if expected is not None and X.shape[1] != expected:
            raise SchemaMismatch(
                f"input width {X.shape[1]} does not match training width {expected}"
            )
        if timestamps is None and isinstance(inputs, WindowedDataset):
            timestamps = inputs.sample_timestamps
        return self.state.predict(X, timestamps)


def _as_flat_inputs(inputs) -> np.ndarray:
    """Accept a WindowedDataset or a raw matrix; return (n, width) float64."""
    if isinstance(inputs, WindowedDataset):
        X = inputs.inputs
    else:
        X = np.asarray(inputs, dtype=np.float64)
    if X.ndim == 3:
        X = X.reshape(X.shape[0], -1)
    if X.ndim != 2:
        raise InvalidData(f"inputs must be 2-D or 3-D, got shape {X.shape}")
    return np.asarray(X, dtype=np.float64)


def mse(pred, truth) -> float:
    """Mean over all entries of the squared difference."""
    p = np.asarray(pred, dtype=np.float64)
    t = np.asarray(truth, dtype=np.float64)
    if p.shape != t.shape:
        raise SchemaMismatch(f"shape mismatch: {p.shape} vs {t.shape}")
    d = p - t
    return float(np.mean(d * d))


def _validate_fit_inputs(train: WindowedDataset, val: WindowedDataset):
    for name, ds in (("train", train), ("validation", val)):
        if ds.n_samples == 0:
            raise InsufficientData(f"{name} dataset is empty")
        if ds.labels is None:
            raise InsufficientData(f"{name} dataset has no labels")
        if np.isnan(ds.inputs).any() or np.isnan(ds.labels).any():
            raise InvalidData(f"{name} dataset contains NaN values")
    if train.labels.shape[1] != val.labels.shape[1]:
        raise SchemaMismatch("train and validation horizon widths differ")
    if _as_flat_inputs(train).shape[1] != _as_flat_inputs(val).shape[1]:
        raise SchemaMismatch("train and validation feature widths differ")


def fit(
    spec: RegressorSpec,
    train: WindowedDataset,
    val: WindowedDataset,
    scaler: Optional[ScalerParams] = None,
    target: Optional[str] = None,
    trained_at=None,
) -> TrainedModel:
    """Train a model of ``spec.kind`` and wrap it with its report.

    Wall time is measured around the core training loop only (not data
    preparation), which is what the energy ledger bills for a fit.
    """
    _validate_fit_inputs(train, val)
    from . import external, gbt, mlp  # local import to avoid module cycles

    trainer = {
        KIND_GBT: gbt.train_gbt,
        KIND_MLP: mlp.train_mlp,
        KIND_EXTERNAL: external.train_external,
    }[spec.kind]
    started = time.perf_counter()
    state, val_history, rounds = trainer(
        spec.params,
        _as_flat_inputs(train),
        np.asarray(train.labels, dtype=np.float64),
        _as_flat_inputs(val),
        np.asarray(val.labels, dtype=np.float64),
        spec.seed,
        val_timestamps=val.sample_timestamps,
        scaler=scaler,
        target=target,
    )
    wall = max(time.perf_counter() - started, 1e-9)
    report = TrainReport(
        min_val_loss=float(min(val_history)),
        wall_seconds=wall,
        epochs_or_trees=rounds,
        val_history=tuple(float(v) for v in val_history),
    )
    horizon = int(np.asarray(train.labels).shape[1])
    ts = None if trained_at is None else np.datetime64(trained_at, "s")
    return TrainedModel(
        spec=spec,
        state=state,
        report=report,
        horizon=horizon,
        scaler=scaler,
        target=target,
        trained_at=ts,
    )
