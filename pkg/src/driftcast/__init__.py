"""driftcast: cost-aware adaptive forecasting for streaming hourly weather data.

The package trains per-horizon regressors on a rolling window of gridded
weather observations, sizes that window with a variance-ratio saturation
search, decides when to retrain by monitoring validation loss for concept
drift, and scores every run by both accuracy and the energy spent
training -- so that cheaper-but-close models can be ranked honestly
against always-retrain baselines.
"""

__version__ = "0.1.0"

from .errors import (
    DegenerateWindow,
    DriftcastError,
    EmptyFrame,
    InsufficientData,
    InvalidArgument,
    InvalidData,
    InvalidGrid,
    NotAvailable,
    NotFound,
    ParseError,
    SchemaMismatch,
    SourceUnavailable,
)
from .frames import (
    GridSpec,
    ScalerParams,
    TimeFrame,
    WindowedDataset,
    append_hour_encoding,
    build_grid,
    drop_incomplete_rows,
    drop_sparse_features,
    encode_hour,
    frame_from_csv,
    frame_to_csv,
    latest_input_block,
    make_windows,
    minmax_fit,
    minmax_inverse,
    minmax_transform,
    split_train_validation,
    variance_filter,
)
from .horizon import (
    HorizonQuery,
    HorizonResult,
    cross_distances,
    find_variance_horizon,
    variance_ratio,
    within_distances,
)
from .models import (
    GbtParams,
    MlpParams,
    RegressorSpec,
    TrainedModel,
    TrainReport,
    fit,
    load_model,
    save_model,
)
from .drift import DriftConfig, DriftVerdict, build_drift_window, check_drift
from .ingest import (
    FetchBatch,
    SourceSpec,
    fetch_hourly,
    load_replay,
    save_replay,
)
from .config import ExperimentConfig, PolicySpec, load_config
from .schedule import (
    EnergyLedger,
    Engine,
    ExperimentLog,
    energy_of,
    run_experiment,
    strip_volatile,
)
from .evaluate import (
    BootstrapConfig,
    MetricRow,
    bootstrap_mean_std,
    build_metric_rows,
    compare_to_reference,
    cost_normalized,
    render_report,
    rmse_per_horizon,
)

__all__ = [
    "BootstrapConfig",
    "DegenerateWindow",
    "DriftConfig",
    "DriftVerdict",
    "DriftcastError",
    "EmptyFrame",
    "EnergyLedger",
    "Engine",
    "ExperimentConfig",
    "ExperimentLog",
    "FetchBatch",
    "GbtParams",
    "GridSpec",
    "HorizonQuery",
    "HorizonResult",
    "InsufficientData",
    "InvalidArgument",
    "InvalidData",
    "InvalidGrid",
    "MetricRow",
    "MlpParams",
    "NotAvailable",
    "NotFound",
    "ParseError",
    "PolicySpec",
    "RegressorSpec",
    "ScalerParams",
    "SchemaMismatch",
    "SourceSpec",
    "SourceUnavailable",
    "TimeFrame",
    "TrainReport",
    "TrainedModel",
    "WindowedDataset",
    "append_hour_encoding",
    "bootstrap_mean_std",
    "build_grid",
    "build_drift_window",
    "build_metric_rows",
    "check_drift",
    "compare_to_reference",
    "cost_normalized",
    "cross_distances",
    "drop_incomplete_rows",
    "drop_sparse_features",
    "encode_hour",
    "energy_of",
    "fetch_hourly",
    "find_variance_horizon",
    "fit",
    "frame_from_csv",
    "frame_to_csv",
    "latest_input_block",
    "load_config",
    "load_model",
    "load_replay",
    "make_windows",
    "minmax_fit",
    "minmax_inverse",
    "minmax_transform",
    "render_report",
    "rmse_per_horizon",
    "run_experiment",
    "save_model",
    "save_replay",
    "split_train_validation",
    "strip_volatile",
    "variance_filter",
    "variance_ratio",
    "within_distances",
]
