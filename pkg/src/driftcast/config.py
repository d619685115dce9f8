"""Experiment configuration: typed dataclasses and the TOML loader.

A config file enumerates the experiment axes — cities × targets ×
models × policies — plus training, window-search, drift, clock, and
energy settings.  Schema (defaults shown where they exist)::

    name = "demo"            # run label
    seed = 42                # master seed; combo/fit seeds derive from it

    [energy]
    watts = 200.0            # power rating used to convert wall time to Wh

    [clock]
    mode = "replay"          # or "live"
    warmup_hours = 360       # history rows consumed before the first tick
    max_ticks = 0            # 0 = tick until the replay ends
    poll_seconds = 3600      # live mode: wait between polls

    [cities]                 # shared ingest settings...
    variables = ["temperature_2m", ...]
    points_per_side = 1      # square grid side; 7 gives the 7x7 grid
    span_km = 300.0
    api_base = "https://api.open-meteo.com/v1/gfs"
    history_days = 150
      [cities.<name>]        # ...then one subtable per city
      latitude = 52.52
      longitude = 13.405
      replay = "data/x.csv"  # replay mode: path relative to this file

    [targets]
    names = ["temperature_2m"]   # forecast the variable at the grid center
      [targets.reference]        # optional: live-mode API series to ingest
      temperature_2m = "temperature_2m"   # as the ref_<target> column

    [models]                 # one subtable per model; "kind" picks the
      [models.<name>]        # regressor, the rest are its hyperparameters
      kind = "gbt"           # gbt | mlp | external
      n_trees = 40

    [policies]               # shared knobs...
    lookback = 24
    horizon = 6
    validation_days = 10
    full_window_hours = 3600
    vh_max_window = 3600
    vh_alpha = 24
    vh_threshold = 0.00025
    vh_step = 1
    drift_window_hours = 240
    drift_loss_increase = 0.05
    drift_check_period = 1
      [policies.<name>]      # ...and one subtable per policy
      retrain = "hourly"     # hourly | drift_triggered
      window = "full_static" # full_static | variance_horizon

Loader errors raise :class:`~driftcast.errors.InvalidArgument` with the
offending key, which the CLI maps to exit code 2.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .drift import DriftConfig
from .errors import InvalidArgument
from .horizon import DEFAULT_ALPHA, DEFAULT_PLATEAU_THRESHOLD
from .models.base import (
    KIND_EXTERNAL,
    KIND_GBT,
    KIND_MLP,
    ExternalParams,
    GbtParams,
    MlpParams,
    RegressorSpec,
)

RETRAIN_HOURLY = "hourly"
RETRAIN_DRIFT = "drift_triggered"
WINDOW_FULL_STATIC = "full_static"
WINDOW_VARIANCE_HORIZON = "variance_horizon"

DEFAULT_WATTS = 200.0


@dataclass(frozen=True)
class PolicySpec:
    """One cell of the 2x2 design: when to retrain × how to size the window."""

    name: str
    retrain: str
    window: str

    def __post_init__(self):
        if self.retrain not in (RETRAIN_HOURLY, RETRAIN_DRIFT):
            raise InvalidArgument(
                f"policy {self.name!r}: retrain must be "
                f"{RETRAIN_HOURLY!r} or {RETRAIN_DRIFT!r}, got {self.retrain!r}"
            )
        if self.window not in (WINDOW_FULL_STATIC, WINDOW_VARIANCE_HORIZON):
            raise InvalidArgument(
                f"policy {self.name!r}: window must be "
                f"{WINDOW_FULL_STATIC!r} or {WINDOW_VARIANCE_HORIZON!r}, "
                f"got {self.window!r}"
            )


@dataclass(frozen=True)
class CityConfig:
    name: str
    latitude: float
    longitude: float
    replay_path: str = ""


@dataclass(frozen=True)
class IngestConfig:
    """Shared data-source settings applied to every city."""

    variables: tuple[str, ...] = ()
    points_per_side: int = 1
    span_km: float = 300.0
    api_base: str = ""
    history_days: int = 150
    reference: dict = field(default_factory=dict)


@dataclass(frozen=True)
class TrainingConfig:
    lookback: int = 24
    horizon: int = 6
    validation_days: int = 10
    full_window_hours: int = 3600

    def __post_init__(self):
        if self.lookback < 1 or self.horizon < 1:
            raise InvalidArgument("lookback and horizon must be >= 1")
        if self.validation_days < 1:
            raise InvalidArgument("validation_days must be >= 1")
        if self.full_window_hours <= self.validation_days * 24:
            raise InvalidArgument(
                "full_window_hours must exceed the validation span"
            )

    @property
    def validation_rows(self) -> int:
        return self.validation_days * 24

    @property
    def min_window_hours(self) -> int:
        """Smallest training window that still yields one training sample
        after the validation holdout."""
        return self.validation_rows + self.lookback + self.horizon


@dataclass(frozen=True)
class HorizonSearchConfig:
    max_window: int = 3600
    alpha: int = DEFAULT_ALPHA
    threshold: float = DEFAULT_PLATEAU_THRESHOLD
    step: int = 1


@dataclass(frozen=True)
class ClockConfig:
    mode: str = "replay"
    warmup_hours: int = 360
    max_ticks: int = 0
    poll_seconds: float = 3600.0

    def __post_init__(self):
        if self.mode not in ("replay", "live"):
            raise InvalidArgument(f"clock mode must be replay or live, got {self.mode!r}")
        if self.warmup_hours < 1:
            raise InvalidArgument("warmup_hours must be >= 1")
        if self.max_ticks < 0:
            raise InvalidArgument("max_ticks must be >= 0 (0 = unbounded)")


@dataclass(frozen=True)
class ExperimentConfig:
    name: str
    seed: int
    watts: float
    cities: tuple[CityConfig, ...]
    ingest: IngestConfig
    targets: tuple[str, ...]
    models: tuple[tuple[str, RegressorSpec], ...]
    policies: tuple[PolicySpec, ...]
    training: TrainingConfig
    horizon_search: HorizonSearchConfig
    drift: DriftConfig
    clock: ClockConfig

    def __post_init__(self):
        if not self.cities:
            raise InvalidArgument("at least one city is required")
        if not self.targets:
            raise InvalidArgument("at least one target is required")
        if not self.models:
            raise InvalidArgument("at least one model is required")
        if not self.policies:
            raise InvalidArgument("at least one policy is required")
        if self.watts < 0:
            raise InvalidArgument("watts must be >= 0")
        if self.clock.mode == "replay":
            for city in self.cities:
                if not city.replay_path:
                    raise InvalidArgument(
                        f"city {city.name!r} needs a replay path in replay mode"
                    )

    @property
    def n_combinations(self) -> int:
        return (
            len(self.cities) * len(self.targets) * len(self.models) * len(self.policies)
        )


_MODEL_PARAM_CLASSES = {KIND_GBT: GbtParams, KIND_MLP: MlpParams, KIND_EXTERNAL: ExternalParams}


def _build_params(kind: str, table: dict, context: str):
    cls = _MODEL_PARAM_CLASSES.get(kind)
    if cls is None:
        raise InvalidArgument(f"{context}: unknown model kind {kind!r}")
    fields = {f for f in cls.__dataclass_fields__}
    unknown = set(table) - fields
    if unknown:
        raise InvalidArgument(f"{context}: unknown keys {sorted(unknown)}")
    if "hidden_sizes" in table:
        table = dict(table, hidden_sizes=tuple(table["hidden_sizes"]))
    try:
        return cls(**table)
    except (TypeError, InvalidArgument) as exc:
        raise InvalidArgument(f"{context}: {exc}") from None


def _require(table: dict, key: str, context: str):
    if key not in table:
        raise InvalidArgument(f"{context}: missing required key {key!r}")
    return table[key]


def load_config(path) -> ExperimentConfig:
    """Parse and validate a TOML experiment file.

    Relative replay and prediction-file paths are resolved against the
    config file's own directory, so bundled configs work from anywhere.
    """
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except FileNotFoundError:
        raise InvalidArgument(f"config file not found: {path}") from None
    except tomllib.TOMLDecodeError as exc:
        raise InvalidArgument(f"{path}: TOML parse error: {exc}") from None
    base_dir = path.parent

    def resolve(p: str) -> str:
        candidate = Path(p)
        return str(candidate if candidate.is_absolute() else base_dir / candidate)

    try:
        return _config_from_tables(raw, resolve)
    except (KeyError, TypeError, ValueError) as exc:
        raise InvalidArgument(f"{path}: {exc}") from None


def _config_from_tables(raw: dict, resolve) -> ExperimentConfig:
    clock_tbl = raw.get("clock", {})
    clock = ClockConfig(
        mode=clock_tbl.get("mode", "replay"),
        warmup_hours=int(clock_tbl.get("warmup_hours", 360)),
        max_ticks=int(clock_tbl.get("max_ticks", 0)),
        poll_seconds=float(clock_tbl.get("poll_seconds", 3600.0)),
    )

    cities_tbl = dict(raw.get("cities", {}))
    city_subtables = {k: v for k, v in cities_tbl.items() if isinstance(v, dict)}
    shared = {k: v for k, v in cities_tbl.items() if not isinstance(v, dict)}
    if not city_subtables:
        raise InvalidArgument("[cities]: at least one city subtable is required")
    targets_tbl = raw.get("targets", {})
    reference = dict(targets_tbl.get("reference", {}))
    ingest = IngestConfig(
        variables=tuple(shared.get("variables", ())),
        points_per_side=int(shared.get("points_per_side", 1)),
        span_km=float(shared.get("span_km", 300.0)),
        api_base=str(shared.get("api_base", "")),
        history_days=int(shared.get("history_days", 150)),
        reference=reference,
    )
    cities = []
    for name in sorted(city_subtables):
        tbl = city_subtables[name]
        replay = tbl.get("replay", "")
        cities.append(
            CityConfig(
                name=name,
                latitude=float(_require(tbl, "latitude", f"[cities.{name}]")),
                longitude=float(_require(tbl, "longitude", f"[cities.{name}]")),
                replay_path=resolve(replay) if replay else "",
            )
        )

    target_names = tuple(targets_tbl.get("names", ()))
    if not target_names:
        raise InvalidArgument("[targets]: names must list at least one variable")

    models_tbl = raw.get("models", {})
    models = []
    for name in sorted(models_tbl):
        tbl = dict(models_tbl[name])
        kind = _require(tbl, "kind", f"[models.{name}]")
        tbl.pop("kind")
        if kind == KIND_EXTERNAL and "path" in tbl:
            tbl["path"] = resolve(tbl["path"])
        params = _build_params(kind, tbl, f"[models.{name}]")
        models.append((name, RegressorSpec(kind=kind, params=params)))

    policies_tbl = dict(raw.get("policies", {}))
    policy_subtables = {
        k: v for k, v in policies_tbl.items() if isinstance(v, dict)
    }
    shared_pol = {k: v for k, v in policies_tbl.items() if not isinstance(v, dict)}
    if not policy_subtables:
        raise InvalidArgument("[policies]: at least one policy subtable is required")
    policies = tuple(
        PolicySpec(
            name=name,
            retrain=_require(policy_subtables[name], "retrain", f"[policies.{name}]"),
            window=_require(policy_subtables[name], "window", f"[policies.{name}]"),
        )
        for name in sorted(policy_subtables)
    )

    training = TrainingConfig(
        lookback=int(shared_pol.get("lookback", 24)),
        horizon=int(shared_pol.get("horizon", 6)),
        validation_days=int(shared_pol.get("validation_days", 10)),
        full_window_hours=int(shared_pol.get("full_window_hours", 3600)),
    )
    horizon_search = HorizonSearchConfig(
        max_window=int(shared_pol.get("vh_max_window", 3600)),
        alpha=int(shared_pol.get("vh_alpha", DEFAULT_ALPHA)),
        threshold=float(shared_pol.get("vh_threshold", DEFAULT_PLATEAU_THRESHOLD)),
        step=int(shared_pol.get("vh_step", 1)),
    )
    drift = DriftConfig(
        window_hours=int(shared_pol.get("drift_window_hours", 240)),
        loss_increase_threshold=float(shared_pol.get("drift_loss_increase", 0.05)),
        check_period_hours=int(shared_pol.get("drift_check_period", 1)),
    )

    energy_tbl = raw.get("energy", {})
    return ExperimentConfig(
        name=str(raw.get("name", "experiment")),
        seed=int(raw.get("seed", 0)),
        watts=float(energy_tbl.get("watts", DEFAULT_WATTS)),
        cities=tuple(cities),
        ingest=ingest,
        targets=target_names,
        models=tuple(models),
        policies=policies,
        training=training,
        horizon_search=horizon_search,
        drift=drift,
        clock=clock,
    )
