"""The hourly experiment loop: policies, energy accounting, and the event log.

Drives every (city, target, model, policy) combination over a shared
clock.  Each tick, in order: newly arrived ground truth resolves
outstanding forecasts; the policy decides whether to retrain (always,
for hourly policies; on a concept-drift verdict otherwise) and picks its
training window (full recent history, or the adaptive variance-horizon
search); a fresh or surviving model issues a 6-step forecast; and any
drift verdict is recorded.  Wall time of each fit, prediction, and drift
check is converted to watt-hours (``wall_seconds * watts / 3600``) in a
per-combination energy ledger.

Everything observable lands in the :class:`ExperimentLog` — newline-
delimited JSON, one object per event with a ``kind`` discriminator —
which is written through to disk as it grows and is sufficient on its
own to recompute every evaluation metric.  With a replay clock and a
fixed master seed the log is byte-identical across runs except for
measured wall-time/energy fields (:func:`strip_volatile` removes those
for comparisons).

Record kinds and their main fields (all share ``kind``, ``seq``,
``time``; per-combination kinds add ``city``/``target``/``model``/
``policy``):

=============  ==============================================================
run_start      config echo: seed, watts, axes, warmup, planned_ticks
train          trigger, window_kind, window_rows, train_rows, val_rows,
               train_samples, val_samples, selected_window, stopped_by,
               min_val_loss, epochs_or_trees, wall_seconds, generation
energy         event (train|infer|drift_check), wall_seconds, watts, wh
forecast       scaled[horizon], physical[horizon] issued at ``time``
resolution     issued_at, step, predicted, truth, ref (physical units)
drift          baseline_loss, current_loss, relative_increase, drifted
fit_error      error (the combination keeps its previous model)
gap            reason (skipped forecast / missing data)
run_end        n_ticks, train_counts, wh_total_by_event
=============  ==============================================================

Execution is a single deterministic sequence: combinations are visited
in enumeration order against one frame snapshot per tick, which is a
valid serialization of independent per-combination workers and keeps
replay runs reproducible.
"""

from __future__ import annotations

import hashlib
import json
import time as _time
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .config import (
    RETRAIN_DRIFT,
    RETRAIN_HOURLY,
    WINDOW_FULL_STATIC,
    WINDOW_VARIANCE_HORIZON,
    CityConfig,
    ExperimentConfig,
    PolicySpec,
)
from .drift import build_drift_window, check_drift
from .errors import DriftcastError, InsufficientData, InvalidArgument, SchemaMismatch
from .frames import (
    GridSpec,
    TimeFrame,
    append_hour_encoding,
    drop_incomplete_rows,
    drop_sparse_features,
    format_timestamp,
    latest_input_block,
    make_windows,
    minmax_fit,
    minmax_transform,
    split_train_validation,
    variance_filter,
)
from .horizon import HorizonQuery, find_variance_horizon
from .ingest import (
    REF_PREFIX,
    SourceSpec,
    fetch_hourly,
    grid_center_column,
    load_replay,
    reference_column,
)
from .models.base import RegressorSpec, TrainedModel
from .models.base import fit as fit_model

TRIGGER_WARMUP = "warmup"
TRIGGER_HOURLY = "hourly"
TRIGGER_DRIFT = "drift"

EVENT_TRAIN = "train"
EVENT_INFER = "infer"
EVENT_DRIFT_CHECK = "drift_check"

KIND_RUN_START = "run_start"
KIND_TRAIN = "train"
KIND_ENERGY = "energy"
KIND_FORECAST = "forecast"
KIND_RESOLUTION = "resolution"
KIND_DRIFT = "drift"
KIND_FIT_ERROR = "fit_error"
KIND_GAP = "gap"
KIND_RUN_END = "run_end"

#: Fields whose values depend on measured wall time, excluded when
#: comparing logs for determinism.
VOLATILE_FIELDS = ("wall_seconds", "wh", "wh_total_by_event")


def energy_of(wall_seconds: float, watts: float) -> float:
    """Convert wall time at a power rating to watt-hours."""
    if wall_seconds < 0 or watts < 0:
        raise InvalidArgument(
            f"wall_seconds and watts must be >= 0, got {wall_seconds}, {watts}"
        )
    return wall_seconds * watts / 3600.0


@dataclass(frozen=True)
class EnergyEntry:
    event: str
    wall_seconds: float
    watts: float
    wh: float


class EnergyLedger:
    """Append-only energy accounting; totals are exact sums of entries."""

    def __init__(self):
        self.entries: list[EnergyEntry] = []

    def add(self, event: str, wall_seconds: float, watts: float) -> EnergyEntry:
        entry = EnergyEntry(
            event=event,
            wall_seconds=wall_seconds,
            watts=watts,
            wh=energy_of(wall_seconds, watts),
        )
        self.entries.append(entry)
        return entry

    def total_wh(self, event: Optional[str] = None) -> float:
        total = 0.0
        for e in self.entries:
            if event is None or e.event == event:
                total += e.wh
        return total

    def totals_by_event(self) -> dict[str, float]:
        out: dict[str, float] = {}
        for e in self.entries:
            out[e.event] = out.get(e.event, 0.0) + e.wh
        return out


def _jsonable(value):
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_jsonable(v) for v in value.tolist()]
    if isinstance(value, np.datetime64):
        return format_timestamp(value)
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, (np.integer, int)):
        return int(value)
    if isinstance(value, (np.floating, float)):
        return float(value)
    return value


class ExperimentLog:
    """Append-only event log, optionally written through to an ndjson file."""

    def __init__(self, path=None):
        self.records: list[dict] = []
        self._fh = open(path, "w") if path is not None else None

    def append(self, record: dict):
        record = _jsonable(record)
        self.records.append(record)
        if self._fh is not None:
            self._fh.write(json.dumps(record, sort_keys=True) + "\n")
            self._fh.flush()

    def close(self):
        if self._fh is not None:
            self._fh.close()
            self._fh = None

    def __enter__(self):
        return self

    def __exit__(self, *exc_info):
        self.close()

    def filter(self, kind: Optional[str] = None, **fields) -> list[dict]:
        out = []
        for r in self.records:
            if kind is not None and r.get("kind") != kind:
                continue
            if all(r.get(k) == v for k, v in fields.items()):
                out.append(r)
        return out

    @classmethod
    def read(cls, path) -> "ExperimentLog":
        log = cls()
        with open(path) as fh:
            for line in fh:
                line = line.strip()
                if line:
                    log.records.append(json.loads(line))
        return log


def strip_volatile(record: dict) -> dict:
    """Copy of a record without measured-time-dependent fields."""
    return {k: v for k, v in record.items() if k not in VOLATILE_FIELDS}


def canonical_lines(records) -> list[str]:
    """Deterministic rendering of records for cross-run comparison."""
    return [json.dumps(strip_volatile(r), sort_keys=True) for r in records]


def derive_seed(*parts) -> int:
    """Stable 64-bit seed from arbitrary labeled parts (order-sensitive)."""
    digest = hashlib.sha256(":".join(str(p) for p in parts).encode()).digest()
    return int.from_bytes(digest[:8], "little")


def prepare_feature_frame(visible: TimeFrame) -> TimeFrame:
    """Model-ready feature frame from a raw observation stream.

    Reference-forecast columns are excluded from the inputs, then the
    standard chain runs: drop sparse columns, keep the complete
    contiguous suffix, drop static columns, and append the cyclic
    hour-of-day encoding.
    """
    feature_cols = [c for c in visible.columns if not c.startswith(REF_PREFIX)]
    frame = visible.select_columns(feature_cols)
    frame = drop_sparse_features(frame)
    frame = drop_incomplete_rows(frame)
    frame = variance_filter(frame)
    return append_hour_encoding(frame)


def variance_horizon_search(prepared: TimeFrame, training, search):
    """Run the adaptive window search on a prepared feature frame.

    The candidate region is the most recent ``max_window`` rows plus one
    horizon block; it is min-max scaled with a provisional scaler fitted
    over that region only (the definitive scaler is refit on the chosen
    training split afterwards).  Returns the full HorizonResult so
    callers can log or plot the ratio curve.
    """
    region = prepared.tail(min(prepared.n_rows, search.max_window + training.horizon))
    provisional = minmax_fit(region)
    scaled = minmax_transform(region, provisional)
    query = HorizonQuery.from_frame(
        scaled,
        horizon_len=training.horizon,
        max_window=search.max_window,
        alpha=search.alpha,
        threshold=search.threshold,
        step=search.step,
    )
    return find_variance_horizon(query)


@dataclass(frozen=True)
class PendingForecast:
    issued_at: np.datetime64
    physical: np.ndarray
    scaled: np.ndarray


@dataclass
class ComboState:
    """Mutable per-combination state across ticks."""

    city: CityConfig
    target_var: str
    target_col: str
    ref_col: str
    model_name: str
    spec: RegressorSpec
    policy: PolicySpec
    combo_seed: int
    model: Optional[TrainedModel] = None
    pending: list[PendingForecast] = field(default_factory=list)
    fit_index: int = 0
    generation: int = 0
    ledger: EnergyLedger = field(default_factory=EnergyLedger)
    last_selected_window: Optional[int] = None

    @property
    def combo_key(self) -> str:
        return "|".join(
            (self.city.name, self.target_var, self.model_name, self.policy.name)
        )

    def id_fields(self) -> dict:
        return {
            "city": self.city.name,
            "target": self.target_var,
            "model": self.model_name,
            "policy": self.policy.name,
        }


class Engine:
    """Executes one experiment over a replay or live clock."""

    def __init__(self, config: ExperimentConfig, log: ExperimentLog):
        self.config = config
        self.log = log
        self.seq = 0
        self.wh_by_event: dict[str, float] = {}
        self.train_counts: dict[str, int] = {}
        self.n_ticks = 0
        self.combos = self._enumerate_combos()

    # ------------------------------------------------------------------ setup

    def _enumerate_combos(self) -> list[ComboState]:
        cfg = self.config
        side = cfg.ingest.points_per_side
        combos = []
        for city in cfg.cities:
            for target in cfg.targets:
                for model_name, spec in cfg.models:
                    for policy in cfg.policies:
                        combos.append(
                            ComboState(
                                city=city,
                                target_var=target,
                                target_col=grid_center_column(target, side),
                                ref_col=reference_column(target),
                                model_name=model_name,
                                spec=spec,
                                policy=policy,
                                combo_seed=derive_seed(
                                    cfg.seed, city.name, target, model_name, policy.name
                                ),
                            )
                        )
        return combos

    def _emit(self, kind: str, when, extra: dict, state: Optional[ComboState] = None):
        record = {"kind": kind, "seq": self.seq, "time": format_timestamp(when)}
        if state is not None:
            record.update(state.id_fields())
        record.update(extra)
        self.log.append(record)
        self.seq += 1

    def _tally(self, entry: EnergyEntry):
        self.wh_by_event[entry.event] = (
            self.wh_by_event.get(entry.event, 0.0) + entry.wh
        )

    # ---------------------------------------------------------------- running

    def run(self) -> ExperimentLog:
        if self.config.clock.mode == "replay":
            self._run_replay()
        else:
            self._run_live()
        return self.log

    def _run_replay(self):
        cfg = self.config
        streams = {
            city.name: load_replay(city.replay_path).merged for city in cfg.cities
        }
        n_rows = min(s.n_rows for s in streams.values())
        warmup = cfg.clock.warmup_hours
        if warmup >= n_rows:
            raise InsufficientData(
                f"replay has {n_rows} rows; warmup of {warmup} leaves no ticks"
            )
        last = n_rows if cfg.clock.max_ticks == 0 else min(
            n_rows, warmup + cfg.clock.max_ticks
        )
        first_city = cfg.cities[0].name
        self._emit_run_start(
            streams[first_city].timestamps[warmup], planned_ticks=last - warmup
        )
        for i in range(warmup, last):
            visible = {name: s.head(i + 1) for name, s in streams.items()}
            self._tick(visible)
        self._emit_run_end(streams[first_city].timestamps[last - 1])

    def _run_live(self):
        cfg = self.config
        streams = {}
        for city in cfg.cities:
            batch = fetch_hourly(
                self._live_source(city), self._history_range(np.datetime64("now", "s"))
            )
            streams[city.name] = batch.merged
        first_city = cfg.cities[0].name
        self._emit_run_start(
            streams[first_city].timestamps[-1],
            planned_ticks=cfg.clock.max_ticks or None,
        )
        ticks_done = 0
        last_time = streams[first_city].timestamps[-1]
        self._tick(dict(streams))  # initial tick on the freshly loaded history
        ticks_done += 1
        while cfg.clock.max_ticks == 0 or ticks_done < cfg.clock.max_ticks:
            _time.sleep(cfg.clock.poll_seconds)
            advanced = False
            for city in cfg.cities:
                try:
                    recent = fetch_hourly(
                        self._live_source(city),
                        self._recent_range(np.datetime64("now", "s")),
                    ).merged
                except DriftcastError as exc:
                    self._emit(
                        KIND_GAP,
                        streams[city.name].timestamps[-1],
                        {"reason": f"fetch failed for {city.name}: {exc}"},
                    )
                    continue
                grown = self._extend_stream(streams[city.name], recent, city.name)
                if grown.n_rows > streams[city.name].n_rows:
                    streams[city.name] = grown
                    advanced = True
            if not advanced:
                continue
            self._tick(dict(streams))
            ticks_done += 1
            last_time = streams[first_city].timestamps[-1]
        self._emit_run_end(last_time)

    def _live_source(self, city: CityConfig) -> SourceSpec:
        ing = self.config.ingest
        return SourceSpec(
            mode="live",
            variables=ing.variables,
            grid=GridSpec(
                center=(city.latitude, city.longitude),
                span_km=ing.span_km,
                points_per_side=ing.points_per_side,
            ),
            api_base=ing.api_base,
            history_days=ing.history_days,
            reference=ing.reference,
        )

    def _history_range(self, now: np.datetime64) -> tuple[str, str]:
        end = np.datetime64(now, "D")
        start = end - np.timedelta64(self.config.ingest.history_days, "D")
        return str(start), str(end)

    def _recent_range(self, now: np.datetime64) -> tuple[str, str]:
        end = np.datetime64(now, "D")
        return str(end - np.timedelta64(2, "D")), str(end)

    def _extend_stream(
        self, stream: TimeFrame, recent: TimeFrame, city_name: str
    ) -> TimeFrame:
        newer = recent.timestamps > stream.timestamps[-1]
        if not newer.any():
            return stream
        idx = np.flatnonzero(newer)
        expected = stream.timestamps[-1] + np.timedelta64(1, "h")
        if recent.timestamps[idx[0]] != expected:
            self._emit(
                KIND_GAP,
                stream.timestamps[-1],
                {
                    "reason": f"{city_name}: next data at "
                    f"{format_timestamp(recent.timestamps[idx[0]])}, expected "
                    f"{format_timestamp(expected)}"
                },
            )
            return stream
        if tuple(recent.columns) != tuple(stream.columns):
            self._emit(
                KIND_GAP,
                stream.timestamps[-1],
                {"reason": f"{city_name}: column set changed between fetches"},
            )
            return stream
        return TimeFrame(
            np.concatenate([stream.timestamps, recent.timestamps[idx]]),
            stream.columns,
            np.concatenate([stream.values, recent.values[idx]]),
        )

    def _emit_run_start(self, when, planned_ticks):
        cfg = self.config
        from . import __version__

        self._emit(
            KIND_RUN_START,
            when,
            {
                "name": cfg.name,
                "seed": cfg.seed,
                "watts": cfg.watts,
                "clock_mode": cfg.clock.mode,
                "warmup_hours": cfg.clock.warmup_hours,
                "planned_ticks": planned_ticks,
                "lookback": cfg.training.lookback,
                "horizon": cfg.training.horizon,
                "n_combinations": cfg.n_combinations,
                "cities": [c.name for c in cfg.cities],
                "targets": list(cfg.targets),
                "models": [name for name, _ in cfg.models],
                "policies": [p.name for p in cfg.policies],
                "version": __version__,
            },
        )

    def _emit_run_end(self, when):
        self._emit(
            KIND_RUN_END,
            when,
            {
                "n_ticks": self.n_ticks,
                "train_counts": dict(sorted(self.train_counts.items())),
                "wh_total_by_event": dict(sorted(self.wh_by_event.items())),
            },
        )

    # ------------------------------------------------------------------ ticks

    def _tick(self, visible_by_city: dict[str, TimeFrame]):
        self.n_ticks += 1
        tick_index = self.n_ticks - 1
        prepared_by_city: dict[str, Optional[TimeFrame]] = {}
        for name, visible in visible_by_city.items():
            try:
                prepared_by_city[name] = prepare_feature_frame(visible)
            except DriftcastError as exc:
                prepared_by_city[name] = None
                self._emit(
                    KIND_GAP,
                    visible.timestamps[-1],
                    {"reason": f"{name}: preprocessing failed: {exc}"},
                )
        for state in self.combos:
            visible = visible_by_city[state.city.name]
            prepared = prepared_by_city[state.city.name]
            if prepared is None:
                continue
            self._tick_combo(state, prepared, visible, tick_index)

    def _tick_combo(
        self,
        state: ComboState,
        prepared: TimeFrame,
        raw_visible: TimeFrame,
        tick_index: int,
    ):
        now = raw_visible.timestamps[-1]
        self._resolve(state, raw_visible, now)

        verdict = None
        drift_wall = None
        trigger = None
        if state.model is None:
            trigger = TRIGGER_WARMUP
        elif state.policy.retrain == RETRAIN_HOURLY:
            trigger = TRIGGER_HOURLY
        elif tick_index % self.config.drift.check_period_hours == 0:
            verdict, drift_wall = self._check_drift(state, prepared, now)
            if verdict is not None and verdict.drifted:
                trigger = TRIGGER_DRIFT

        if trigger is not None:
            self._fit(state, prepared, now, trigger)
        self._forecast(state, prepared, now)

        if verdict is not None:
            self._emit(
                KIND_DRIFT,
                now,
                {
                    "baseline_loss": verdict.baseline_loss,
                    "current_loss": verdict.current_loss,
                    "relative_increase": verdict.relative_increase,
                    "drifted": verdict.drifted,
                },
                state,
            )
            entry = state.ledger.add(EVENT_DRIFT_CHECK, drift_wall, self.config.watts)
            self._tally(entry)
            self._emit(
                KIND_ENERGY,
                now,
                {
                    "event": entry.event,
                    "wall_seconds": entry.wall_seconds,
                    "watts": entry.watts,
                    "wh": entry.wh,
                },
                state,
            )

    def _resolve(self, state: ComboState, raw_visible: TimeFrame, now):
        horizon = self.config.training.horizon
        try:
            truth = float(raw_visible.column(state.target_col)[-1])
        except SchemaMismatch:
            truth = float("nan")
        ref_value = None
        if state.ref_col in raw_visible.columns:
            rv = float(raw_visible.column(state.ref_col)[-1])
            ref_value = None if np.isnan(rv) else rv
        if not np.isnan(truth):
            for f in state.pending:
                step = int((now - f.issued_at) / np.timedelta64(1, "h"))
                if 1 <= step <= horizon:
                    self._emit(
                        KIND_RESOLUTION,
                        now,
                        {
                            "issued_at": format_timestamp(f.issued_at),
                            "step": step,
                            "predicted": float(f.physical[step - 1]),
                            "truth": truth,
                            "ref": ref_value,
                        },
                        state,
                    )
        state.pending = [
            f
            for f in state.pending
            if int((now - f.issued_at) / np.timedelta64(1, "h")) < horizon
        ]

    def _check_drift(self, state: ComboState, prepared: TimeFrame, now):
        cfg = self.config
        try:
            started = _time.perf_counter()
            window = build_drift_window(
                prepared,
                cfg.drift,
                state.model.scaler,
                state.target_col,
                lookback=cfg.training.lookback,
                horizon=cfg.training.horizon,
            )
            verdict = check_drift(state.model, window, cfg.drift, checked_at=now)
            wall = max(_time.perf_counter() - started, 1e-9)
            return verdict, wall
        except (InsufficientData, SchemaMismatch):
            return None, None

    def _choose_window(self, state: ComboState, prepared: TimeFrame):
        """Training-window length in rows, plus search metadata for the log."""
        cfg = self.config
        if state.policy.window == WINDOW_FULL_STATIC:
            return (
                min(prepared.n_rows, cfg.training.full_window_hours),
                None,
                None,
            )
        result = variance_horizon_search(prepared, cfg.training, cfg.horizon_search)
        window = max(result.selected_window, cfg.training.min_window_hours)
        window = min(window, prepared.n_rows)
        return window, result.selected_window, result.stopped_by

    def _fit(self, state: ComboState, prepared: TimeFrame, now, trigger: str):
        cfg = self.config
        try:
            if state.target_col not in prepared.columns:
                raise InsufficientData(
                    f"target column {state.target_col!r} absent after preprocessing"
                )
            window_rows, selected, stopped_by = self._choose_window(state, prepared)
            window_frame = prepared.tail(window_rows)
            train_frame, val_frame = split_train_validation(
                window_frame, cfg.training.validation_days
            )
            scaler = minmax_fit(train_frame)
            train_ds = make_windows(
                minmax_transform(train_frame, scaler),
                state.target_col,
                lookback=cfg.training.lookback,
                horizon=cfg.training.horizon,
                layout="flat",
            )
            val_ds = make_windows(
                minmax_transform(val_frame, scaler),
                state.target_col,
                lookback=cfg.training.lookback,
                horizon=cfg.training.horizon,
                layout="flat",
            )
            seeded_spec = replace(
                state.spec, seed=derive_seed(state.combo_seed, state.fit_index)
            )
            model = fit_model(
                seeded_spec,
                train_ds,
                val_ds,
                scaler=scaler,
                target=state.target_col,
                trained_at=now,
            )
        except DriftcastError as exc:
            self._emit(
                KIND_FIT_ERROR,
                now,
                {"error": f"{type(exc).__name__}: {exc}"},
                state,
            )
            return

        state.model = model
        state.fit_index += 1
        state.generation += 1
        state.last_selected_window = selected
        self.train_counts[state.combo_key] = (
            self.train_counts.get(state.combo_key, 0) + 1
        )
        self._emit(
            KIND_TRAIN,
            now,
            {
                "trigger": trigger,
                "window_kind": state.policy.window,
                "window_rows": window_frame.n_rows,
                "train_rows": train_frame.n_rows,
                "val_rows": val_frame.n_rows,
                "train_samples": train_ds.n_samples,
                "val_samples": val_ds.n_samples,
                "selected_window": selected,
                "stopped_by": stopped_by,
                "min_val_loss": model.report.min_val_loss,
                "epochs_or_trees": model.report.epochs_or_trees,
                "wall_seconds": model.report.wall_seconds,
                "generation": state.generation,
            },
            state,
        )
        entry = state.ledger.add(
            EVENT_TRAIN, model.report.wall_seconds, self.config.watts
        )
        self._tally(entry)
        self._emit(
            KIND_ENERGY,
            now,
            {
                "event": entry.event,
                "wall_seconds": entry.wall_seconds,
                "watts": entry.watts,
                "wh": entry.wh,
            },
            state,
        )

    def _forecast(self, state: ComboState, prepared: TimeFrame, now):
        if state.model is None:
            return
        cfg = self.config
        model = state.model
        try:
            block_frame = prepared.select_columns(model.scaler.columns).tail(
                cfg.training.lookback
            )
            scaled_frame = minmax_transform(block_frame, model.scaler)
            block = latest_input_block(
                scaled_frame, cfg.training.lookback, layout="flat"
            )
            started = _time.perf_counter()
            scaled_pred = model.predict(block)[0]
            wall = max(_time.perf_counter() - started, 1e-9)
            physical = model.scaler.inverse_column(state.target_col, scaled_pred)
        except DriftcastError as exc:
            self._emit(
                KIND_GAP,
                now,
                {"reason": f"forecast skipped: {type(exc).__name__}: {exc}"},
                state,
            )
            return
        state.pending.append(
            PendingForecast(
                issued_at=np.datetime64(now, "s"),
                physical=np.asarray(physical, dtype=np.float64),
                scaled=np.asarray(scaled_pred, dtype=np.float64),
            )
        )
        self._emit(
            KIND_FORECAST,
            now,
            {
                "scaled": [float(v) for v in scaled_pred],
                "physical": [float(v) for v in physical],
            },
            state,
        )
        entry = state.ledger.add(EVENT_INFER, wall, cfg.watts)
        self._tally(entry)
        self._emit(
            KIND_ENERGY,
            now,
            {
                "event": entry.event,
                "wall_seconds": entry.wall_seconds,
                "watts": entry.watts,
                "wh": entry.wh,
            },
            state,
        )


def run_experiment(config: ExperimentConfig, log_path=None) -> ExperimentLog:
    """Execute the configured experiment, returning (and flushing) its log.

    On an unexpected failure the partially written log is closed (and so
    flushed) before the exception propagates.
    """
    log = ExperimentLog(log_path)
    try:
        Engine(config, log).run()
    finally:
        log.close()
    return log
