"""Metrics from an experiment log: per-horizon RMSE, bootstrap spread,
energy totals, and the cost-normalized score.

Everything here is a pure transformation of :class:`ExperimentLog`
records.  For each (city, target, model, policy) combination the
resolved forecasts yield one RMSE per forecast step, in physical units;
the bootstrap then summarises that small vector as mean +/- std.  The
headline number is ``cost_score = rmse_mean * wh_total / n_predictions``
with ``wh_total`` counting training energy only, so a policy that skips
retrains is rewarded exactly in proportion to the energy it saved.

Reference forecasts ingested alongside the observations (``ref_*``
columns) go through the identical RMSE pipeline for comparison; they
carry no measured compute cost, so report tables show ``-`` in their
energy and cost cells.

Report rendering is deterministic: re-rendering from the same log
produces byte-identical CSV and text output.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import InsufficientData, InvalidArgument, NotAvailable
from .schedule import (
    EVENT_TRAIN,
    KIND_ENERGY,
    KIND_FORECAST,
    KIND_RESOLUTION,
    KIND_RUN_START,
    ExperimentLog,
)

DEFAULT_N_RESAMPLES = 1000

#: Identity of one experiment arm: (city, target, model, policy).
Combination = tuple[str, str, str, str]

_ID_FIELDS = ("city", "target", "model", "policy")


@dataclass(frozen=True)
class BootstrapConfig:
    """Resampling setup for mean/std estimates; seeded and deterministic."""

    n_resamples: int = DEFAULT_N_RESAMPLES
    seed: int = 0

    def __post_init__(self):
        if self.n_resamples < 1:
            raise InvalidArgument(
                f"n_resamples must be >= 1, got {self.n_resamples}"
            )
        if self.seed < 0:
            raise InvalidArgument(f"seed must be >= 0, got {self.seed}")


@dataclass(frozen=True)
class MetricRow:
    """One report line: accuracy, energy, and their cost-normalized product.

    ``cost_score`` always equals ``rmse_mean * wh_total / n_predictions``
    recomputed from this row's own fields.  ``rmse_mean``/``rmse_std``
    are in the target's physical unit.  ``ref_rmse`` is the reference
    forecast's RMSE mean when reference data was present, else None.
    """

    city: str
    target: str
    regressor: str
    policy: str
    rmse_mean: float
    rmse_std: float
    wh_total: float
    n_predictions: int
    cost_score: float
    ref_rmse: Optional[float] = None

    def __post_init__(self):
        if self.n_predictions <= 0:
            raise InvalidArgument(
                f"n_predictions must be > 0, got {self.n_predictions}"
            )
        if self.cost_score < 0:
            raise InvalidArgument(f"cost_score must be >= 0, got {self.cost_score}")


def _records_of(log) -> list[dict]:
    return log.records if isinstance(log, ExperimentLog) else list(log)


def _combo_matches(record: dict, combination: Combination) -> bool:
    return all(record.get(k) == v for k, v in zip(_ID_FIELDS, combination))


def combinations(log) -> list[Combination]:
    """Distinct (city, target, model, policy) identities present, sorted."""
    seen = set()
    for r in _records_of(log):
        if all(k in r for k in _ID_FIELDS):
            seen.add(tuple(r[k] for k in _ID_FIELDS))
    return sorted(seen)


def log_horizon(log) -> int:
    """Forecast length used by the run, recovered from the log itself."""
    records = _records_of(log)
    for r in records:
        if r.get("kind") == KIND_RUN_START and "horizon" in r:
            return int(r["horizon"])
    steps = [len(r["physical"]) for r in records if r.get("kind") == KIND_FORECAST]
    if steps:
        return max(steps)
    raise InsufficientData("log contains no horizon information")


def _pairs_per_step(
    log, combination: Combination, prediction_field: str
) -> dict[int, list[tuple[float, float]]]:
    pairs: dict[int, list[tuple[float, float]]] = {}
    for r in _records_of(log):
        if r.get("kind") != KIND_RESOLUTION or not _combo_matches(r, combination):
            continue
        predicted = r.get(prediction_field)
        if predicted is None:
            continue
        pairs.setdefault(int(r["step"]), []).append(
            (float(predicted), float(r["truth"]))
        )
    return pairs


def _rmse_vector(
    log, combination: Combination, prediction_field: str
) -> np.ndarray:
    horizon = log_horizon(log)
    pairs = _pairs_per_step(log, combination, prediction_field)
    if not pairs:
        raise InsufficientData(
            f"no resolved {prediction_field!r} values for {'/'.join(combination)}"
        )
    out = np.full(horizon, np.nan)
    for step, values in pairs.items():
        arr = np.asarray(values, dtype=np.float64)
        out[step - 1] = float(np.sqrt(np.mean((arr[:, 0] - arr[:, 1]) ** 2)))
    return out


def rmse_per_horizon(log, combination: Combination) -> np.ndarray:
    """RMSE of the combination's resolved forecasts, one entry per step.

    Entry ``h - 1`` covers all (prediction, truth) pairs resolved at
    step ``h``, in physical units.  Steps that never resolved (possible
    only in truncated runs) are NaN.
    """
    return _rmse_vector(log, combination, "predicted")


def reference_rmse_per_horizon(log, combination: Combination) -> np.ndarray:
    """Same pipeline as :func:`rmse_per_horizon` over reference forecasts."""
    try:
        return _rmse_vector(log, combination, "ref")
    except InsufficientData as exc:
        raise NotAvailable(
            f"no reference forecasts recorded for {'/'.join(combination)}"
        ) from exc


def bootstrap_mean_std(values, config: BootstrapConfig) -> tuple[float, float]:
    """Mean and population std of resample means; seeded and deterministic."""
    arr = np.asarray(values, dtype=np.float64).ravel()
    if arr.size == 0:
        raise InsufficientData("cannot bootstrap an empty vector")
    rng = np.random.default_rng(config.seed)
    idx = rng.integers(0, arr.size, size=(config.n_resamples, arr.size))
    resample_means = arr[idx].mean(axis=1)
    return float(resample_means.mean()), float(resample_means.std())


def cost_normalized(rmse_mean: float, wh_total: float, n_predictions: int) -> float:
    """Energy-weighted error: RMSE times watt-hours per prediction."""
    if n_predictions <= 0:
        raise InvalidArgument(f"n_predictions must be > 0, got {n_predictions}")
    return rmse_mean * wh_total / n_predictions


def train_energy_wh(log, combination: Combination) -> float:
    """Total watt-hours of the combination's training events, in log order."""
    total = 0.0
    for r in _records_of(log):
        if (
            r.get("kind") == KIND_ENERGY
            and r.get("event") == EVENT_TRAIN
            and _combo_matches(r, combination)
        ):
            total += float(r["wh"])
    return total


def prediction_count(log, combination: Combination) -> int:
    """Number of forecasts the combination issued."""
    return sum(
        1
        for r in _records_of(log)
        if r.get("kind") == KIND_FORECAST and _combo_matches(r, combination)
    )


def compare_to_reference(
    log, combination: Combination, config: Optional[BootstrapConfig] = None
):
    """(model_rmse_mean, ref_rmse_mean, relative_gap) for one combination.

    ``relative_gap = model / ref - 1``.  A perfect reference (RMSE 0)
    leaves the gap undefined; it is returned as None and rendered "-".
    Missing reference data raises NotAvailable.
    """
    config = config or BootstrapConfig()
    model_vec = rmse_per_horizon(log, combination)
    ref_vec = reference_rmse_per_horizon(log, combination)
    model_mean, _ = bootstrap_mean_std(model_vec[np.isfinite(model_vec)], config)
    ref_mean, _ = bootstrap_mean_std(ref_vec[np.isfinite(ref_vec)], config)
    gap = model_mean / ref_mean - 1.0 if ref_mean > 0 else None
    return model_mean, ref_mean, gap


def build_metric_rows(
    log, config: Optional[BootstrapConfig] = None
) -> list[MetricRow]:
    """One MetricRow per combination found in the log, in sorted order."""
    config = config or BootstrapConfig()
    rows = []
    for combination in combinations(log):
        vec = rmse_per_horizon(log, combination)
        mean, std = bootstrap_mean_std(vec[np.isfinite(vec)], config)
        wh_total = train_energy_wh(log, combination)
        n_predictions = prediction_count(log, combination)
        try:
            ref_vec = reference_rmse_per_horizon(log, combination)
            ref_rmse, _ = bootstrap_mean_std(ref_vec[np.isfinite(ref_vec)], config)
        except NotAvailable:
            ref_rmse = None
        city, target, model, policy = combination
        rows.append(
            MetricRow(
                city=city,
                target=target,
                regressor=model,
                policy=policy,
                rmse_mean=mean,
                rmse_std=std,
                wh_total=wh_total,
                n_predictions=n_predictions,
                cost_score=cost_normalized(mean, wh_total, n_predictions),
                ref_rmse=ref_rmse,
            )
        )
    return rows


CSV_HEADER = (
    "city,target,regressor,policy,rmse_mean,rmse_std,"
    "wh_total,n_predictions,cost_score,ref_rmse"
)


def render_metrics_csv(rows: list[MetricRow]) -> str:
    """Machine-readable metrics table; floats keep full round-trip precision."""
    lines = [CSV_HEADER]
    for r in rows:
        ref = "" if r.ref_rmse is None else repr(float(r.ref_rmse))
        lines.append(
            ",".join(
                [
                    r.city,
                    r.target,
                    r.regressor,
                    r.policy,
                    repr(float(r.rmse_mean)),
                    repr(float(r.rmse_std)),
                    repr(float(r.wh_total)),
                    str(r.n_predictions),
                    repr(float(r.cost_score)),
                    ref,
                ]
            )
        )
    return "\n".join(lines) + "\n"


def render_table(rows: list[MetricRow]) -> str:
    """Human-readable summary grouped by (city, target).

    Within a group, one line per (model, policy) arm plus — when
    reference forecasts were available — a final reference line whose
    energy and cost cells read "-" (no compute cost is measured for an
    externally supplied forecast).
    """
    if not rows:
        raise InsufficientData("no metric rows to render")
    header = (
        f"{'model':<14} {'policy':<22} {'rmse (mean +/- std)':<24} "
        f"{'train Wh':>12} {'preds':>7} {'rmse*Wh/pred':>14}"
    )
    rule = "-" * len(header)
    out = []
    groups: dict[tuple[str, str], list[MetricRow]] = {}
    for r in rows:
        groups.setdefault((r.city, r.target), []).append(r)
    for (city, target), members in sorted(groups.items()):
        out.append(f"city: {city}   target: {target}")
        out.append(header)
        out.append(rule)
        for r in members:
            rmse_cell = f"{r.rmse_mean:.4f} +/- {r.rmse_std:.4f}"
            out.append(
                f"{r.regressor:<14} {r.policy:<22} {rmse_cell:<24} "
                f"{r.wh_total:>12.6f} {r.n_predictions:>7d} {r.cost_score:>14.6f}"
            )
        ref_values = [r.ref_rmse for r in members if r.ref_rmse is not None]
        if ref_values:
            rmse_cell = f"{ref_values[0]:.4f}"
            out.append(
                f"{'reference':<14} {'-':<22} {rmse_cell:<24} "
                f"{'-':>12} {'-':>7} {'-':>14}"
            )
        out.append("")
    return "\n".join(out) + "\n"


def render_report(rows: list[MetricRow], csv_path=None, txt_path=None):
    """Render both report artifacts, writing them out when paths are given.

    Returns ``(csv_text, table_text)``; rendering the same rows twice
    yields byte-identical output.
    """
    csv_text = render_metrics_csv(rows)
    table_text = render_table(rows)
    if csv_path is not None:
        with open(csv_path, "w") as fh:
            fh.write(csv_text)
    if txt_path is not None:
        with open(txt_path, "w") as fh:
            fh.write(table_text)
    return csv_text, table_text
