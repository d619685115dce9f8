"""Seeded synthetic hourly weather streams for fixtures, demos, and tests.

Each variable is a diurnal sine plus a first-order autoregressive noise
process, so a look-back window genuinely predicts the next hours; grid
points share the variable's base signal with small point-local jitter,
mimicking spatial correlation.  Options add a mean shift partway through
the stream (for drift experiments, sized in units of each column's own
pre-shift standard deviation) and a noisy "reference forecast" column
per target so the evaluation pipeline's benchmark path can be exercised.
Everything derives from one ``numpy.random.default_rng(seed)`` stream:
equal parameters always reproduce the identical frame.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidArgument
from .frames import TimeFrame
from .ingest import grid_column, reference_column

DEFAULT_VARIABLE_STYLES = {
    # name: (mean, diurnal amplitude, noise std, AR coefficient)
    "temperature_2m": (12.0, 6.0, 1.2, 0.92),
    "relative_humidity_2m": (65.0, 15.0, 6.0, 0.88),
    "wind_speed_10m": (14.0, 4.0, 3.0, 0.85),
    "surface_pressure": (1013.0, 1.5, 2.5, 0.95),
}
_FALLBACK_STYLE = (10.0, 3.0, 2.0, 0.9)


@dataclass(frozen=True)
class SyntheticSpec:
    """What to generate: variables × grid, length, and optional regime shift."""

    variables: tuple[str, ...] = tuple(DEFAULT_VARIABLE_STYLES)
    points_per_side: int = 1
    n_hours: int = 720
    start: str = "2024-01-01T00:00:00"
    seed: int = 0
    spatial_jitter: float = 0.15
    shift_at_hour: int | None = None
    shift_sigma: float = 0.0
    reference_targets: tuple[str, ...] = ()
    reference_noise_sigma: float = 0.4
    missing_cells: tuple[tuple[int, int], ...] = ()

    def __post_init__(self):
        if not self.variables:
            raise InvalidArgument("need at least one variable")
        if self.n_hours < 1:
            raise InvalidArgument(f"n_hours must be >= 1, got {self.n_hours}")
        if self.points_per_side < 1:
            raise InvalidArgument(
                f"points_per_side must be >= 1, got {self.points_per_side}"
            )
        if self.shift_at_hour is not None and not (
            0 <= self.shift_at_hour < self.n_hours
        ):
            raise InvalidArgument("shift_at_hour must fall inside the stream")
        unknown_refs = set(self.reference_targets) - set(self.variables)
        if unknown_refs:
            raise InvalidArgument(f"reference targets not generated: {unknown_refs}")
        object.__setattr__(self, "variables", tuple(self.variables))
        object.__setattr__(self, "reference_targets", tuple(self.reference_targets))
        object.__setattr__(self, "missing_cells", tuple(self.missing_cells))


def _ar1(rng: np.random.Generator, n: int, std: float, coefficient: float) -> np.ndarray:
    """Stationary AR(1) series with the given marginal standard deviation."""
    innovation_std = std * np.sqrt(1.0 - coefficient**2)
    series = np.empty(n)
    series[0] = rng.normal(0.0, std)
    noise = rng.normal(0.0, innovation_std, n - 1)
    for t in range(1, n):
        series[t] = coefficient * series[t - 1] + noise[t - 1]
    return series


def generate(spec: SyntheticSpec) -> TimeFrame:
    """Build the synthetic frame described by ``spec``."""
    rng = np.random.default_rng(spec.seed)
    n = spec.n_hours
    side = spec.points_per_side
    start = np.datetime64(spec.start, "s")
    timestamps = start + np.arange(n) * np.timedelta64(1, "h")
    hours = timestamps.astype("datetime64[h]").astype(np.int64) % 24

    columns: list[str] = []
    series: list[np.ndarray] = []
    center_truth: dict[str, np.ndarray] = {}
    mid = side // 2
    for var in spec.variables:
        mean, amplitude, noise_std, ar = DEFAULT_VARIABLE_STYLES.get(
            var, _FALLBACK_STYLE
        )
        phase = rng.uniform(0.0, 2.0 * np.pi)
        base = (
            mean
            + amplitude * np.sin(2.0 * np.pi * hours / 24.0 + phase)
            + _ar1(rng, n, noise_std, ar)
        )
        for r in range(side):
            for c in range(side):
                jitter = rng.normal(0.0, spec.spatial_jitter * noise_std, n)
                col = base + jitter
                columns.append(grid_column(var, r, c))
                series.append(col)
                if r == mid and c == mid:
                    center_truth[var] = col

    values = np.column_stack(series)

    if spec.shift_at_hour is not None and spec.shift_sigma != 0.0:
        pre = values[: spec.shift_at_hour]
        stds = pre.std(axis=0)
        values = values.copy()
        values[spec.shift_at_hour :] += spec.shift_sigma * stds
        for var in center_truth:
            idx = columns.index(grid_column(var, mid, mid))
            center_truth[var] = values[:, idx]

    if spec.reference_targets:
        ref_cols = []
        ref_series = []
        for target in spec.reference_targets:
            noise = rng.normal(0.0, spec.reference_noise_sigma, n)
            ref_cols.append(reference_column(target))
            ref_series.append(center_truth[target] + noise)
        columns = columns + ref_cols
        values = np.column_stack([values] + ref_series)

    if spec.missing_cells:
        values = values.copy()
        for row, col in spec.missing_cells:
            values[row, col] = np.nan

    return TimeFrame(timestamps, tuple(columns), values)
