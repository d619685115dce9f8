"""Data acquisition: hourly weather over HTTP, replay files, and a cache.

Three interchangeable ways to obtain the same merged grid frame:

* :func:`fetch_hourly` — an OpenMeteo-compatible client issuing one GET
  per grid coordinate (query parameters ``latitude``, ``longitude``,
  ``hourly=<comma-joined variables>``, ``start_date``, ``end_date``,
  ``timezone=UTC``) and merging the per-point fragments into one frame
  whose columns are ``<variable>_<row>_<col>`` by grid position.
* :func:`load_replay` / :func:`save_replay` — the CSV exchange format
  (see :mod:`driftcast.frames`), used for deterministic re-runs.
* :func:`save_cache` / :func:`load_cache` — a content-addressed local
  store keyed by (source tag, grid, variable set, date range), so
  repeated fetches and ``--offline`` runs need no network.

JSON ``null`` observations become NaN (missing) cells.  Reference
forecast series ride along as ordinary ``ref_<target>`` columns fetched
at the grid center, letting an external benchmark flow through the same
pipeline as observations.
"""

from __future__ import annotations

import hashlib
import io
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
import requests

from .errors import InvalidData, NotFound, ParseError, SourceUnavailable
from .frames import (
    GridSpec,
    TimeFrame,
    build_grid,
    frame_from_csv,
    frame_to_csv,
    write_frame_csv,
)

DEFAULT_HISTORY_DAYS = 150
DEFAULT_MAX_RETRIES = 4
DEFAULT_BACKOFF_SECONDS = 0.25
DEFAULT_TIMEOUT_SECONDS = 30.0

REF_PREFIX = "ref_"


def grid_column(variable: str, row: int, col: int) -> str:
    """Merged-frame column name for a variable at a grid position."""
    return f"{variable}_{row}_{col}"


def grid_center_column(variable: str, points_per_side: int) -> str:
    """Column holding ``variable`` at the grid's central point."""
    mid = points_per_side // 2
    return grid_column(variable, mid, mid)


def reference_column(target: str) -> str:
    """Column carrying the external reference forecast for ``target``."""
    return REF_PREFIX + target


@dataclass(frozen=True)
class SourceSpec:
    """Where and what to fetch (live) or which file to replay."""

    mode: str  # "live" | "replay"
    variables: tuple[str, ...] = ()
    grid: Optional[GridSpec] = None
    api_base: str = ""
    history_days: int = DEFAULT_HISTORY_DAYS
    replay_path: str = ""
    source_tag: str = "open-meteo"
    reference: dict = field(default_factory=dict)  # target -> API variable name
    max_retries: int = DEFAULT_MAX_RETRIES
    backoff_seconds: float = DEFAULT_BACKOFF_SECONDS
    timeout_seconds: float = DEFAULT_TIMEOUT_SECONDS

    def __post_init__(self):
        if self.mode not in ("live", "replay"):
            raise InvalidData(f"unknown source mode {self.mode!r}")
        if self.mode == "live":
            if not self.variables:
                raise InvalidData("live source needs a non-empty variable list")
            if self.grid is None:
                raise InvalidData("live source needs a grid")
            if not self.api_base:
                raise InvalidData("live source needs an api_base URL")
        if self.mode == "replay" and not self.replay_path:
            raise InvalidData("replay source needs a replay_path")
        object.__setattr__(self, "variables", tuple(self.variables))


@dataclass(frozen=True)
class FetchBatch:
    """Per-coordinate fragments plus the merged grid-wide frame."""

    merged: TimeFrame
    fragments: tuple[TimeFrame, ...]
    fetched_at: np.datetime64
    source_tag: str


def _get_with_retries(spec: SourceSpec, url: str, params: dict) -> dict:
    last_error = None
    for attempt in range(spec.max_retries + 1):
        try:
            response = requests.get(url, params=params, timeout=spec.timeout_seconds)
            if response.status_code >= 500:
                raise requests.RequestException(
                    f"server error {response.status_code}"
                )
            if response.status_code != 200:
                raise SourceUnavailable(
                    f"{url}: HTTP {response.status_code} for {params.get('latitude')},"
                    f"{params.get('longitude')}"
                )
            return response.json()
        except (requests.RequestException, ValueError) as exc:
            last_error = exc
            if attempt < spec.max_retries:
                time.sleep(spec.backoff_seconds * (2.0**attempt))
    raise SourceUnavailable(f"{url}: giving up after retries ({last_error})")


def _parse_hourly_payload(
    payload: dict, variables, coordinate, n_expected: Optional[int] = None
) -> TimeFrame:
    hourly = payload.get("hourly")
    if not isinstance(hourly, dict) or "time" not in hourly:
        raise ParseError(f"coordinate {coordinate}: payload lacks hourly.time")
    times = hourly["time"]
    try:
        timestamps = np.array(
            [np.datetime64(t.replace("Z", ""), "s") for t in times]
        )
    except (ValueError, AttributeError):
        raise ParseError(f"coordinate {coordinate}: unparseable hourly.time") from None
    columns = []
    for var in variables:
        series = hourly.get(var)
        if series is None or len(series) != len(times):
            raise ParseError(
                f"coordinate {coordinate}: variable {var!r} missing or misaligned"
            )
        columns.append(
            [np.nan if v is None else float(v) for v in series]
        )
    values = np.array(columns, dtype=np.float64).T
    if n_expected is not None and values.shape[0] != n_expected:
        raise ParseError(
            f"coordinate {coordinate}: {values.shape[0]} rows, expected {n_expected}"
        )
    return TimeFrame(timestamps, tuple(variables), values)


def fetch_hourly(spec: SourceSpec, date_range: tuple[str, str]) -> FetchBatch:
    """Fetch every grid coordinate for an inclusive [start, end] date range.

    All requests must succeed (after bounded exponential-backoff retries);
    a failed coordinate rejects the whole batch so no partial merges ever
    escape.  Fragment timestamps must agree exactly across coordinates.
    """
    if spec.mode != "live":
        raise InvalidData("fetch_hourly requires a live-mode source")
    start_date, end_date = date_range
    points = build_grid(spec.grid)
    side = spec.grid.points_per_side
    fragments = []
    for lat, lon in points:
        payload = _get_with_retries(
            spec,
            spec.api_base,
            {
                "latitude": f"{lat:.6f}",
                "longitude": f"{lon:.6f}",
                "hourly": ",".join(spec.variables),
                "start_date": start_date,
                "end_date": end_date,
                "timezone": "UTC",
            },
        )
        fragments.append(_parse_hourly_payload(payload, spec.variables, (lat, lon)))

    base_ts = fragments[0].timestamps
    for frag, (lat, lon) in zip(fragments[1:], points[1:]):
        if frag.timestamps.shape != base_ts.shape or not np.array_equal(
            frag.timestamps, base_ts
        ):
            raise InvalidData(
                f"coordinate ({lat}, {lon}): timestamp range differs from grid origin"
            )

    merged_cols = []
    merged_vals = []
    for vi, var in enumerate(spec.variables):
        for r in range(side):
            for c in range(side):
                merged_cols.append(grid_column(var, r, c))
                merged_vals.append(fragments[r * side + c].values[:, vi])

    if spec.reference:
        center = points[(side * side) // 2]
        ref_targets = sorted(spec.reference)
        payload = _get_with_retries(
            spec,
            spec.api_base,
            {
                "latitude": f"{center[0]:.6f}",
                "longitude": f"{center[1]:.6f}",
                "hourly": ",".join(spec.reference[t] for t in ref_targets),
                "start_date": start_date,
                "end_date": end_date,
                "timezone": "UTC",
            },
        )
        ref_frame = _parse_hourly_payload(
            payload,
            tuple(spec.reference[t] for t in ref_targets),
            center,
            n_expected=base_ts.shape[0],
        )
        if not np.array_equal(ref_frame.timestamps, base_ts):
            raise InvalidData("reference series timestamp range differs from grid")
        for t in ref_targets:
            merged_cols.append(reference_column(t))
            merged_vals.append(ref_frame.column(spec.reference[t]))

    merged = TimeFrame(base_ts, tuple(merged_cols), np.column_stack(merged_vals))
    return FetchBatch(
        merged=merged,
        fragments=tuple(fragments),
        fetched_at=np.datetime64("now", "s"),
        source_tag=spec.source_tag,
    )


def save_replay(batch_or_frame, path):
    """Write a batch's merged frame (or a bare frame) as a replay CSV."""
    frame = (
        batch_or_frame.merged
        if isinstance(batch_or_frame, FetchBatch)
        else batch_or_frame
    )
    frame_to_csv(frame, path)


def load_replay(path) -> FetchBatch:
    """Read a replay CSV back into a batch (merged frame only)."""
    frame = frame_from_csv(path, require_hourly=True)
    return FetchBatch(
        merged=frame,
        fragments=(),
        fetched_at=np.datetime64("now", "s"),
        source_tag="replay",
    )


def _cache_key(spec: SourceSpec, date_range: tuple[str, str]) -> str:
    grid = spec.grid
    grid_part = (
        "nogrid"
        if grid is None
        else f"{grid.center[0]:.6f},{grid.center[1]:.6f},{grid.span_km:.3f},{grid.points_per_side}"
    )
    ref_part = ",".join(f"{k}={v}" for k, v in sorted(spec.reference.items()))
    return "|".join(
        [
            spec.source_tag,
            grid_part,
            ",".join(spec.variables),
            ref_part,
            date_range[0],
            date_range[1],
        ]
    )


def _sha256(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def save_cache(batch: FetchBatch, spec: SourceSpec, date_range, cache_dir) -> Path:
    """Store the merged frame content-addressed; identical content is deduplicated.

    Layout: ``objects/<sha256 of CSV bytes>`` holds the data once;
    ``keys/<sha256 of key string>`` is a two-line pointer (object hash,
    then the human-readable key) so exact-key lookups stay O(1).
    """
    cache_dir = Path(cache_dir)
    (cache_dir / "objects").mkdir(parents=True, exist_ok=True)
    (cache_dir / "keys").mkdir(parents=True, exist_ok=True)
    buffer = io.StringIO()
    write_frame_csv(batch.merged, buffer)
    content = buffer.getvalue().encode()
    object_hash = _sha256(content)
    object_path = cache_dir / "objects" / object_hash
    if not object_path.exists():
        object_path.write_bytes(content)
    key = _cache_key(spec, date_range)
    key_path = cache_dir / "keys" / _sha256(key.encode())
    key_path.write_text(f"{object_hash}\n{key}\n")
    return object_path


def load_cache(spec: SourceSpec, date_range, cache_dir) -> FetchBatch:
    """Return the cached batch for this exact key, or raise NotFound."""
    cache_dir = Path(cache_dir)
    key = _cache_key(spec, date_range)
    key_path = cache_dir / "keys" / _sha256(key.encode())
    if not key_path.exists():
        raise NotFound(f"no cache entry for key {key!r}")
    object_hash = key_path.read_text().splitlines()[0].strip()
    object_path = cache_dir / "objects" / object_hash
    if not object_path.exists():
        raise NotFound(f"cache object {object_hash} missing for key {key!r}")
    frame = frame_from_csv(object_path, require_hourly=True)
    return FetchBatch(
        merged=frame,
        fragments=(),
        fetched_at=np.datetime64("now", "s"),
        source_tag=spec.source_tag,
    )
