"""Adaptive training-window selection by distance-variance saturation.

How much history should a freshly retrained model see?  This module
answers that by comparing the most recent scaled feature rows (a proxy
for the hours about to be forecast) against a candidate training window
that grows backwards in time.  For every window length ``t`` two sets of
Euclidean distances are formed:

* the cross set — every (recent row, window row) pair,
* the within set — every unordered pair inside the window,

and their population standard deviations are divided to give a variance
ratio.  While older rows still add information the ratio keeps moving;
once the curve flattens — the running mean of absolute finite-difference
slopes falls to the configured threshold — the search stops and that
window length is selected.  On exchangeable data the ratio converges to
1, so the selected window is typically far shorter than the full
available history.

Inputs are expected in scaled (for example min-max) feature space so no
single large-unit feature dominates the Euclidean metric.
"""

from __future__ import annotations

import csv
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DegenerateWindow,
    InsufficientData,
    InvalidArgument,
    SchemaMismatch,
)

DEFAULT_MAX_WINDOW = 3600
DEFAULT_ALPHA = 24
DEFAULT_PLATEAU_THRESHOLD = 0.25e-3

STOPPED_BY_PLATEAU = "plateau"
STOPPED_BY_MAX_WINDOW = "max_window_reached"

_CROSS_BLOCK_ROWS = 512


def _as_row_block(rows) -> np.ndarray:
    block = np.asarray(rows, dtype=np.float64)
    if block.ndim == 1:
        block = block.reshape(-1, 1)
    if block.ndim != 2:
        raise InvalidArgument(f"row block must be 2-D, got shape {block.shape}")
    return block


def cross_distances(x, y) -> np.ndarray:
    """All |x|·|y| Euclidean distances between rows of ``x`` and rows of ``y``.

    Returned flattened in (x-row major) order; deterministic.
    """
    x = _as_row_block(x)
    y = _as_row_block(y)
    if x.shape[1] != y.shape[1]:
        raise SchemaMismatch(
            f"row width mismatch: {x.shape[1]} vs {y.shape[1]}"
        )
    if x.shape[0] == 0 or y.shape[0] == 0:
        raise InsufficientData("both row blocks must be non-empty")
    out = np.empty((x.shape[0], y.shape[0]))
    # Direct differences in blocks: more precise than the Gram expansion
    # and memory-bounded regardless of |y|.
    for start in range(0, y.shape[0], _CROSS_BLOCK_ROWS):
        chunk = y[start : start + _CROSS_BLOCK_ROWS]
        diff = x[:, np.newaxis, :] - chunk[np.newaxis, :, :]
        out[:, start : start + chunk.shape[0]] = np.sqrt(
            np.einsum("ijk,ijk->ij", diff, diff)
        )
    return out.ravel()


def within_distances(y) -> np.ndarray:
    """All n·(n−1)/2 unordered pairwise Euclidean distances among rows of ``y``."""
    y = _as_row_block(y)
    n = y.shape[0]
    if n < 2:
        raise InsufficientData(f"need at least 2 rows, got {n}")
    sq_norms = np.einsum("ij,ij->i", y, y)
    sq = sq_norms[:, np.newaxis] + sq_norms[np.newaxis, :] - 2.0 * (y @ y.T)
    np.maximum(sq, 0.0, out=sq)
    iu, ju = np.triu_indices(n, k=1)
    return np.sqrt(sq[iu, ju])


def variance_ratio(x, y) -> float:
    """Population-std of cross distances divided by population-std of within distances.

    Equals ~1 when ``x`` and ``y`` are drawn from the same distribution
    and the window is large enough to capture its spread.
    """
    cross_std = float(np.std(cross_distances(x, y)))
    within_std = float(np.std(within_distances(y)))
    if within_std == 0.0:
        raise DegenerateWindow(
            "window rows are mutually equidistant (zero within-distance spread)"
        )
    return cross_std / within_std


@dataclass(frozen=True)
class HorizonQuery:
    """Inputs to the window search.

    ``reference_block`` holds the most recent ``horizon_len`` scaled rows;
    ``candidates`` holds up to ``max_window`` rows immediately preceding
    it, ordered most-recent-first (``candidates[0]`` is the newest).
    ``alpha`` is how many consecutive slopes the plateau test averages;
    ``threshold`` is the mean-|slope| level that counts as flat; ``step``
    is the window-growth increment in hours.
    """

    reference_block: np.ndarray
    candidates: np.ndarray
    max_window: int = DEFAULT_MAX_WINDOW
    alpha: int = DEFAULT_ALPHA
    threshold: float = DEFAULT_PLATEAU_THRESHOLD
    step: int = 1

    def __post_init__(self):
        ref = _as_row_block(self.reference_block)
        cand = _as_row_block(self.candidates)
        if ref.shape[0] < 2:
            raise InvalidArgument(
                f"reference block needs at least 2 rows, got {ref.shape[0]}"
            )
        if ref.shape[1] != cand.shape[1]:
            raise SchemaMismatch(
                f"row width mismatch: reference {ref.shape[1]} vs candidates {cand.shape[1]}"
            )
        if self.alpha < 2:
            raise InvalidArgument(f"alpha must be >= 2, got {self.alpha}")
        if self.max_window <= self.alpha:
            raise InvalidArgument(
                f"max_window ({self.max_window}) must exceed alpha ({self.alpha})"
            )
        if self.step < 1:
            raise InvalidArgument(f"step must be >= 1, got {self.step}")
        if not self.threshold >= 0:
            raise InvalidArgument(f"threshold must be >= 0, got {self.threshold}")
        object.__setattr__(self, "reference_block", ref)
        object.__setattr__(self, "candidates", cand)

    @property
    def horizon_len(self) -> int:
        return self.reference_block.shape[0]

    @classmethod
    def from_frame(
        cls,
        frame,
        horizon_len: int = 6,
        max_window: int = DEFAULT_MAX_WINDOW,
        alpha: int = DEFAULT_ALPHA,
        threshold: float = DEFAULT_PLATEAU_THRESHOLD,
        step: int = 1,
    ) -> "HorizonQuery":
        """Slice a scaled TimeFrame into reference block + candidate rows.

        The newest ``horizon_len`` rows become the reference block; the
        up-to-``max_window`` rows before them become the candidates in
        most-recent-first order.
        """
        values = frame.values
        if values.shape[0] <= horizon_len:
            raise InsufficientData(
                f"frame has {values.shape[0]} rows, need more than {horizon_len}"
            )
        ref = values[-horizon_len:]
        cand = values[:-horizon_len][::-1][:max_window]
        return cls(
            reference_block=ref,
            candidates=cand,
            max_window=max_window,
            alpha=alpha,
            threshold=threshold,
            step=step,
        )


@dataclass(frozen=True)
class HorizonResult:
    """Outcome of the window search.

    ``selected_window`` is the chosen training-window length in hours;
    ``curve`` holds one (window_hours, variance_ratio) pair per evaluated
    length; ``stopped_by`` says whether the plateau criterion fired or
    the window cap was hit.
    """

    selected_window: int
    curve: np.ndarray
    stopped_by: str

    @property
    def final_ratio(self) -> float:
        return float(self.curve[-1, 1])


@dataclass
class _MomentSet:
    """Running count/sum/sum-of-squares of a growing distance multiset."""

    n: int = 0
    total: float = 0.0
    total_sq: float = 0.0

    def add(self, distances: np.ndarray):
        self.n += distances.size
        self.total += float(np.sum(distances))
        self.total_sq += float(np.sum(distances * distances))

    def population_std(self) -> float:
        if self.n == 0:
            return float("nan")
        mean = self.total / self.n
        var = self.total_sq / self.n - mean * mean
        return float(np.sqrt(max(var, 0.0)))


def find_variance_horizon(query: HorizonQuery) -> HorizonResult:
    """Grow the candidate window until the variance-ratio curve plateaus.

    Starting at the smallest evaluable window (``horizon_len + 1`` rows),
    the window grows by ``step`` rows at a time.  At each length the
    ratio is updated incrementally — only distances involving the newly
    added rows are computed — and the plateau statistic is the mean of
    the last ``alpha`` absolute slopes ``|ratio(t) − ratio(t−step)| / step``.
    Before the first slope exists the statistic is infinite, so a finite
    threshold can never fire on a single point, while an infinite
    threshold stops immediately at the smallest window.  If the statistic
    never reaches ``threshold`` the search ends at ``max_window`` (or at
    the last candidate row if fewer are available) with
    ``stopped_by = "max_window_reached"``.
    """
    x = query.reference_block
    cand = query.candidates
    n_cand = cand.shape[0]
    t_min = query.horizon_len + 1
    if n_cand < query.alpha + query.horizon_len + 2:
        raise InsufficientData(
            f"{n_cand} candidate rows; need at least "
            f"{query.alpha + query.horizon_len + 2}"
        )
    t_cap = min(query.max_window, n_cand)

    cross = _MomentSet()
    within = _MomentSet()
    curve_t: list[int] = []
    curve_ratio: list[float] = []
    slopes: deque[float] = deque(maxlen=query.alpha)
    prev_ratio: float | None = None

    t = 0
    while t < t_cap:
        t_next = min(t + (t_min if t == 0 else query.step), t_cap)
        new_rows = cand[t:t_next]
        cross.add(cross_distances(x, new_rows))
        if t > 0:
            within.add(cross_distances(new_rows, cand[:t]))
        if new_rows.shape[0] >= 2:
            within.add(within_distances(new_rows))
        t = t_next

        within_std = within.population_std()
        if within_std == 0.0:
            raise DegenerateWindow(
                f"window of {t} rows has zero within-distance spread"
            )
        ratio = cross.population_std() / within_std
        curve_t.append(t)
        curve_ratio.append(ratio)
        if prev_ratio is not None:
            slopes.append(abs(ratio - prev_ratio) / (t - curve_t[-2]))
        prev_ratio = ratio

        plateau_stat = (
            float("inf") if not slopes else sum(slopes) / len(slopes)
        )
        if plateau_stat <= query.threshold:
            return HorizonResult(
                selected_window=t,
                curve=np.column_stack([curve_t, curve_ratio]),
                stopped_by=STOPPED_BY_PLATEAU,
            )

    return HorizonResult(
        selected_window=t_cap,
        curve=np.column_stack([curve_t, curve_ratio]),
        stopped_by=STOPPED_BY_MAX_WINDOW,
    )


def curve_to_csv(result: HorizonResult, path):
    """Write the evaluated (window_hours, variance_ratio) curve as CSV."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["window_hours", "variance_ratio"])
        for t, ratio in result.curve:
            writer.writerow([int(t), repr(float(ratio))])
