"""Second-order gradient-boosted regression trees, written against numpy only.

Squared-error objective: per boosting round the gradient of sample ``i``
is ``g_i = prediction_i - label_i`` and the hessian is 1, so a leaf over
samples ``S`` gets weight ``w = -soft(G) / (|S| + l2_lambda)`` where
``G = sum of g_i`` and ``soft`` is the L1 soft-threshold
``sign(G) * max(|G| - l1_alpha, 0)``.  Splits are exact greedy: every
(feature, threshold) candidate is scored with the standard second-order
gain and the best positive gain wins; candidate thresholds are midpoints
between consecutive distinct sorted values.

Multi-output over the forecast horizon is handled as independent
per-step ensembles sharing the input matrix; round ``r`` trains one tree
for every step, and the validation series records the joint MSE after
each round.  Training is deterministic: no subsampling, stable sorts,
first-maximum tie-breaks.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .base import GbtParams, mse

_NO_FEATURE = -1


@dataclass(frozen=True)
class GbtTree:
    """One regression tree as parallel node arrays (row = node id, root = 0).

    Internal nodes route ``x[feature] < threshold`` to ``left`` else
    ``right``; leaves carry the additive ``value`` (already regularized,
    not yet learning-rate-scaled).
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    is_leaf: np.ndarray

    @property
    def n_nodes(self) -> int:
        return self.feature.shape[0]

    def predict(self, X: np.ndarray) -> np.ndarray:
        n = X.shape[0]
        node = np.zeros(n, dtype=np.int32)
        rows = np.arange(n)
        while True:
            at_leaf = self.is_leaf[node]
            if at_leaf.all():
                break
            go_left = X[rows, self.feature[node]] < self.threshold[node]
            step = np.where(go_left, self.left[node], self.right[node])
            node = np.where(at_leaf, node, step).astype(np.int32)
        return self.value[node]

    def leaf_sample_counts(self, X: np.ndarray) -> dict[int, int]:
        """How many rows of ``X`` land in each leaf (keyed by node id)."""
        n = X.shape[0]
        node = np.zeros(n, dtype=np.int32)
        rows = np.arange(n)
        while not self.is_leaf[node].all():
            go_left = X[rows, self.feature[node]] < self.threshold[node]
            step = np.where(go_left, self.left[node], self.right[node])
            node = np.where(self.is_leaf[node], node, step).astype(np.int32)
        ids, counts = np.unique(node, return_counts=True)
        return {int(i): int(c) for i, c in zip(ids, counts)}


@dataclass(frozen=True)
class GbtEnsemble:
    """Additive tree ensemble for one horizon step."""

    base_score: float
    trees: tuple[GbtTree, ...]
    learning_rate: float

    def predict(self, X: np.ndarray, n_trees: int | None = None) -> np.ndarray:
        """Ensemble prediction, optionally truncated to the first ``n_trees``."""
        out = np.full(X.shape[0], self.base_score)
        use = self.trees if n_trees is None else self.trees[:n_trees]
        for tree in use:
            out += self.learning_rate * tree.predict(X)
        return out


@dataclass(frozen=True)
class GbtState:
    """Fitted multi-horizon model: one ensemble per forecast step."""

    input_width: int
    ensembles: tuple[GbtEnsemble, ...]

    def predict(self, X: np.ndarray, timestamps=None) -> np.ndarray:
        return np.column_stack([e.predict(X) for e in self.ensembles])


def _soft_threshold(G, alpha):
    return np.sign(G) * np.maximum(np.abs(G) - alpha, 0.0)


def _leaf_score(G, H, alpha, lam):
    s = _soft_threshold(G, alpha)
    return (s * s) / (H + lam)


class _TreeBuilder:
    """Grows one tree on (X, gradient) under the shared presorted order.

    The per-feature sort of the full training matrix is computed once per
    fit and reused by every node of every tree: a node only filters the
    presorted index columns down to its member rows, so no per-node sort
    is needed.
    """

    def __init__(self, X: np.ndarray, presort: np.ndarray, params: GbtParams):
        self.X = X
        self.presort = presort
        self.params = params
        self.n, self.n_features = X.shape

    def build(self, gradient: np.ndarray) -> GbtTree:
        self.gradient = gradient
        self.feature: list[int] = []
        self.threshold: list[float] = []
        self.left: list[int] = []
        self.right: list[int] = []
        self.value: list[float] = []
        self.is_leaf: list[bool] = []
        self._grow(np.ones(self.n, dtype=bool), depth=0)
        return GbtTree(
            feature=np.array(self.feature, dtype=np.int32),
            threshold=np.array(self.threshold),
            left=np.array(self.left, dtype=np.int32),
            right=np.array(self.right, dtype=np.int32),
            value=np.array(self.value),
            is_leaf=np.array(self.is_leaf),
        )

    def _new_node(self) -> int:
        self.feature.append(_NO_FEATURE)
        self.threshold.append(0.0)
        self.left.append(-1)
        self.right.append(-1)
        self.value.append(0.0)
        self.is_leaf.append(True)
        return len(self.feature) - 1

    def _leaf_weight(self, G: float, k: int) -> float:
        p = self.params
        return float(-_soft_threshold(G, p.l1_alpha) / (k + p.l2_lambda))

    def _grow(self, member: np.ndarray, depth: int) -> int:
        p = self.params
        node = self._new_node()
        k = int(member.sum())
        G = float(self.gradient[member].sum())
        if depth >= p.max_depth or k < 2 * p.min_samples_leaf:
            self.value[node] = self._leaf_weight(G, k)
            return node

        # Node-local sorted orders: (k, n_features), column f ascending in feature f.
        sorted_members = self.presort.T[member[self.presort].T].reshape(
            self.n_features, k
        )
        cols = np.arange(self.n_features)
        Xs = self.X[sorted_members, cols[:, np.newaxis]].T
        gs = self.gradient[sorted_members].T

        GL = np.cumsum(gs, axis=0)[:-1]
        HL = np.arange(1, k, dtype=np.float64)[:, np.newaxis]
        GR = G - GL
        HR = k - HL
        gains = (
            _leaf_score(GL, HL, p.l1_alpha, p.l2_lambda)
            + _leaf_score(GR, HR, p.l1_alpha, p.l2_lambda)
            - _leaf_score(G, float(k), p.l1_alpha, p.l2_lambda)
        )
        sizes_ok = (HL >= p.min_samples_leaf) & (HR >= p.min_samples_leaf)
        distinct = Xs[1:] > Xs[:-1]
        gains[~(sizes_ok & distinct)] = -np.inf

        best_flat = int(np.argmax(gains))
        pos, feat = np.unravel_index(best_flat, gains.shape)
        if not np.isfinite(gains[pos, feat]) or gains[pos, feat] <= 0.0:
            self.value[node] = self._leaf_weight(G, k)
            return node

        lo = Xs[pos, feat]
        hi = Xs[pos + 1, feat]
        thr = (lo + hi) / 2.0
        if thr <= lo:  # midpoint collapsed onto the lower value
            thr = hi
        go_left = member & (self.X[:, feat] < thr)
        go_right = member & ~(self.X[:, feat] < thr)
        n_left = int(go_left.sum())
        assert n_left == pos + 1, "threshold did not reproduce the scored split"
        assert n_left >= p.min_samples_leaf and k - n_left >= p.min_samples_leaf

        self.is_leaf[node] = False
        self.feature[node] = int(feat)
        self.threshold[node] = float(thr)
        self.left[node] = self._grow(go_left, depth + 1)
        self.right[node] = self._grow(go_right, depth + 1)
        return node


def train_gbt(
    params: GbtParams,
    X: np.ndarray,
    y: np.ndarray,
    Xv: np.ndarray,
    yv: np.ndarray,
    seed: int,
    val_timestamps=None,
    scaler=None,
    target=None,
):
    """Fit per-horizon ensembles round by round.

    Returns ``(state, val_history, n_rounds)`` where ``val_history[r]``
    is the joint validation MSE after round ``r + 1``.  ``seed`` is
    accepted for interface uniformity; this trainer is fully
    deterministic and draws no random numbers.
    """
    del seed, val_timestamps, scaler, target
    n_outputs = y.shape[1]
    presort = np.argsort(X, axis=0, kind="stable").astype(np.int32)
    builder = _TreeBuilder(X, presort, params)

    bases = y.mean(axis=0)
    pred = np.tile(bases, (X.shape[0], 1))
    val_pred = np.tile(bases, (Xv.shape[0], 1))
    trees: list[list[GbtTree]] = [[] for _ in range(n_outputs)]
    val_history = []
    for _ in range(params.n_trees):
        for j in range(n_outputs):
            tree = builder.build(pred[:, j] - y[:, j])
            trees[j].append(tree)
            pred[:, j] += params.learning_rate * tree.predict(X)
            val_pred[:, j] += params.learning_rate * tree.predict(Xv)
        val_history.append(mse(val_pred, yv))

    ensembles = tuple(
        GbtEnsemble(
            base_score=float(bases[j]),
            trees=tuple(trees[j]),
            learning_rate=params.learning_rate,
        )
        for j in range(n_outputs)
    )
    return GbtState(input_width=X.shape[1], ensembles=ensembles), val_history, params.n_trees
