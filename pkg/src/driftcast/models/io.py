"""Versioned on-disk checkpoints for trained models.

A checkpoint is a single ``.npz`` archive (numpy's zip container):

``meta``
    UTF-8 JSON: ``format_version`` (currently 1), regressor ``kind`` and
    hyperparameters, ``seed``, ``target``, ``trained_at`` (RFC 3339 or
    null), ``horizon``, ``input_width``, the training report (best
    validation loss, wall seconds, rounds, full validation series), and
    the scaler column names (null when no scaler was attached).
``scaler_mins`` / ``scaler_maxs``
    Per-column scaler arrays, present iff the model carries a scaler.
``gbt_bases``, ``gbt{j}_offsets``, ``gbt{j}_feature`` ... (tree kind)
    Per-horizon-step ensembles ``j``: node tables of all trees
    concatenated, with ``offsets[k]:offsets[k+1]`` delimiting tree ``k``.
``mlp_W{i}`` / ``mlp_b{i}`` (network kind)
    One weight matrix and bias vector per layer.
``ext_timestamps`` / ``ext_values`` (external kind)
    Issue times (epoch seconds) and the physical prediction table.

Loading validates ``format_version`` and reconstructs a fully usable
:class:`~driftcast.models.base.TrainedModel`.
"""

from __future__ import annotations

import json
from dataclasses import asdict

import numpy as np

from ..errors import InvalidData
from ..frames import ScalerParams, parse_timestamp
from .base import (
    KIND_EXTERNAL,
    KIND_GBT,
    KIND_MLP,
    ExternalParams,
    GbtParams,
    MlpParams,
    RegressorSpec,
    TrainedModel,
    TrainReport,
)
from .external import ExternalState
from .gbt import GbtEnsemble, GbtState, GbtTree
from .mlp import MlpState

FORMAT_VERSION = 1

_PARAM_CLASSES = {KIND_GBT: GbtParams, KIND_MLP: MlpParams, KIND_EXTERNAL: ExternalParams}


def save_model(model: TrainedModel, path):
    meta = {
        "format_version": FORMAT_VERSION,
        "kind": model.spec.kind,
        "params": asdict(model.spec.params),
        "seed": int(model.spec.seed),
        "target": model.target,
        "trained_at": None
        if model.trained_at is None
        else str(np.datetime64(model.trained_at, "s")) + "Z",
        "horizon": int(model.horizon),
        "input_width": None
        if model.state.input_width is None
        else int(model.state.input_width),
        "report": {
            "min_val_loss": model.report.min_val_loss,
            "wall_seconds": model.report.wall_seconds,
            "epochs_or_trees": model.report.epochs_or_trees,
            "val_history": list(model.report.val_history),
        },
        "scaler_columns": None if model.scaler is None else list(model.scaler.columns),
    }
    arrays = {"meta": np.frombuffer(json.dumps(meta).encode(), dtype=np.uint8)}
    if model.scaler is not None:
        arrays["scaler_mins"] = model.scaler.mins
        arrays["scaler_maxs"] = model.scaler.maxs
    state = model.state
    if model.spec.kind == KIND_GBT:
        arrays["gbt_bases"] = np.array([e.base_score for e in state.ensembles])
        for j, ens in enumerate(state.ensembles):
            offsets = np.cumsum([0] + [t.n_nodes for t in ens.trees])
            arrays[f"gbt{j}_offsets"] = offsets.astype(np.int64)
            for name in ("feature", "threshold", "left", "right", "value", "is_leaf"):
                parts = [getattr(t, name) for t in ens.trees]
                arrays[f"gbt{j}_{name}"] = (
                    np.concatenate(parts) if parts else np.array([])
                )
    elif model.spec.kind == KIND_MLP:
        for i, (W, b) in enumerate(zip(state.weights, state.biases)):
            arrays[f"mlp_W{i}"] = W
            arrays[f"mlp_b{i}"] = b
    else:
        arrays["ext_timestamps"] = state.timestamps.astype("datetime64[s]").astype(
            np.int64
        )
        arrays["ext_values"] = state.physical_values
    np.savez(path, **arrays)


def _load_gbt_state(data: np.lib.npyio.NpzFile, meta: dict) -> GbtState:
    params = GbtParams(**meta["params"])
    bases = data["gbt_bases"]
    ensembles = []
    for j in range(meta["horizon"]):
        offsets = data[f"gbt{j}_offsets"]
        trees = []
        for k in range(offsets.shape[0] - 1):
            sl = slice(int(offsets[k]), int(offsets[k + 1]))
            trees.append(
                GbtTree(
                    feature=data[f"gbt{j}_feature"][sl].astype(np.int32),
                    threshold=data[f"gbt{j}_threshold"][sl],
                    left=data[f"gbt{j}_left"][sl].astype(np.int32),
                    right=data[f"gbt{j}_right"][sl].astype(np.int32),
                    value=data[f"gbt{j}_value"][sl],
                    is_leaf=data[f"gbt{j}_is_leaf"][sl].astype(bool),
                )
            )
        ensembles.append(
            GbtEnsemble(
                base_score=float(bases[j]),
                trees=tuple(trees),
                learning_rate=params.learning_rate,
            )
        )
    return GbtState(input_width=meta["input_width"], ensembles=tuple(ensembles))


def load_model(path) -> TrainedModel:
    with np.load(path, allow_pickle=False) as data:
        meta = json.loads(bytes(data["meta"]).decode())
        version = meta.get("format_version")
        if version != FORMAT_VERSION:
            raise InvalidData(
                f"{path}: checkpoint format version {version}, expected {FORMAT_VERSION}"
            )
        kind = meta["kind"]
        scaler = None
        if meta["scaler_columns"] is not None:
            scaler = ScalerParams(
                columns=tuple(meta["scaler_columns"]),
                mins=data["scaler_mins"],
                maxs=data["scaler_maxs"],
            )
        if kind == KIND_GBT:
            state = _load_gbt_state(data, meta)
        elif kind == KIND_MLP:
            weights, biases = [], []
            i = 0
            while f"mlp_W{i}" in data:
                weights.append(data[f"mlp_W{i}"])
                biases.append(data[f"mlp_b{i}"])
                i += 1
            state = MlpState(
                input_width=meta["input_width"],
                weights=tuple(weights),
                biases=tuple(biases),
            )
        elif kind == KIND_EXTERNAL:
            state = ExternalState(
                timestamps=data["ext_timestamps"].astype("datetime64[s]"),
                physical_values=data["ext_values"],
                target=meta["target"],
                scaler=scaler,
            )
        else:
            raise InvalidData(f"{path}: unknown model kind {kind!r}")
    spec = RegressorSpec(
        kind=kind, params=_PARAM_CLASSES[kind](**meta["params"]), seed=meta["seed"]
    )
    report = TrainReport(
        min_val_loss=meta["report"]["min_val_loss"],
        wall_seconds=meta["report"]["wall_seconds"],
        epochs_or_trees=meta["report"]["epochs_or_trees"],
        val_history=tuple(meta["report"]["val_history"]),
    )
    trained_at = (
        None if meta["trained_at"] is None else parse_timestamp(meta["trained_at"])
    )
    return TrainedModel(
        spec=spec,
        state=state,
        report=report,
        horizon=meta["horizon"],
        scaler=scaler,
        target=meta["target"],
        trained_at=trained_at,
    )
