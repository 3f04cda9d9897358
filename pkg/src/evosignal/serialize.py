"""Versioned npz container for trained models; round-trips are bit-exact."""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .ensemble import BoostedEnsemble
from .errors import SchemaError
from .lstm import LstmModel, _GATES
from .mlp import MlpModel

FORMAT_VERSION = 1


def _mlp_arrays(model: MlpModel, prefix: str = ""):
    arrays = {}
    for i, (w, b) in enumerate(zip(model.weights, model.biases)):
        arrays[f"{prefix}w{i}"] = w
        arrays[f"{prefix}b{i}"] = b
    if model.feature_mean is not None:
        arrays[f"{prefix}feature_mean"] = model.feature_mean
        arrays[f"{prefix}feature_std"] = model.feature_std
    meta = {
        "kind": "mlp",
        "layer_sizes": model.layer_sizes,
        "class_names": model.class_names,
        "standardized": model.feature_mean is not None,
    }
    return meta, arrays


def _mlp_restore(meta, arrays, prefix: str = "") -> MlpModel:
    sizes = meta["layer_sizes"]
    weights = [arrays[f"{prefix}w{i}"] for i in range(len(sizes) - 1)]
    biases = [arrays[f"{prefix}b{i}"] for i in range(len(sizes) - 1)]
    mean = arrays.get(f"{prefix}feature_mean") if meta["standardized"] else None
    std = arrays.get(f"{prefix}feature_std") if meta["standardized"] else None
    return MlpModel(sizes, weights, biases, meta["class_names"],
                    feature_mean=mean, feature_std=std)


def _lstm_arrays(model: LstmModel, prefix: str = ""):
    arrays = {}
    for g in _GATES:
        arrays[f"{prefix}gate_w_{g}"] = model.gate_weights[g]
        arrays[f"{prefix}gate_b_{g}"] = model.gate_biases[g]
    arrays[f"{prefix}readout_w"] = model.readout_weight
    arrays[f"{prefix}readout_b"] = model.readout_bias
    if model.feature_mean is not None:
        arrays[f"{prefix}feature_mean"] = model.feature_mean
        arrays[f"{prefix}feature_std"] = model.feature_std
    meta = {
        "kind": "lstm",
        "units": model.units,
        "n_features": model.n_features,
        "sequence_len": model.sequence_len,
        "class_names": model.class_names,
        "standardized": model.feature_mean is not None,
    }
    return meta, arrays


def _lstm_restore(meta, arrays, prefix: str = "") -> LstmModel:
    gate_w = {g: arrays[f"{prefix}gate_w_{g}"] for g in _GATES}
    gate_b = {g: arrays[f"{prefix}gate_b_{g}"] for g in _GATES}
    mean = arrays.get(f"{prefix}feature_mean") if meta["standardized"] else None
    std = arrays.get(f"{prefix}feature_std") if meta["standardized"] else None
    return LstmModel(meta["units"], meta["n_features"], gate_w, gate_b,
                     arrays[f"{prefix}readout_w"], arrays[f"{prefix}readout_b"],
                     meta["class_names"], feature_mean=mean, feature_std=std,
                     sequence_len=meta["sequence_len"])


_PACKERS = {"mlp": _mlp_arrays, "lstm": _lstm_arrays}
_RESTORERS = {"mlp": _mlp_restore, "lstm": _lstm_restore}


def save_model(model, path) -> None:
    """Serialize an MLP, LSTM, or boosted ensemble to one .npz file."""
    path = Path(path)
    if isinstance(model, BoostedEnsemble):
        arrays = {}
        member_meta = []
        for i, member in enumerate(model.members):
            packer = _PACKERS.get(getattr(member, "kind", None))
            if packer is None:
                raise SchemaError(f"cannot serialize ensemble member of kind "
                                  f"{getattr(member, 'kind', None)!r}")
            meta, member_arrays = packer(member, prefix=f"m{i}_")
            member_meta.append(meta)
            arrays.update(member_arrays)
        meta = {
            "format_version": FORMAT_VERSION,
            "kind": "ensemble",
            "scheme": model.scheme,
            "estimators": model.estimators,
            "alphas": list(map(float, model.alphas)),
            "class_names": model.class_names,
            "members": member_meta,
        }
    else:
        packer = _PACKERS.get(getattr(model, "kind", None))
        if packer is None:
            raise SchemaError(f"cannot serialize model of kind {getattr(model, 'kind', None)!r}")
        meta, arrays = packer(model)
        meta["format_version"] = FORMAT_VERSION
    arrays["__meta__"] = np.frombuffer(json.dumps(meta).encode("utf-8"), dtype=np.uint8)
    with path.open("wb") as fh:
        np.savez(fh, **arrays)


def load_model(path):
    path = Path(path)
    with np.load(path) as bundle:
        arrays = {k: bundle[k] for k in bundle.files}
    meta = json.loads(bytes(arrays.pop("__meta__")).decode("utf-8"))
    if meta.get("format_version") != FORMAT_VERSION:
        raise SchemaError(f"unsupported model format version {meta.get('format_version')}")
    kind = meta.get("kind")
    if kind == "ensemble":
        members = []
        for i, member_meta in enumerate(meta["members"]):
            restorer = _RESTORERS[member_meta["kind"]]
            members.append(restorer(member_meta, arrays, prefix=f"m{i}_"))
        return BoostedEnsemble(members=members, alphas=list(meta["alphas"]),
                               class_names=meta["class_names"],
                               estimators=meta["estimators"], scheme=meta["scheme"])
    if kind not in _RESTORERS:
        raise SchemaError(f"unknown model kind {kind!r}")
    return _RESTORERS[kind](meta, arrays)
