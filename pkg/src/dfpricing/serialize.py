"""Versioned JSON files for fitted networks and models.

Parameters are written per layer in row-major order as decimal literals
with 17 significant digits, which round-trips IEEE float64 bit-exactly.
Model files add a kind discriminator and the protected-level ordering,
since head k is bound to level k by position.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .models import FittedModel, ProtectedLevels, UnawarenessAuxModel
from .network import NetworkParams, NetworkSpec, TrainHistory

FORMAT_NETWORK = "dfpricing-network"
FORMAT_MODEL = "dfpricing-model"
VERSION = 1


def _floats(values: np.ndarray) -> list[float]:
    # round-trip-exact decimal encoding (17 significant digits)
    return [float(format(v, ".17g")) for v in np.asarray(values, dtype=np.float64).ravel()]


def _spec_to_dict(spec: NetworkSpec) -> dict:
    return {
        "input_dim": spec.input_dim,
        "hidden_dims": list(spec.hidden_dims),
        "num_price_heads": spec.num_price_heads,
        "num_class_heads": spec.num_class_heads,
        "activation": spec.activation,
        "link": spec.link,
    }


def _spec_from_dict(doc: dict) -> NetworkSpec:
    return NetworkSpec(input_dim=doc["input_dim"], hidden_dims=tuple(doc["hidden_dims"]),
                       num_price_heads=doc["num_price_heads"],
                       num_class_heads=doc["num_class_heads"],
                       activation=doc["activation"], link=doc["link"])


def _history_to_dict(history: TrainHistory | None) -> dict:
    if history is None:
        return {}
    return {
        "seed": history.seed,
        "epochs_run": history.epochs_run,
        "best_epoch": history.best_epoch,
        "best_val_loss": float(format(history.best_val_loss, ".17g")),
    }


def network_to_dict(params: NetworkParams, history: TrainHistory | None = None) -> dict:
    doc = {
        "format": FORMAT_NETWORK,
        "version": VERSION,
        "spec": _spec_to_dict(params.spec),
        "layers": [{"weights": _floats(w), "bias": _floats(b)}
                   for w, b in params.hidden_weights],
        "price_readouts": [_floats(params.price_readout(k))
                           for k in range(params.spec.num_price_heads)],
        "class_readouts": [_floats(params.class_readout(k))
                           for k in range(params.spec.num_class_heads)],
        "training": _history_to_dict(history),
    }
    return doc


def network_from_dict(doc: dict) -> NetworkParams:
    if doc.get("format") != FORMAT_NETWORK or doc.get("version") != VERSION:
        raise ValueError(f"not a version-{VERSION} network document")
    spec = _spec_from_dict(doc["spec"])
    params = NetworkParams.zeros(spec)
    for j, layer in enumerate(doc["layers"]):
        params.weights[j][...] = np.asarray(layer["weights"]).reshape(params.weights[j].shape)
        params.biases[j][...] = layer["bias"]
    for k, readout in enumerate(doc["price_readouts"]):
        params.price_readout(k)[...] = readout
    for k, readout in enumerate(doc["class_readouts"]):
        params.class_readout(k)[...] = readout
    params.validate_finite()
    return params


def save_network(path: str | Path, params: NetworkParams,
                 history: TrainHistory | None = None) -> None:
    Path(path).write_text(json.dumps(network_to_dict(params, history), indent=1) + "\n")


def load_network(path: str | Path) -> NetworkParams:
    return network_from_dict(json.loads(Path(path).read_text()))


def model_to_dict(model: FittedModel) -> dict:
    histories = model.histories or [None] * model.ensemble_size
    doc = {
        "format": FORMAT_MODEL,
        "version": VERSION,
        "kind": model.kind,
        "levels": list(model.levels.levels),
        "muhat_direction": model.muhat_direction,
        "price_networks": [network_to_dict(p, h)
                           for p, h in zip(model.price_networks, histories)],
    }
    if model.class_networks is not None:
        doc["class_networks"] = [network_to_dict(p) for p in model.class_networks]
    return doc


def model_from_dict(doc: dict) -> FittedModel:
    if doc.get("format") != FORMAT_MODEL or doc.get("version") != VERSION:
        raise ValueError(f"not a version-{VERSION} model document")
    histories = []
    price_networks = []
    for net_doc in doc["price_networks"]:
        price_networks.append(network_from_dict(net_doc))
        meta = net_doc.get("training") or {}
        history = TrainHistory(seed=meta.get("seed", 0),
                               best_epoch=meta.get("best_epoch", 0),
                               best_val_loss=meta.get("best_val_loss", float("inf")),
                               epochs_run=meta.get("epochs_run", 0))
        histories.append(history)
    class_networks = None
    if "class_networks" in doc:
        class_networks = [network_from_dict(d) for d in doc["class_networks"]]
    return FittedModel(kind=doc["kind"], levels=ProtectedLevels(tuple(doc["levels"])),
                       price_networks=price_networks, class_networks=class_networks,
                       histories=histories, muhat_direction=doc.get("muhat_direction"))


def save_model(path: str | Path, model: FittedModel) -> None:
    Path(path).write_text(json.dumps(model_to_dict(model), indent=1) + "\n")


def load_model(path: str | Path) -> FittedModel:
    return model_from_dict(json.loads(Path(path).read_text()))
