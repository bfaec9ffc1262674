"""Model checkpoints: a versioned textual container with exact float64 payloads.

Layout (one item per line):

    PATTERNLAB-CKPT 1
    <meta json: kind, readout, activations, provenance, ...>
    ARRAY <name> <rows> <cols>
    <base64 of little-endian float64, row-major>
    ...
    END

Vectors are stored as 1 x n.  Exactness matters: constructed models carry
integer weights whose behavior is checked bit-for-bit after a round trip.
"""
from __future__ import annotations

import base64
import hashlib
import json
from typing import Iterable

import numpy as np

from .gnn import GnnLayer, GnnModel
from .neural import DenseLayer, DenseParams

__all__ = ["save_gnn_model", "load_gnn_model", "model_digest", "MAGIC"]

MAGIC = "PATTERNLAB-CKPT 1"


def _encode_array(name: str, arr: np.ndarray) -> list[str]:
    a = np.ascontiguousarray(np.atleast_2d(np.asarray(arr, dtype=np.float64)))
    payload = base64.b64encode(a.astype("<f8").tobytes()).decode("ascii")
    return [f"ARRAY {name} {a.shape[0]} {a.shape[1]}", payload]


def _model_lines(model: GnnModel, provenance: str) -> list[str]:
    meta = {
        "kind": "gnn",
        "readout": model.readout,
        "head_readout": model.head_readout,
        "layer_activations": [l.activation for l in model.layers],
        "suffix_activations": [l.activation for l in model.suffix.layers],
        "head_activations": {
            name: [l.activation for l in mlp.layers] for name, mlp in sorted(model.heads.items())
        },
        "provenance": provenance,
    }
    lines = [MAGIC, json.dumps(meta, sort_keys=True)]
    for i, layer in enumerate(model.layers):
        lines += _encode_array(f"layers[{i}].w1", layer.w1)
        lines += _encode_array(f"layers[{i}].w2", layer.w2)
        lines += _encode_array(f"layers[{i}].b", layer.b)
    for j, layer in enumerate(model.suffix.layers):
        lines += _encode_array(f"suffix[{j}].w", layer.w)
        lines += _encode_array(f"suffix[{j}].b", layer.b)
    for name in sorted(model.heads):
        for j, layer in enumerate(model.heads[name].layers):
            lines += _encode_array(f"heads[{name}][{j}].w", layer.w)
            lines += _encode_array(f"heads[{name}][{j}].b", layer.b)
    lines.append("END")
    return lines


def save_gnn_model(model: GnnModel, path, provenance: str = "") -> None:
    with open(path, "w", encoding="ascii") as fh:
        fh.write("\n".join(_model_lines(model, provenance)) + "\n")


def model_digest(model: GnnModel) -> str:
    """Stable content hash of a model; used to prove a network went untouched."""
    blob = "\n".join(_model_lines(model, "")).encode("ascii")
    return hashlib.sha256(blob).hexdigest()


def _read_arrays(lines: Iterable[str]) -> dict[str, np.ndarray]:
    arrays: dict[str, np.ndarray] = {}
    it = iter(lines)
    for line in it:
        if line == "END":
            return arrays
        if not line.startswith("ARRAY "):
            raise ValueError(f"malformed checkpoint line: {line[:40]!r}")
        _, name, rows, cols = line.split()
        payload = next(it)
        data = np.frombuffer(base64.b64decode(payload), dtype="<f8")
        arrays[name] = data.reshape(int(rows), int(cols)).copy()
    raise ValueError("checkpoint missing END marker")


def load_gnn_model(path) -> tuple[GnnModel, dict]:
    with open(path, "r", encoding="ascii") as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0] != MAGIC:
        raise ValueError("not a patternlab checkpoint (bad magic header)")
    meta = json.loads(lines[1])
    arrays = _read_arrays(lines[2:])
    layers = []
    for i, act in enumerate(meta["layer_activations"]):
        layers.append(
            GnnLayer(
                arrays[f"layers[{i}].w1"],
                arrays[f"layers[{i}].w2"],
                arrays[f"layers[{i}].b"].reshape(-1),
                act,
            )
        )
    suffix = DenseParams(
        [
            DenseLayer(arrays[f"suffix[{j}].w"], arrays[f"suffix[{j}].b"].reshape(-1), act)
            for j, act in enumerate(meta["suffix_activations"])
        ]
    )
    heads = {}
    for name, acts in meta["head_activations"].items():
        heads[name] = DenseParams(
            [
                DenseLayer(
                    arrays[f"heads[{name}][{j}].w"],
                    arrays[f"heads[{name}][{j}].b"].reshape(-1),
                    act,
                )
                for j, act in enumerate(acts)
            ]
        )
    model = GnnModel(layers, meta["readout"], suffix, heads, dict(meta["head_readout"]))
    return model, meta
