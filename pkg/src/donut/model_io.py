"""Portable text model format.

A JSON document holding the format version, hyperparameters, standardization
statistics and every tensor as a flat list of shortest round-trip decimals,
plus a SHA-256 checksum over the tensor payload.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np

from .gaussian_net import TENSOR_NAMES, ModelParams

FORMAT = "donut-model"
VERSION = 1


class ModelFormatError(ValueError):
    pass


def _payload(tensors: dict) -> str:
    return json.dumps(tensors, separators=(",", ":"))


def dumps(params: ModelParams) -> str:
    tensors = {}
    for name in TENSOR_NAMES:
        t = params.tensors[name]
        tensors[name] = {"shape": list(t.shape), "data": [float(v) for v in t.ravel()]}
    doc = {
        "format": FORMAT,
        "version": VERSION,
        "hyperparameters": {"W": params.W, "K": params.K, "hidden": params.hidden,
                            "epsilon": params.epsilon},
        "standardization": {"mean": params.mean, "std": params.std},
        "checksum": hashlib.sha256(_payload(tensors).encode()).hexdigest(),
        "tensors": tensors,
    }
    return json.dumps(doc, indent=1) + "\n"


def loads(text: str) -> ModelParams:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"not a model file: {exc}") from exc
    if doc.get("format") != FORMAT:
        raise ModelFormatError("not a model file")
    if doc.get("version") != VERSION:
        raise ModelFormatError(f"unsupported model format version {doc.get('version')!r}")
    hp, st, tensors = doc["hyperparameters"], doc["standardization"], doc["tensors"]
    shell = ModelParams(int(hp["W"]), int(hp["K"]), int(hp["hidden"]), float(hp["epsilon"]),
                        float(st["mean"]), float(st["std"]))
    arrays = {}
    for name, shape in shell.shapes().items():
        if name not in tensors:
            raise ModelFormatError(f"missing tensor {name}")
        data = tensors[name]["data"]
        if list(tensors[name]["shape"]) != list(shape) or len(data) != int(np.prod(shape)):
            raise ModelFormatError(f"tensor {name}: expected shape {shape}, got "
                                   f"{tensors[name]['shape']} with {len(data)} values")
        arrays[name] = np.array(data, dtype=np.float64).reshape(shape)
    if hashlib.sha256(_payload(tensors).encode()).hexdigest() != doc.get("checksum"):
        raise ModelFormatError("checksum mismatch")
    return shell.with_tensors(arrays)


def save(path: str | Path, params: ModelParams) -> None:
    Path(path).write_text(dumps(params))


def load(path: str | Path) -> ModelParams:
    return loads(Path(path).read_text())
