"""Versioned checkpoint container.

Layout: an ASCII magic line, one JSON header line (layer specs per model,
caller metadata, ordered block directory), then the raw little-endian
float32 parameter/buffer blocks concatenated in directory order.
"""
from __future__ import annotations

import json
from dataclasses import asdict

import numpy as np

from ..errors import CheckpointError
from .core import LayerSpec, MlpModel

MAGIC = b"SSHFD-CKPT/1\n"


def save_checkpoint(path, models: dict[str, MlpModel], meta: dict | None = None):
    blocks = []
    payload = []
    for mname, model in models.items():
        for pname, t in model.parameters():
            arr = np.asarray(t.value, dtype="<f4")
            blocks.append({"model": mname, "name": pname, "shape": list(arr.shape)})
            payload.append(arr.tobytes())
        for bname, arr in model.buffers():
            arr = np.asarray(arr, dtype="<f4")
            blocks.append({"model": mname, "name": bname, "shape": list(arr.shape)})
            payload.append(arr.tobytes())
    header = {
        "models": {name: [asdict(s) for s in m.specs] for name, m in models.items()},
        "meta": meta or {},
        "blocks": blocks,
    }
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(json.dumps(header, sort_keys=True).encode() + b"\n")
        for chunk in payload:
            f.write(chunk)


def load_checkpoint(path) -> tuple[dict[str, MlpModel], dict]:
    with open(path, "rb") as f:
        magic = f.readline()
        if magic != MAGIC:
            raise CheckpointError(f"bad checkpoint magic {magic!r}")
        try:
            header = json.loads(f.readline().decode())
        except (UnicodeDecodeError, json.JSONDecodeError) as e:
            raise CheckpointError(f"unreadable checkpoint header: {e}") from e
        body = f.read()

    models = {}
    for name, specs in header.get("models", {}).items():
        models[name] = MlpModel([LayerSpec(**s) for s in specs], seed=0)

    offset = 0
    for block in header.get("blocks", []):
        shape = tuple(block["shape"])
        n = int(np.prod(shape)) if shape else 1
        nbytes = n * 4
        if offset + nbytes > len(body):
            raise CheckpointError("checkpoint truncated")
        arr = np.frombuffer(body, dtype="<f4", count=n, offset=offset).reshape(shape)
        offset += nbytes
        model = models.get(block["model"])
        if model is None:
            raise CheckpointError(f"block references unknown model {block['model']!r}")
        name = block["name"]
        params = dict(model.parameters())
        if name in params:
            if params[name].value.shape != shape:
                raise CheckpointError(f"shape mismatch for {name}")
            params[name].value = arr.copy()
        else:
            try:
                model.set_buffer(name, arr.copy())
            except (IndexError, ValueError, AttributeError) as e:
                raise CheckpointError(f"unknown block {name!r}") from e
    if offset != len(body):
        raise CheckpointError("trailing bytes in checkpoint")
    return models, header.get("meta", {})
