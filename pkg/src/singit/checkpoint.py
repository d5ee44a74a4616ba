"""
Versioned checkpoint container.

Layout::

    b"SINGITCK"                 magic, 8 bytes
    uint32 LE                   format version
    uint64 LE                   header length in bytes
    header                      UTF-8 JSON, sorted keys, compact separators
    tensor data                 little-endian float32, concatenated in header order

The header holds the model config, training step, free-form metadata and an
index ``[{"name", "shape", "offset", "nbytes"}, ...]`` with offsets relative
to the start of the tensor data. Model tensors are keyed by their layer path
(``encoder.convs.0.0.weight``); Adam moments, when present, live under
``optim/<param path>/exp_avg`` and ``.../exp_avg_sq``. Writing is a pure
function of the stored values, so save -> load -> save is byte-identical.
"""
from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np
import torch

from .errors import CheckpointError
from .model import ModelConfig, SingingVC

MAGIC = b"SINGITCK"
VERSION = 1


def _model_tensors(model: SingingVC) -> dict[str, torch.Tensor]:
    # num_batches_tracked is unused with a fixed BN momentum
    return {k: v for k, v in model.state_dict().items() if not k.endswith("num_batches_tracked")}


def _optimizer_tensors(model: SingingVC, optimizer) -> tuple[dict[str, torch.Tensor], dict]:
    tensors, steps = {}, {}
    names = {id(p): n for n, p in model.named_parameters()}
    for group in optimizer.param_groups:
        for p in group["params"]:
            state = optimizer.state.get(p)
            if not state:
                continue
            name = names[id(p)]
            tensors[f"optim/{name}/exp_avg"] = state["exp_avg"]
            tensors[f"optim/{name}/exp_avg_sq"] = state["exp_avg_sq"]
            steps[name] = int(state["step"])
    return tensors, steps


def save_checkpoint(path, model: SingingVC, optimizer=None, metadata: dict | None = None) -> None:
    tensors = _model_tensors(model)
    header = {
        "format": "singit-checkpoint",
        "version": VERSION,
        "config": model.cfg.to_dict(),
        "step": int(model.step),
        "metadata": metadata or {},
    }
    if optimizer is not None:
        opt_tensors, opt_steps = _optimizer_tensors(model, optimizer)
        tensors.update(opt_tensors)
        header["optimizer"] = {"steps": opt_steps, "param_groups": _group_hparams(optimizer)}

    index, blobs, offset = [], [], 0
    for name, t in tensors.items():
        data = t.detach().cpu().numpy().astype("<f4", copy=False).tobytes()
        index.append({"name": name, "shape": list(t.shape), "offset": offset, "nbytes": len(data)})
        blobs.append(data)
        offset += len(data)
    header["tensors"] = index

    raw_header = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<IQ", VERSION, len(raw_header)))
        fh.write(raw_header)
        for blob in blobs:
            fh.write(blob)
    tmp.replace(path)


def _group_hparams(optimizer) -> list[dict]:
    return [
        {k: (list(v) if isinstance(v, tuple) else v) for k, v in g.items() if k in ("lr", "betas", "eps", "weight_decay")}
        for g in optimizer.param_groups
    ]


def read_checkpoint(path) -> tuple[dict, dict[str, np.ndarray]]:
    """Parse a checkpoint into its header and a name -> float32 array mapping."""
    raw = Path(path).read_bytes()
    if raw[:8] != MAGIC:
        raise CheckpointError(f"{path}: not a singit checkpoint")
    version, header_len = struct.unpack_from("<IQ", raw, 8)
    if version != VERSION:
        raise CheckpointError(f"{path}: unsupported checkpoint version {version}")
    start = 8 + struct.calcsize("<IQ")
    try:
        header = json.loads(raw[start : start + header_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"{path}: corrupt header ({exc})") from None
    data = memoryview(raw)[start + header_len :]
    arrays = {}
    for entry in header["tensors"]:
        lo, hi = entry["offset"], entry["offset"] + entry["nbytes"]
        if hi > len(data):
            raise CheckpointError(f"{path}: truncated tensor {entry['name']}")
        arr = np.frombuffer(data[lo:hi], dtype="<f4").reshape(entry["shape"])
        arrays[entry["name"]] = arr.copy()
    return header, arrays


def load_checkpoint(path, optimizer_factory=None):
    """Rebuild the model stored at ``path``.

    Returns ``(model, header)``, or ``(model, optimizer, header)`` when
    ``optimizer_factory`` (a callable taking the model's parameters) is given;
    the optimizer state is then restored as well.
    """
    header, arrays = read_checkpoint(path)
    model = SingingVC(ModelConfig(**header["config"]))
    state = model.state_dict()
    missing = [k for k in _model_tensors(model) if k not in arrays]
    if missing:
        raise CheckpointError(f"{path}: missing tensors {missing[:3]}")
    for name in _model_tensors(model):
        if tuple(arrays[name].shape) != tuple(state[name].shape):
            raise CheckpointError(f"{path}: shape mismatch for {name}")
        state[name] = torch.from_numpy(arrays[name])
    model.load_state_dict(state)
    model.step = int(header["step"])
    if optimizer_factory is None:
        return model, header

    optimizer = optimizer_factory(model.parameters())
    opt_header = header.get("optimizer")
    if opt_header:
        params = dict(model.named_parameters())
        for name, step in opt_header["steps"].items():
            optimizer.state[params[name]] = {
                "step": torch.tensor(float(step)),
                "exp_avg": torch.from_numpy(arrays[f"optim/{name}/exp_avg"]),
                "exp_avg_sq": torch.from_numpy(arrays[f"optim/{name}/exp_avg_sq"]),
            }
    return model, optimizer, header
