"""Single-file parameter checkpoints.

Format: an 8-byte magic, a little-endian uint64 header length, a JSON
header and a payload of concatenated little-endian float32 arrays.  The
header carries the model config, seed, step, a name -> shape/offset
table, an optional optimizer-state section and a sha256 of the payload.
"""

from __future__ import annotations

import hashlib
import json
import struct
from pathlib import Path

import numpy as np
import torch

from .errors import IntegrityError
from .model import ModelConfig, MultiResChangeNet

MAGIC = b"BSCKPT1\n"
FORMAT_NAME = "burnscar-checkpoint-v1"


def _param_arrays(model) -> dict[str, np.ndarray]:
    # named_parameters deduplicates shared (siamese) storage.
    return {
        name: p.detach().cpu().numpy().astype("<f4")
        for name, p in model.named_parameters()
    }


def _optimizer_arrays(model, optimizer) -> tuple[dict[str, np.ndarray], dict, dict]:
    names = {id(p): name for name, p in model.named_parameters()}
    arrays = {}
    steps = {}
    for p, state in optimizer.state.items():
        name = names.get(id(p))
        if name is None or not state:
            continue
        arrays[f"{name}.exp_avg"] = state["exp_avg"].detach().cpu().numpy().astype("<f4")
        arrays[f"{name}.exp_avg_sq"] = (
            state["exp_avg_sq"].detach().cpu().numpy().astype("<f4")
        )
        steps[name] = float(state["step"])
    group = optimizer.param_groups[0]
    hyper = {
        "lr": group["lr"],
        "betas": list(group["betas"]),
        "eps": group["eps"],
        "weight_decay": group.get("weight_decay", 0.0),
    }
    return arrays, steps, hyper


def save_checkpoint(
    path,
    model,
    seed: int = 0,
    step: int = 0,
    optimizer=None,
    extra: dict | None = None,
) -> None:
    """Write model (and optionally optimizer) state to a checkpoint file."""
    params = _param_arrays(model)
    opt_section = None
    opt_arrays = {}
    if optimizer is not None:
        opt_arrays, steps, hyper = _optimizer_arrays(model, optimizer)
        opt_section = {"kind": "adam", "steps": steps, "hyper": hyper, "arrays": []}

    payload = bytearray()

    def _append(table: list, name: str, arr: np.ndarray) -> None:
        raw = np.ascontiguousarray(arr, dtype="<f4").tobytes()
        table.append(
            {
                "name": name,
                "shape": list(arr.shape),
                "offset": len(payload),
                "nbytes": len(raw),
            }
        )
        payload.extend(raw)

    table: list = []
    for name in sorted(params):
        _append(table, name, params[name])
    if opt_section is not None:
        for name in sorted(opt_arrays):
            _append(opt_section["arrays"], name, opt_arrays[name])

    header = {
        "format": FORMAT_NAME,
        "config": model.config.to_dict(),
        "seed": seed,
        "step": step,
        "arrays": table,
        "optimizer": opt_section,
        "payload_sha256": hashlib.sha256(bytes(payload)).hexdigest(),
        "extra": extra or {},
    }
    blob = json.dumps(header).encode("utf-8")
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<Q", len(blob)))
        f.write(blob)
        f.write(bytes(payload))


def _read_container(path) -> tuple[dict, bytes]:
    path = Path(path)
    raw = path.read_bytes()
    if len(raw) < len(MAGIC) + 8 or raw[: len(MAGIC)] != MAGIC:
        raise IntegrityError(f"{path}: not a checkpoint file")
    (hlen,) = struct.unpack_from("<Q", raw, len(MAGIC))
    start = len(MAGIC) + 8
    if len(raw) < start + hlen:
        raise IntegrityError(f"{path}: truncated header")
    try:
        header = json.loads(raw[start : start + hlen].decode("utf-8"))
    except (json.JSONDecodeError, UnicodeDecodeError) as e:
        raise IntegrityError(f"{path}: unparseable header ({e})") from e
    if header.get("format") != FORMAT_NAME:
        raise IntegrityError(f"{path}: unknown format {header.get('format')!r}")
    payload = raw[start + hlen :]
    if hashlib.sha256(payload).hexdigest() != header["payload_sha256"]:
        raise IntegrityError(f"{path}: payload checksum mismatch")
    return header, payload


def _extract(table: list, payload: bytes) -> dict[str, np.ndarray]:
    out = {}
    for entry in table:
        arr = np.frombuffer(
            payload, dtype="<f4", count=entry["nbytes"] // 4, offset=entry["offset"]
        )
        out[entry["name"]] = arr.reshape(entry["shape"]).copy()
    return out


def load_checkpoint(path) -> dict:
    """Read a checkpoint into plain numpy arrays plus metadata."""
    header, payload = _read_container(path)
    out = {
        "config": ModelConfig.from_dict(header["config"]),
        "seed": header["seed"],
        "step": header["step"],
        "params": _extract(header["arrays"], payload),
        "optimizer": None,
        "extra": header.get("extra", {}),
    }
    if header.get("optimizer"):
        opt = header["optimizer"]
        out["optimizer"] = {
            "kind": opt["kind"],
            "steps": opt["steps"],
            "hyper": opt["hyper"],
            "arrays": _extract(opt["arrays"], payload),
        }
    return out


def load_model(path) -> tuple[MultiResChangeNet, dict]:
    """Rebuild the model a checkpoint describes and load its weights."""
    ckpt = load_checkpoint(path)
    model = MultiResChangeNet(ckpt["config"])
    params = dict(model.named_parameters())
    missing = set(params) - set(ckpt["params"])
    extra_names = set(ckpt["params"]) - set(params)
    if missing or extra_names:
        raise IntegrityError(
            f"{path}: parameter names do not match model "
            f"(missing {sorted(missing)[:3]}, unexpected {sorted(extra_names)[:3]})"
        )
    with torch.no_grad():
        for name, p in params.items():
            arr = ckpt["params"][name]
            if tuple(arr.shape) != tuple(p.shape):
                raise IntegrityError(
                    f"{path}: shape mismatch for {name}: {arr.shape} vs {tuple(p.shape)}"
                )
            p.copy_(torch.from_numpy(arr))
    return model, ckpt


def restore_optimizer(optimizer, model, opt_state: dict) -> None:
    """Load a saved optimizer section back into a torch Adam instance."""
    by_name = dict(model.named_parameters())
    for name, p in by_name.items():
        key_avg = f"{name}.exp_avg"
        if key_avg not in opt_state["arrays"]:
            continue
        optimizer.state[p] = {
            "step": torch.tensor(float(opt_state["steps"][name])),
            "exp_avg": torch.from_numpy(opt_state["arrays"][key_avg]).to(p.dtype),
            "exp_avg_sq": torch.from_numpy(
                opt_state["arrays"][f"{name}.exp_avg_sq"]
            ).to(p.dtype),
        }
