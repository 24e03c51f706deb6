from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict

import numpy as np
import orjson

from core.dynamics.model import DynamicsModel
from core.errors import CheckpointError

MAGIC = b"FCDL"
VERSION = 1


@dataclass
class Checkpoint:
    header: Dict[str, Any]
    blobs: Dict[str, np.ndarray]


def model_header(model: DynamicsModel, config_hash: str, step: int, episode: int, seed: int = 0) -> Dict[str, Any]:
    return {
        "seed": seed,
        "method": model.method,
        "layout": model.layout.signature(),
        "K": model.k,
        "D": model.cfg.code_dim,
        "config_hash": config_hash,
        "step": step,
        "episode": episode,
    }


def encode_checkpoint(header: Dict[str, Any], blobs: Dict[str, np.ndarray]) -> bytes:
    head = orjson.dumps(header, option=orjson.OPT_SORT_KEYS)
    parts = [MAGIC, struct.pack("<II", VERSION, len(head)), head, struct.pack("<I", len(blobs))]
    for name in sorted(blobs):
        arr = np.ascontiguousarray(blobs[name], dtype="<f8")
        raw = name.encode("utf-8")
        parts.append(struct.pack("<H", len(raw)) + raw)
        parts.append(struct.pack("<B", arr.ndim) + struct.pack(f"<{arr.ndim}I", *arr.shape))
        parts.append(arr.tobytes())
    return b"".join(parts)


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def read(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise CheckpointError(f"checkpoint truncated at byte {self.pos} (wanted {n} more)")
        out = self.data[self.pos : self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str) -> tuple:
        return struct.unpack(fmt, self.read(struct.calcsize(fmt)))


def decode_checkpoint(data: bytes) -> Checkpoint:
    r = _Reader(data)
    if r.read(4) != MAGIC:
        raise CheckpointError("not a checkpoint: bad magic")
    version, head_len = r.unpack("<II")
    if version != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    try:
        header = orjson.loads(r.read(head_len))
    except orjson.JSONDecodeError as err:
        raise CheckpointError(f"corrupt checkpoint header: {err}") from err
    (count,) = r.unpack("<I")
    blobs: Dict[str, np.ndarray] = {}
    for _ in range(count):
        (name_len,) = r.unpack("<H")
        name = r.read(name_len).decode("utf-8")
        (ndim,) = r.unpack("<B")
        shape = r.unpack(f"<{ndim}I") if ndim else ()
        size = int(np.prod(shape)) if shape else 1
        blobs[name] = np.frombuffer(r.read(8 * size), dtype="<f8").reshape(shape).astype(np.float64)
    if r.pos != len(data):
        raise CheckpointError(f"{len(data) - r.pos} trailing bytes after the last blob")
    return Checkpoint(header, blobs)


def save_checkpoint(
    path: str | Path, model: DynamicsModel, config_hash: str, step: int = 0, episode: int = 0, seed: int = 0
) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_bytes(encode_checkpoint(model_header(model, config_hash, step, episode, seed), model.state_dict()))
    tmp.replace(path)
    return path


def load_checkpoint(path: str | Path) -> Checkpoint:
    try:
        data = Path(path).read_bytes()
    except OSError as err:
        raise CheckpointError(f"cannot read checkpoint {path}: {err}") from err
    return decode_checkpoint(data)


def restore_model(ckpt: Checkpoint, model: DynamicsModel) -> DynamicsModel:
    """Load blobs into a freshly built model after checking layout, method and codebook shape."""
    h = ckpt.header
    model.layout.require_same(h.get("layout", ""))
    if h.get("method") != model.method or h.get("K") != model.k or h.get("D") != model.cfg.code_dim:
        raise CheckpointError(
            f"checkpoint is {h.get('method')} K={h.get('K')} D={h.get('D')}, "
            f"model is {model.method} K={model.k} D={model.cfg.code_dim}"
        )
    try:
        model.load_state_dict(ckpt.blobs)
    except (KeyError, ValueError) as err:
        raise CheckpointError(f"checkpoint blobs do not fit the model: {err}") from err
    return model
