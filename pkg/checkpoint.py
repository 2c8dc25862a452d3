# Checkpoint layout (all integers little-endian):
#   8 bytes  magic "SGNNCKPT"
#   u8       format version
#   u32      metadata length, then that many bytes of UTF-8 JSON
#   u32      tensor count, then per tensor:
#              u16 name length, name (UTF-8), u32 rows, u32 cols,
#              rows*cols float64 values, row-major

import csv
import io
import json
import struct
from pathlib import Path
from typing import Any, Dict, Optional, Tuple, Union

import numpy as np

from errors import IncompatibleError
from metrics import MetricsRecord
from models import Arch, ModelParams
from tensor import Tensor
from utils import atomic_write_bytes, atomic_write_text, say

MAGIC = b"SGNNCKPT"
VERSION = 1


def _pack_meta(params: ModelParams, extra: Optional[Dict[str, Any]]) -> bytes:
    meta = dict(extra or {})
    meta.update({
        "model": params.arch.tag,
        "in_dim": int(params.in_dim),
        "hidden_dim": int(params.hidden_dim),
        "sortpool_k": int(params.sortpool_k),
    })
    return json.dumps(meta, sort_keys=True, separators=(",", ":")).encode("utf-8")


def checkpoint_bytes(params: ModelParams, meta: Optional[Dict[str, Any]] = None) -> bytes:
    buf = bytearray()
    buf += MAGIC
    buf.append(VERSION)
    blob = _pack_meta(params, meta)
    buf += struct.pack("<I", len(blob))
    buf += blob
    buf += struct.pack("<I", len(params.tensors))
    for name, t in params.tensors.items():
        raw = name.encode("utf-8")
        rows, cols = t.shape
        buf += struct.pack("<H", len(raw))
        buf += raw
        buf += struct.pack("<II", rows, cols)
        buf += np.ascontiguousarray(t.data, dtype="<f8").tobytes()
    return bytes(buf)


def save_checkpoint(params: ModelParams, path: Union[str, Path], meta: Optional[Dict[str, Any]] = None) -> Path:
    path = Path(path)
    atomic_write_bytes(path, checkpoint_bytes(params, meta))
    say(f"💾 Saved {params.arch.tag} checkpoint ({len(params.tensors)} tensors) to {path}")
    return path


class _Reader:
    def __init__(self, payload: bytes, path: str):
        self.payload = payload
        self.pos = 0
        self.path = path

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.payload):
            raise IncompatibleError(f"{self.path}: checkpoint is truncated")
        chunk = self.payload[self.pos:self.pos + n]
        self.pos += n
        return chunk

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def parse_checkpoint(payload: bytes, source: str = "<bytes>") -> Tuple[ModelParams, Dict[str, Any]]:
    r = _Reader(payload, source)
    if r.take(len(MAGIC)) != MAGIC:
        raise IncompatibleError(f"{source}: not a checkpoint (bad magic bytes)")
    (version,) = r.unpack("<B")
    if version != VERSION:
        raise IncompatibleError(f"{source}: checkpoint version {version}, this build reads {VERSION}")
    (meta_len,) = r.unpack("<I")
    try:
        meta = json.loads(r.take(meta_len).decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise IncompatibleError(f"{source}: unreadable checkpoint metadata ({e})") from None

    (count,) = r.unpack("<I")
    tensors: Dict[str, Tensor] = {}
    for _ in range(count):
        (name_len,) = r.unpack("<H")
        name = r.take(name_len).decode("utf-8")
        rows, cols = r.unpack("<II")
        values = np.frombuffer(r.take(8 * rows * cols), dtype="<f8").astype(np.float64)
        tensors[name] = Tensor(values.reshape(rows, cols), requires_grad=True, name=name)
    if r.pos != len(payload):
        raise IncompatibleError(f"{source}: {len(payload) - r.pos} trailing bytes after the tensor table")

    try:
        params = ModelParams(
            arch=Arch.parse(meta["model"]),
            in_dim=int(meta["in_dim"]),
            hidden_dim=int(meta["hidden_dim"]),
            tensors=tensors,
            sortpool_k=int(meta.get("sortpool_k", 0)),
        )
    except (KeyError, ValueError) as e:
        raise IncompatibleError(f"{source}: checkpoint metadata is incomplete ({e})") from None
    return params, meta


def load_checkpoint(path: Union[str, Path], expect: Optional[Union[str, Arch]] = None) -> Tuple[ModelParams, Dict[str, Any]]:
    path = Path(path)
    params, meta = parse_checkpoint(path.read_bytes(), str(path))
    if expect is not None and params.arch != Arch.parse(expect):
        raise IncompatibleError(f"{path} holds a {params.arch.tag} model, not {Arch.parse(expect).tag}")
    return params, meta


# ---------------- run outputs ----------------

def write_metrics(record: MetricsRecord, path: Union[str, Path], model: str, seed: int) -> Path:
    path = Path(path)
    text = json.dumps(record.to_json(model, seed), indent=2, sort_keys=True) + "\n"
    atomic_write_text(path, text)
    return path


def write_history(history, path: Union[str, Path]) -> Path:
    """Per-epoch CSV: epoch,loss,train_acc."""
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["epoch", "loss", "train_acc"])
    for rec in history.epochs:
        w.writerow([rec.epoch, repr(float(rec.train_loss)), repr(float(rec.train_accuracy))])
    path = Path(path)
    atomic_write_text(path, out.getvalue())
    return path


def write_scores(rows, path: Union[str, Path]) -> Path:
    """rows of (item, node, label, score)."""
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["item", "node", "label", "score"])
    for item, node, label, score in rows:
        w.writerow([int(item), int(node), int(label), repr(float(score))])
    path = Path(path)
    atomic_write_text(path, out.getvalue())
    return path


def write_egos(roots, labels, egos, path: Union[str, Path]) -> Path:
    """One row per ego: root,label,n_nodes,n_edges,nodes (parent ids in local order)."""
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["root", "label", "n_nodes", "n_edges", "nodes"])
    for root, label, ego in zip(roots, labels, egos):
        w.writerow([int(root), int(label), ego.graph.n_nodes, ego.graph.n_edges,
                    " ".join(str(int(v)) for v in ego.nodes)])
    path = Path(path)
    atomic_write_text(path, out.getvalue())
    return path
