"""Versioned binary checkpoints for trained fault classifiers.

Layout: 8-byte magic, little-endian uint64 header length, UTF-8 JSON
header (architecture description, fault code, epoch, validation loss,
free-form extras, and the parameter/buffer manifest), then the raw
little-endian parameter blobs in manifest order. Round-trips are
bit-exact.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from ..errors import BadCheckpoint
from .network import FaultNet

MAGIC = b"TDCK0001"


def save_checkpoint(path, net: FaultNet, fault_code: str, epoch: int,
                    val_loss: float, extra: dict | None = None) -> None:
    params = net.params()
    buffers = net.eval_buffers()
    arrays = [p.value for p in params] + buffers
    manifest = []
    for i, arr in enumerate(arrays):
        kind = "param" if i < len(params) else "buffer"
        manifest.append({
            "kind": kind,
            "shape": list(arr.shape),
            "dtype": arr.dtype.str,  # byte-order explicit, e.g. '<f4'
        })
    header = {
        "format": "traindiag-checkpoint",
        "version": 1,
        "fault_code": fault_code,
        "epoch": int(epoch),
        "val_loss": float(val_loss),
        "arch": net.describe(),
        "extra": extra or {},
        "arrays": manifest,
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<Q", len(blob)))
        fh.write(blob)
        for arr in arrays:
            fh.write(np.ascontiguousarray(arr, dtype=np.dtype(arr.dtype.str).newbyteorder("<")).tobytes())


def load_checkpoint(path) -> tuple[FaultNet, dict]:
    """Rebuild the network and return (net, header metadata)."""
    path = Path(path)
    raw = path.read_bytes()
    if len(raw) < len(MAGIC) + 8 or raw[: len(MAGIC)] != MAGIC:
        raise BadCheckpoint(f"{path}: not a traindiag checkpoint")
    (hlen,) = struct.unpack("<Q", raw[len(MAGIC): len(MAGIC) + 8])
    start = len(MAGIC) + 8
    try:
        header = json.loads(raw[start: start + hlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise BadCheckpoint(f"{path}: malformed header ({exc})") from exc
    if header.get("format") != "traindiag-checkpoint" or header.get("version") != 1:
        raise BadCheckpoint(f"{path}: unsupported checkpoint format/version")
    net = FaultNet.from_description(header["arch"])
    params = net.params()
    buffers = net.eval_buffers()
    manifest = header["arrays"]
    if len(manifest) != len(params) + len(buffers):
        raise BadCheckpoint(f"{path}: array manifest does not match the architecture")
    offset = start + hlen
    arrays = []
    for entry in manifest:
        dt = np.dtype(entry["dtype"])
        count = int(np.prod(entry["shape"])) if entry["shape"] else 1
        nbytes = count * dt.itemsize
        if offset + nbytes > len(raw):
            raise BadCheckpoint(
                f"{path}: truncated parameter blob (need {nbytes} bytes at offset {offset}, "
                f"file has {len(raw)})")
        arr = np.frombuffer(raw, dtype=dt, count=count, offset=offset).reshape(entry["shape"]).copy()
        arrays.append(arr)
        offset += nbytes
    for p, arr in zip(params, arrays[: len(params)]):
        if p.value.shape != arr.shape:
            raise BadCheckpoint(f"{path}: shape mismatch for {p.name}")
        p.value = arr
        p.grad = np.zeros_like(arr)
    net.set_eval_buffers(arrays[len(params):])
    return net, header
