"""Python side of the model interfaces.

Reads and writes CTNS tensors, serves the scorer subprocess protocol with a
pluggable model, and loads datasets written by ``mapupdate-cli sample-pairs``.

Usage:
    mapupdate_adapter.py serve [--model mock | --model module:function]
    mapupdate_adapter.py check-dataset DIR
"""

from __future__ import annotations

import argparse
import importlib
import json
import struct
import sys
from pathlib import Path
from typing import BinaryIO, Callable, Iterator

import numpy as np

MAGIC = b"CTNS"
VERSION = 1
HEADER = struct.Struct("<4s5I")
FRAME_LEN = struct.Struct("<Q")
MAX_FRAME = 1 << 34


class ProtocolError(Exception):
    pass


def encode_ctns(t: np.ndarray, scale_factor: int = 1) -> bytes:
    """(H, W, C) float array to CTNS bytes."""
    if t.ndim == 2:
        t = t[:, :, None]
    if t.ndim != 3:
        raise ValueError("tensor must be (H, W, C)")
    h, w, c = t.shape
    body = np.ascontiguousarray(t, dtype="<f4").tobytes()
    return HEADER.pack(MAGIC, VERSION, h, w, c, scale_factor) + body


def decode_ctns(data: bytes) -> tuple[np.ndarray, int]:
    """CTNS bytes to ((H, W, C) float32 array, scale_factor)."""
    if len(data) < HEADER.size:
        raise ProtocolError("truncated CTNS header")
    magic, version, h, w, c, s = HEADER.unpack_from(data)
    if magic != MAGIC:
        raise ProtocolError("not a CTNS tensor")
    if version != VERSION:
        raise ProtocolError(f"unsupported CTNS version {version}")
    n = h * w * c
    if len(data) != HEADER.size + 4 * n:
        raise ProtocolError("CTNS payload size does not match its header")
    arr = np.frombuffer(data, dtype="<f4", count=n, offset=HEADER.size).reshape(h, w, c)
    return arr.astype(np.float32), s


def read_ctns(path: str | Path) -> tuple[np.ndarray, int]:
    return decode_ctns(Path(path).read_bytes())


def write_ctns(path: str | Path, t: np.ndarray, scale_factor: int = 1) -> None:
    Path(path).write_bytes(encode_ctns(t, scale_factor))


def frame(payload: bytes) -> bytes:
    return FRAME_LEN.pack(len(payload)) + payload


def read_frame(stream: BinaryIO) -> bytes | None:
    """Next framed payload, or None at a clean end of stream."""
    head = stream.read(FRAME_LEN.size)
    if not head:
        return None
    if len(head) != FRAME_LEN.size:
        raise EOFError("truncated frame length")
    (n,) = FRAME_LEN.unpack(head)
    if n > MAX_FRAME:
        raise EOFError("frame too large")
    body = stream.read(n)
    if len(body) != n:
        raise EOFError("truncated frame body")
    return body


Model = Callable[[np.ndarray], np.ndarray]


def mock_model(example: np.ndarray) -> np.ndarray:
    """Per-pixel 1 - mean |new - old| over RGB; same rule as the C++ mock."""
    diff = np.abs(example[:, :, 3:6] - example[:, :, 0:3]).mean(axis=2)
    return np.clip(1.0 - diff, 0.0, 1.0)[:, :, None]


def handle_request(payload: bytes, model: Model) -> bytes:
    """One request payload to one response payload (CTNS or error text)."""
    try:
        example, _ = decode_ctns(payload)
        if example.shape[2] != 7:
            raise ProtocolError(f"expected 7 channels, got {example.shape[2]}")
        if not np.any(example[:, :, 6] > 0):
            raise ProtocolError("mask is empty")
        out = np.asarray(model(example), dtype=np.float32)
        if out.ndim == 2:
            out = out[:, :, None]
        if out.shape != (example.shape[0], example.shape[1], 1):
            raise ProtocolError("model output has the wrong shape")
        return encode_ctns(np.clip(out, 0.0, 1.0))
    except Exception as e:  # every failure becomes an error frame
        return ("error: " + str(e)).encode("utf-8")


def serve(model: Model, stdin: BinaryIO, stdout: BinaryIO) -> int:
    """Answers requests in order until stdin closes."""
    while True:
        try:
            payload = read_frame(stdin)
        except EOFError as e:
            stdout.write(frame(("error: " + str(e)).encode("utf-8")))
            stdout.flush()
            return 1
        if payload is None:
            return 0
        stdout.write(frame(handle_request(payload, model)))
        stdout.flush()


def load_model(spec: str) -> Model:
    if spec == "mock":
        return mock_model
    module, _, attr = spec.partition(":")
    if not attr:
        raise ValueError("model must be 'mock' or 'module:function'")
    return getattr(importlib.import_module(module), attr)


def iter_dataset(directory: str | Path) -> Iterator[tuple[np.ndarray, dict]]:
    """(7-channel example, index record) pairs in index order."""
    d = Path(directory)
    with open(d / "index.jsonl", encoding="utf-8") as f:
        for line in f:
            if line.strip():
                rec = json.loads(line)
                t, _ = read_ctns(d / rec["file"])
                yield t, rec


def check_dataset(directory: str | Path) -> dict:
    counts = {"count": 0, "matching": 0, "mismatched": 0, "random_window": 0}
    for t, rec in iter_dataset(directory):
        if t.shape[2] != 7:
            raise ProtocolError(f"{rec['file']}: expected 7 channels")
        if float(t.min()) < 0.0 or float(t.max()) > 1.0:
            raise ProtocolError(f"{rec['file']}: values outside [0, 1]")
        masked_out = t[:, :, 6] == 0
        if np.any(t[masked_out][:, :6] != 0):
            raise ProtocolError(f"{rec['file']}: imagery not zeroed outside the mask")
        counts["count"] += 1
        counts[rec["label"]] += 1
        if rec["provenance"] == "random-window":
            counts["random_window"] += 1
    return counts


def main(argv: list[str] | None = None) -> int:
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = ap.add_subparsers(dest="cmd", required=True)
    s = sub.add_parser("serve", help="serve the scorer protocol on stdin/stdout")
    s.add_argument("--model", default="mock")
    c = sub.add_parser("check-dataset", help="validate a sample-pairs dataset")
    c.add_argument("directory")
    args = ap.parse_args(argv)
    if args.cmd == "serve":
        return serve(load_model(args.model), sys.stdin.buffer, sys.stdout.buffer)
    print(json.dumps(check_dataset(args.directory)))
    return 0


if __name__ == "__main__":
    sys.exit(main())
