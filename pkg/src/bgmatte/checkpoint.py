"""Self-describing checkpoint archive.

Layout: a compact JSON header (format tag, config echo, array directory),
a single NUL separator byte, then the raw little-endian array payload.
Array names are sorted and the JSON is canonicalized, so writing the same
state twice produces byte-identical files.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Mapping

import numpy as np

from .errors import CheckpointError

FORMAT_TAG = "bgmatte-checkpoint"
FORMAT_VERSION = 1

_SEPARATOR = b"\x00"
_DTYPES = {"<f4", "<f8", "<i4", "<i8", "<u1", "<u8", "|u1", "|b1"}


def _canonical_dtype(arr: np.ndarray) -> str:
    dt = arr.dtype.newbyteorder("<") if arr.dtype.byteorder == ">" else arr.dtype
    code = dt.str
    if code not in _DTYPES:
        raise CheckpointError(f"unsupported array dtype {arr.dtype}")
    return code


def save_checkpoint(path: str | Path, config: dict, arrays: Mapping[str, np.ndarray]) -> None:
    """Write config plus named arrays. `config` must be JSON-serializable."""
    entries = []
    blobs = []
    offset = 0
    for name in sorted(arrays):
        arr = np.asarray(arrays[name])
        code = _canonical_dtype(arr)
        # ascontiguousarray promotes 0-dim to 1-dim, so record the shape first.
        blob = np.ascontiguousarray(arr).astype(code, copy=False).tobytes()
        entries.append(
            {"name": name, "dtype": code, "shape": list(arr.shape), "offset": offset, "nbytes": len(blob)}
        )
        blobs.append(blob)
        offset += len(blob)
    header = {
        "format": FORMAT_TAG,
        "version": FORMAT_VERSION,
        "config": config,
        "arrays": entries,
    }
    header_bytes = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(header_bytes)
        fh.write(_SEPARATOR)
        for blob in blobs:
            fh.write(blob)


def load_checkpoint(path: str | Path) -> tuple[dict, dict[str, np.ndarray]]:
    """Read a checkpoint back as (config, {name: array})."""
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from exc
    sep = data.find(_SEPARATOR)
    if sep < 0:
        raise CheckpointError(f"{path} is not a checkpoint archive (no header separator)")
    try:
        header = json.loads(data[:sep].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"{path} has a corrupt header: {exc}") from exc
    if header.get("format") != FORMAT_TAG:
        raise CheckpointError(f"{path} has format tag {header.get('format')!r}, expected {FORMAT_TAG!r}")
    if header.get("version") != FORMAT_VERSION:
        raise CheckpointError(f"{path} has unsupported version {header.get('version')!r}")
    payload = data[sep + 1 :]
    arrays: dict[str, np.ndarray] = {}
    for entry in header["arrays"]:
        start, nbytes = entry["offset"], entry["nbytes"]
        if start + nbytes > len(payload):
            raise CheckpointError(f"{path} payload truncated at array {entry['name']!r}")
        arr = np.frombuffer(payload[start : start + nbytes], dtype=np.dtype(entry["dtype"]))
        arrays[entry["name"]] = arr.reshape(entry["shape"]).copy()
    return header["config"], arrays
