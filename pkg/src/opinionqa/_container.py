"""Deterministic single-file container: magic line, JSON header, raw arrays.

Layout::

    <magic>\\n
    <header byte length, decimal>\\n
    <header JSON, sorted keys>
    <array bytes, little-endian, in header order>

The header lists every array's name, dtype and shape so files are
self-describing and round-trip bit-exactly.
"""

from __future__ import annotations

import json

import numpy as np


class ContainerError(ValueError):
    """Raised when a file is truncated, has the wrong magic or bad header."""


def write_container(path: str, magic: str, meta: dict, arrays: dict[str, np.ndarray]) -> None:
    layout = []
    blobs = []
    for name, arr in arrays.items():
        a = np.asarray(arr)
        a = np.ascontiguousarray(a, dtype=a.dtype.newbyteorder("<"))
        layout.append({"name": name, "dtype": a.dtype.str, "shape": list(a.shape)})
        blobs.append(a.tobytes())
    header = json.dumps({"meta": meta, "arrays": layout}, sort_keys=True, separators=(",", ":")).encode()
    with open(path, "wb") as fh:
        fh.write(magic.encode() + b"\n")
        fh.write(str(len(header)).encode() + b"\n")
        fh.write(header)
        for b in blobs:
            fh.write(b)


def read_container(path: str, magic: str) -> tuple[dict, dict[str, np.ndarray]]:
    with open(path, "rb") as fh:
        raw = fh.read()
    try:
        first, rest = raw.split(b"\n", 1)
        if first.decode() != magic:
            raise ContainerError(f"{path}: not a {magic} file")
        size, rest = rest.split(b"\n", 1)
        n = int(size)
        header = json.loads(rest[:n].decode())
        body = memoryview(rest)[n:]
        arrays = {}
        offset = 0
        for spec in header["arrays"]:
            dt = np.dtype(spec["dtype"])
            count = int(np.prod(spec["shape"], dtype=np.int64))
            nbytes = count * dt.itemsize
            if offset + nbytes > len(body):
                raise ContainerError(f"{path}: truncated array {spec['name']}")
            arrays[spec["name"]] = np.frombuffer(body[offset:offset + nbytes], dtype=dt).reshape(spec["shape"]).copy()
            offset += nbytes
        if offset != len(body):
            raise ContainerError(f"{path}: {len(body) - offset} trailing bytes")
    except ContainerError:
        raise
    except (ValueError, KeyError, TypeError, UnicodeDecodeError) as exc:
        raise ContainerError(f"{path}: corrupt file ({exc})") from exc
    return header["meta"], arrays
