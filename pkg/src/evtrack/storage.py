"""On-disk formats: TSR1 tensors, P6 PPM images, checkpoint directories.

TSR1 layout: magic 'TSR1', u8 dtype code (0=float32, 1=float64), u8 ndim,
two reserved zero bytes, ndim little-endian u32 extents, then raw
row-major little-endian scalars. Used for event frames, checkpoints and
feature dumps.

A checkpoint is a directory with ``manifest.txt`` (one "name shape dtype"
line per parameter, shape as comma-joined extents) plus one
``<name>.tsr`` file per parameter.
"""

from __future__ import annotations

import os
import struct
from pathlib import Path

import numpy as np

from .errors import ParseError

_MAGIC = b"TSR1"
_DTYPES = {0: np.dtype("<f4"), 1: np.dtype("<f8")}
_CODES = {np.dtype(np.float32): 0, np.dtype(np.float64): 1}


def write_tsr(path, arr: np.ndarray) -> None:
    arr = np.ascontiguousarray(arr)
    if arr.dtype not in _CODES:
        arr = arr.astype(np.float32)
    code = _CODES[arr.dtype]
    with open(path, "wb") as f:
        f.write(_MAGIC)
        f.write(struct.pack("<BBxx", code, arr.ndim))
        f.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
        f.write(arr.astype(_DTYPES[code], copy=False).tobytes(order="C"))


def read_tsr(path) -> np.ndarray:
    path = os.fspath(path)
    with open(path, "rb") as f:
        head = f.read(8)
        if len(head) < 8 or head[:4] != _MAGIC:
            raise ParseError(f"{path}: not a TSR1 file (bad magic)")
        code, ndim = head[4], head[5]
        if head[6:8] != b"\x00\x00":
            raise ParseError(f"{path}: reserved bytes not zero")
        if code not in _DTYPES:
            raise ParseError(f"{path}: unknown dtype code {code}")
        raw = f.read(4 * ndim)
        if len(raw) != 4 * ndim:
            raise ParseError(f"{path}: truncated extents")
        shape = struct.unpack(f"<{ndim}I", raw)
        dtype = _DTYPES[code]
        count = int(np.prod(shape)) if ndim else 1
        data = f.read()
        if len(data) != count * dtype.itemsize:
            raise ParseError(
                f"{path}: payload {len(data)} bytes, expected {count * dtype.itemsize}"
            )
        arr = np.frombuffer(data, dtype=dtype).reshape(shape)
        return arr.astype(dtype.newbyteorder("="), copy=True)


def write_ppm(path, img: np.ndarray) -> None:
    """P6 maxval-255 writer; img is [H,W,3] uint8."""
    img = np.asarray(img)
    if img.ndim != 3 or img.shape[2] != 3 or img.dtype != np.uint8:
        raise ParseError(f"write_ppm: need [H,W,3] uint8, got {img.shape} {img.dtype}")
    h, w = img.shape[:2]
    with open(path, "wb") as f:
        f.write(f"P6\n{w} {h}\n255\n".encode("ascii"))
        f.write(img.tobytes(order="C"))


def read_ppm(path) -> np.ndarray:
    path = os.fspath(path)
    with open(path, "rb") as f:
        data = f.read()
    # header: three whitespace-separated tokens after P6, then one byte
    if not data.startswith(b"P6"):
        raise ParseError(f"{path}: not a P6 PPM")
    fields = []
    i = 2
    while len(fields) < 3:
        while i < len(data) and data[i : i + 1].isspace():
            i += 1
        if i < len(data) and data[i : i + 1] == b"#":
            while i < len(data) and data[i] != 0x0A:
                i += 1
            continue
        j = i
        while j < len(data) and not data[j : j + 1].isspace():
            j += 1
        if j == i:
            raise ParseError(f"{path}: truncated PPM header")
        fields.append(data[i:j])
        i = j
    i += 1  # single whitespace after maxval
    try:
        w, h, maxval = (int(x) for x in fields)
    except ValueError:
        raise ParseError(f"{path}: non-numeric PPM header fields")
    if maxval != 255:
        raise ParseError(f"{path}: unsupported maxval {maxval}")
    payload = data[i : i + w * h * 3]
    if len(payload) != w * h * 3:
        raise ParseError(f"{path}: payload {len(payload)} bytes, expected {w * h * 3}")
    return np.frombuffer(payload, dtype=np.uint8).reshape(h, w, 3).copy()


# -- checkpoints ---------------------------------------------------------------


def save_checkpoint(dirpath, named_params) -> None:
    """Write parameters (iterable of (name, ndarray)) as manifest + TSR1."""
    d = Path(dirpath)
    d.mkdir(parents=True, exist_ok=True)
    lines = []
    for name, arr in named_params:
        shape = ",".join(str(int(s)) for s in arr.shape) or "1"
        lines.append(f"{name} {shape} {arr.dtype.name}\n")
        write_tsr(d / f"{name}.tsr", arr)
    with open(d / "manifest.txt", "w") as f:
        f.writelines(lines)


def load_checkpoint(dirpath) -> dict[str, np.ndarray]:
    d = Path(dirpath)
    manifest = d / "manifest.txt"
    if not manifest.exists():
        raise FileNotFoundError(f"checkpoint manifest not found: {manifest}")
    out: dict[str, np.ndarray] = {}
    with open(manifest) as f:
        for lineno, line in enumerate(f, 1):
            line = line.strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 3:
                raise ParseError(f"{manifest}:{lineno}: expected 'name shape dtype'")
            name, shape_s, dtype_s = parts
            shape = tuple(int(x) for x in shape_s.split(","))
            arr = read_tsr(d / f"{name}.tsr")
            if arr.shape != shape and not (arr.shape == () and shape == (1,)):
                raise ParseError(
                    f"{manifest}:{lineno}: {name} shape {arr.shape} != manifest {shape}"
                )
            if arr.dtype.name != dtype_s:
                raise ParseError(
                    f"{manifest}:{lineno}: {name} dtype {arr.dtype.name} != {dtype_s}"
                )
            out[name] = arr
    return out
