"""Readers and writers for the on-disk formats.

Binary formats are little-endian:

* ``D2IMGS``: u32 count, u32 side, f64 pixel_size, then f64 pixels row-major.
* ``D2QUAD``: u32 N, then for each ``i < j`` four 3x3 f64 matrices row-major.
* ``D2CSET``: u32 N, then for each of three colors and each ``i < j`` one
  3x3 f64 matrix row-major.

Rotations are text: the count on the first line, then one matrix per line as
nine row-major floats.
"""

from __future__ import annotations

import os
import struct

import numpy as np

from .errors import FileFormatError
from .pairs import pair_list, stack_pairs

IMAGES_MAGIC = b"D2IMGS"
QUAD_MAGIC = b"D2QUAD"
COLORS_MAGIC = b"D2CSET"


def _read(path, magic):
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[: len(magic)] != magic:
        raise FileFormatError(f"{path}: missing {magic.decode()} header")
    return raw, len(magic)


def _expect(path, raw, need):
    if len(raw) != need:
        raise FileFormatError(f"{path}: expected {need} bytes, found {len(raw)}")


def write_images(path: str | os.PathLike, images: np.ndarray, pixel_size: float = 1.0) -> None:
    images = np.asarray(images, dtype="<f8")
    if images.ndim != 3 or images.shape[1] != images.shape[2]:
        raise FileFormatError("images must be a (count, side, side) stack")
    with open(path, "wb") as fh:
        fh.write(IMAGES_MAGIC + struct.pack("<IId", images.shape[0], images.shape[1], pixel_size))
        fh.write(images.tobytes())


def read_images(path: str | os.PathLike) -> tuple[np.ndarray, float]:
    """:return: ``(images, pixel_size)``."""
    raw, off = _read(path, IMAGES_MAGIC)
    count, side, pixel_size = struct.unpack_from("<IId", raw, off)
    off += 16
    _expect(path, raw, off + count * side * side * 8)
    return np.frombuffer(raw, "<f8", offset=off).reshape(count, side, side).copy(), pixel_size


def write_rotations(path: str | os.PathLike, rotations: np.ndarray) -> None:
    R = np.asarray(rotations, dtype=float).reshape(-1, 9)
    with open(path, "w") as fh:
        fh.write(f"{len(R)}\n")
        for row in R:
            fh.write(" ".join(f"{x:.17g}" for x in row) + "\n")


def read_rotations(path: str | os.PathLike) -> np.ndarray:
    with open(path) as fh:
        lines = [ln.split() for ln in fh if ln.strip()]
    try:
        n = int(lines[0][0])
        data = np.array([[float(x) for x in ln] for ln in lines[1:]])
    except (IndexError, ValueError) as exc:
        raise FileFormatError(f"{path}: malformed rotations file ({exc})") from None
    if data.shape != (n, 9):
        raise FileFormatError(f"{path}: expected {n} lines of 9 numbers, got shape {data.shape}")
    return data.reshape(n, 3, 3)


def write_quadruples(path: str | os.PathLike, quads: dict, N: int) -> None:
    Q = stack_pairs({k: getattr(v, "mats", v) for k, v in quads.items()}, N)
    with open(path, "wb") as fh:
        fh.write(QUAD_MAGIC + struct.pack("<I", N))
        fh.write(Q.astype("<f8").tobytes())


def read_quadruples(path: str | os.PathLike) -> dict:
    raw, off = _read(path, QUAD_MAGIC)
    (N,) = struct.unpack_from("<I", raw, off)
    off += 4
    pairs = pair_list(N)
    _expect(path, raw, off + len(pairs) * 36 * 8)
    Q = np.frombuffer(raw, "<f8", offset=off).reshape(len(pairs), 4, 3, 3)
    return {p: Q[n].copy() for n, p in enumerate(pairs)}


def write_color_sets(path: str | os.PathLike, sets: list, N: int) -> None:
    with open(path, "wb") as fh:
        fh.write(COLORS_MAGIC + struct.pack("<I", N))
        for cset in sets:
            fh.write(stack_pairs(cset, N).astype("<f8").tobytes())


def read_color_sets(path: str | os.PathLike) -> list[dict]:
    raw, off = _read(path, COLORS_MAGIC)
    (N,) = struct.unpack_from("<I", raw, off)
    off += 4
    pairs = pair_list(N)
    _expect(path, raw, off + 3 * len(pairs) * 9 * 8)
    data = np.frombuffer(raw, "<f8", offset=off).reshape(3, len(pairs), 3, 3)
    return [{p: data[c, n].copy() for n, p in enumerate(pairs)} for c in range(3)]
