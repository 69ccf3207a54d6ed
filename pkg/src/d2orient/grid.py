"""Discretization of SO(3) and the common-line lookup tables for the search.

A grid rotation is addressed either by ``(k, l)`` (beaming direction ``k``,
in-plane angle ``l``) or by its linear index ``k * L + l``.  Because the ray
count is a multiple of ``L``, rotating a grid rotation in-plane by one step
just shifts every ray index by ``L_rays // L``; the table therefore stores
one set of angles per pair of beaming directions and derives the rest.
"""

from __future__ import annotations

import hashlib
import os
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import FileFormatError, InvalidParam
from .geom import KLEIN, KLEIN_DIAG, admissible, wrap_angle

DEFAULT_K = 1200
DEFAULT_L = 72
DEFAULT_RAYS = 360
GRID_EPS_ALIGN = 0.017

TABLE_MAGIC = b"D2TBL1"


def sphere_grid(K: int) -> np.ndarray:
    """``K`` points of the Saff-Kuijlaars spiral, from the south to the north pole.

    :return: (K, 3) array of unit vectors.
    """
    if K < 2:
        raise InvalidParam(f"sphere grid needs K >= 2, got {K}")
    k = np.arange(K)
    h = -1.0 + 2.0 * k / (K - 1)
    theta = np.arccos(np.clip(h, -1.0, 1.0))
    phi = np.zeros(K)
    step = 3.6 / np.sqrt(K)
    for i in range(1, K - 1):
        phi[i] = (phi[i - 1] + step / np.sqrt(1.0 - h[i] ** 2)) % (2 * np.pi)
    s = np.sin(theta)
    pts = np.stack([s * np.cos(phi), s * np.sin(phi), h], axis=1)
    return pts / np.linalg.norm(pts, axis=1, keepdims=True)


def tangent_frame(z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """In-plane basis ``(u, w)`` with ``det[u, w, z] = +1``.

    ``u`` is the normalized ``(-b, a, 0)``; at the poles, where that vector
    vanishes, ``u = (1, 0, 0)``.  Broadcasts over a leading axis.
    """
    z = np.atleast_2d(np.asarray(z, dtype=float))
    u = np.stack([-z[:, 1], z[:, 0], np.zeros(len(z))], axis=1)
    nu = np.linalg.norm(u, axis=1)
    pole = nu < 1e-12
    u[pole] = [1.0, 0.0, 0.0]
    nu[pole] = 1.0
    u /= nu[:, None]
    w = np.cross(z, u)
    w /= np.linalg.norm(w, axis=1, keepdims=True)
    return u, w


def inplane_rotations(z: np.ndarray, L: int) -> np.ndarray:
    """The ``L`` grid rotations with beaming direction ``z``.

    Rotation ``l`` has columns ``cos t u + sin t w``, ``-sin t u + cos t w``
    and ``z`` with ``t = 2 pi l / L``.

    :return: (L, 3, 3) array.
    """
    if L < 1:
        raise InvalidParam(f"L must be positive, got {L}")
    z = np.asarray(z, dtype=float)
    u, w = tangent_frame(z)
    u, w = u[0], w[0]
    t = 2 * np.pi * np.arange(L) / L
    c, s = np.cos(t)[:, None], np.sin(t)[:, None]
    Q = np.empty((L, 3, 3))
    Q[:, :, 0] = c * u + s * w
    Q[:, :, 1] = -s * u + c * w
    Q[:, :, 2] = z
    return Q


def quantize(angles, L_rays: int):
    """Nearest ray index for angles in radians."""
    step = 2 * np.pi / L_rays
    return (np.rint(np.asarray(angles) / step).astype(np.int64) % L_rays).astype(np.int32)


@dataclass
class CandidateTable:
    """Precomputed common lines for every admissible pair of grid directions.

    ``pair_angles[p, m]`` holds the exact ``(alpha_lr, alpha_rl)`` of line
    ``m`` for the pair ``pair_dirs[p] = (k1, k2)`` at in-plane index 0 on
    both sides; ``self_angles[k, m]`` holds the self lines ``m = 2, 3, 4`` of
    direction ``k`` (NaN where undefined).
    """

    K: int
    L: int
    L_rays: int
    eps_align: float
    directions: np.ndarray
    pair_dirs: np.ndarray
    pair_angles: np.ndarray
    self_angles: np.ndarray
    rotations: np.ndarray = field(repr=False)
    pair_base: np.ndarray = field(init=False, repr=False)
    self_base: np.ndarray = field(init=False, repr=False)
    self_count: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.pair_base = quantize(self.pair_angles, self.L_rays)
        present = ~np.isnan(self.self_angles[..., 0])
        base = quantize(np.nan_to_num(self.self_angles), self.L_rays)
        base[~present] = -1
        self.self_base = base
        self.self_count = present.sum(axis=1).astype(np.int32)

    @property
    def shift(self) -> int:
        return self.L_rays // self.L

    @property
    def n_pairs(self) -> int:
        return len(self.pair_dirs)

    @property
    def n_candidates(self) -> int:
        return self.n_pairs * self.L * self.L

    def rotation(self, k: int, l: int) -> np.ndarray:
        return self.rotations[k * self.L + l]

    def pair_coords(self, p: int, l1: int, l2: int) -> np.ndarray:
        """Quantized ray indices (4, 2) of candidate ``(k1, l1), (k2, l2)``."""
        out = self.pair_base[p].astype(np.int64)
        out[:, 0] -= l1 * self.shift
        out[:, 1] -= l2 * self.shift
        return (out % self.L_rays).astype(np.int32)

    def self_coords(self, k: int, l: int) -> np.ndarray:
        """Quantized self-line ray indices (3, 2); rows of -1 are absent."""
        base = self.self_base[k].astype(np.int64)
        out = (base - l * self.shift) % self.L_rays
        out[base < 0] = -1
        return out.astype(np.int32)

    def candidate_quadruple(self, p: int, l1: int, l2: int) -> np.ndarray:
        k1, k2 = self.pair_dirs[p]
        Ql = self.rotation(k1, l1)
        Qr = self.rotation(k2, l2)
        return np.einsum("ba,mbc,cd->mad", Ql, KLEIN, Qr)


def _pair_line_angles(zl, ul, wl, zr, ur, wr):
    """Exact common-line angles (..., 4, 2) for direction pairs at in-plane index 0."""
    g = KLEIN_DIAG[None, :, :]
    gz = g * zr[:, None, :]
    q = np.cross(zl[:, None, :], gz)
    q /= np.linalg.norm(q, axis=-1, keepdims=True)
    a_lr = np.arctan2(np.einsum("pmi,pi->pm", q, wl), np.einsum("pmi,pi->pm", q, ul))
    gu = g * ur[:, None, :]
    gw = g * wr[:, None, :]
    a_rl = np.arctan2(np.sum(q * gw, axis=-1), np.sum(q * gu, axis=-1))
    return wrap_angle(np.stack([a_lr, a_rl], axis=-1))


def _self_line_angles(Z, U, W, eps_align):
    K = len(Z)
    out = np.full((K, 3, 2), np.nan)
    for mi, gd in enumerate(KLEIN_DIAG[1:]):
        gz = Z * gd
        ok = admissible(Z, gz, eps_align)
        if not ok.any():
            continue
        q = np.cross(Z[ok], gz[ok])
        q /= np.linalg.norm(q, axis=1, keepdims=True)
        a1 = np.arctan2(np.sum(q * W[ok], 1), np.sum(q * U[ok], 1))
        a2 = np.arctan2(np.sum(q * W[ok] * gd, 1), np.sum(q * U[ok] * gd, 1))
        out[ok, mi, 0] = wrap_angle(a1)
        out[ok, mi, 1] = wrap_angle(a2)
    return out


def admissible_direction_pairs(Z: np.ndarray, eps_align: float) -> np.ndarray:
    """All ``k1 < k2`` whose common lines are defined for every symmetry element."""
    ok = np.ones((len(Z), len(Z)), dtype=bool)
    for gd in KLEIN_DIAG:
        ok &= np.abs(Z @ (Z * gd).T) < np.cos(eps_align)
    k1, k2 = np.nonzero(np.triu(ok, k=1))
    return np.stack([k1, k2], axis=1).astype(np.int32)


def grid_rotations(Z: np.ndarray, L: int) -> np.ndarray:
    return np.concatenate([inplane_rotations(z, L) for z in Z]) if len(Z) else np.empty((0, 3, 3))


def build_candidate_tables(
    K: int = DEFAULT_K,
    L: int = DEFAULT_L,
    L_rays: int = DEFAULT_RAYS,
    eps_align: float = GRID_EPS_ALIGN,
) -> CandidateTable:
    """Build the lookup tables for the relative-rotation search.

    :param K: number of beaming directions.
    :param L: number of in-plane angles per direction.
    :param L_rays: number of Fourier rays per image; must be even and a
        multiple of ``L``.
    :param eps_align: minimal angle (radians) between a candidate's beaming
        directions, modulo the symmetry group.
    """
    if K < 2 or L < 1 or L_rays < 2 or eps_align <= 0:
        raise InvalidParam("K >= 2, L >= 1, L_rays >= 2 and eps_align > 0 required")
    if L_rays % 2:
        raise InvalidParam(f"L_rays must be even, got {L_rays}")
    if L_rays % L:
        raise InvalidParam(f"L_rays ({L_rays}) must be a multiple of L ({L})")
    Z = sphere_grid(K)
    U, W = tangent_frame(Z)
    pairs = admissible_direction_pairs(Z, eps_align)
    angles = np.empty((len(pairs), 4, 2))
    chunk = 65536
    for s in range(0, len(pairs), chunk):
        a, b = pairs[s : s + chunk, 0], pairs[s : s + chunk, 1]
        angles[s : s + chunk] = _pair_line_angles(Z[a], U[a], W[a], Z[b], U[b], W[b])
    return CandidateTable(
        K=K,
        L=L,
        L_rays=L_rays,
        eps_align=float(eps_align),
        directions=Z,
        pair_dirs=pairs,
        pair_angles=angles,
        self_angles=_self_line_angles(Z, U, W, eps_align),
        rotations=grid_rotations(Z, L),
    )


def grid_spacing(K: int) -> float:
    """Mean angular spacing ``sqrt(4 pi / K)`` of a K-point sphere grid."""
    return float(np.sqrt(4 * np.pi / K))


# -- binary cache -------------------------------------------------------------

_HEADER = struct.Struct("<6sIIId")


def save_table(table: CandidateTable, path: str | os.PathLike) -> None:
    """Write a table in the D2TBL1 format (little-endian)."""
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(TABLE_MAGIC, table.K, table.L, table.L_rays, table.eps_align))
        fh.write(struct.pack("<I", table.n_pairs))
        fh.write(table.pair_dirs.astype("<u4").tobytes())
        fh.write(table.pair_angles.astype("<f8").tobytes())
        fh.write(table.self_angles.astype("<f8").tobytes())


def load_table(path: str | os.PathLike) -> CandidateTable:
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _HEADER.size + 4 or raw[:6] != TABLE_MAGIC:
        raise FileFormatError(f"{path}: not a D2TBL1 file")
    _, K, L, L_rays, eps = _HEADER.unpack_from(raw, 0)
    off = _HEADER.size
    (P,) = struct.unpack_from("<I", raw, off)
    off += 4
    need = off + P * 2 * 4 + P * 8 * 8 + K * 6 * 8
    if len(raw) != need:
        raise FileFormatError(f"{path}: expected {need} bytes, found {len(raw)}")
    dirs = np.frombuffer(raw, "<u4", P * 2, off).reshape(P, 2).astype(np.int32)
    off += P * 8
    angles = np.frombuffer(raw, "<f8", P * 8, off).reshape(P, 4, 2).copy()
    off += P * 64
    selfa = np.frombuffer(raw, "<f8", K * 6, off).reshape(K, 3, 2).copy()
    Z = sphere_grid(K)
    return CandidateTable(K, L, L_rays, eps, Z, dirs, angles, selfa, grid_rotations(Z, L))


def table_cache_path(cache_dir, K, L, L_rays, eps_align) -> Path:
    key = hashlib.sha1(struct.pack("<IIId", K, L, L_rays, eps_align)).hexdigest()[:12]
    return Path(cache_dir) / f"d2tbl_K{K}_L{L}_R{L_rays}_{key}.bin"


def cached_candidate_table(K, L, L_rays, eps_align=GRID_EPS_ALIGN, cache_dir=None) -> CandidateTable:
    """Build a table, reading/writing the binary cache when ``cache_dir`` is set."""
    if cache_dir is None:
        return build_candidate_tables(K, L, L_rays, eps_align)
    path = table_cache_path(cache_dir, K, L, L_rays, eps_align)
    if path.exists():
        return load_table(path)
    table = build_candidate_tables(K, L, L_rays, eps_align)
    path.parent.mkdir(parents=True, exist_ok=True)
    save_table(table, path)
    return table
