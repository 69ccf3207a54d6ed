"""Indexing helpers for unordered pairs and triangles of image indices."""

from __future__ import annotations

from itertools import combinations

import numpy as np

from .errors import InvalidParam, MissingTriangle


def pair_list(N: int) -> list[tuple[int, int]]:
    """All ``(i, j)`` with ``i < j < N`` in lexicographic order."""
    return list(combinations(range(N), 2))


def pair_index(N: int) -> dict[tuple[int, int], int]:
    return {p: n for n, p in enumerate(pair_list(N))}


def triangles(N: int) -> np.ndarray:
    """All ``i < j < k`` as a (C(N, 3), 3) int array."""
    return np.array(list(combinations(range(N), 3)), dtype=np.int64).reshape(-1, 3)


def infer_n(pairs) -> int:
    """Number of images covered by a pair-keyed mapping; every pair must be present."""
    keys = list(pairs)
    if not keys:
        raise InvalidParam("no pairs given")
    N = max(max(k) for k in keys) + 1
    if len(keys) != N * (N - 1) // 2:
        missing = set(pair_list(N)) - set(keys)
        raise MissingTriangle(f"pairs missing for N={N}: {sorted(missing)[:5]}")
    return N


def stack_pairs(mapping, N: int) -> np.ndarray:
    """Stack pair values into an array ordered as :func:`pair_list`."""
    try:
        return np.stack([np.asarray(mapping[p], dtype=float) for p in pair_list(N)])
    except KeyError as exc:
        raise MissingTriangle(f"pair {exc.args[0]} missing") from None


def triangle_pair_ids(N: int) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Triangles and the pair indices of their ``(i,j)``, ``(j,k)`` and ``(i,k)`` edges."""
    tri = triangles(N)
    idx = np.full((N, N), -1, dtype=np.int64)
    for n, (i, j) in enumerate(pair_list(N)):
        idx[i, j] = n
    i, j, k = tri.T
    return tri, idx[i, j], idx[j, k], idx[i, k]
