"""Handedness synchronization of relative-rotation quadruples.

Each estimated quadruple is either consistent with the true rotations or
with their J-conjugates.  Triangles of quadruples reveal which of their
three edges disagree; a signed pair graph collects those votes and its
leading eigenvector splits the pairs into the two hand classes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import MissingTriangle
from .geom import conjugate_by_J
from .linalg import power_iteration
from .pairs import infer_n, stack_pairs, triangle_pair_ids

#: the four triangle configurations; entry e = 1 marks the odd edge out
CONFIGS = np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1]])
#: number of near-identity products expected among the 64 for a consistent triangle
N_SMALLEST = 16


def _triple_norms(A, B, C):
    """``||A_m B_l C_r - I||_F`` for all 64 index triples; leading axes broadcast."""
    prod = np.einsum("...mab,...lbc,...rcd->...mlrad", A, B, C)
    prod = prod - np.eye(3)
    return np.sqrt((prod**2).sum(axis=(-2, -1))).reshape(*prod.shape[:-5], 64)


def config_scores(Rij, Rjk, Rki) -> np.ndarray:
    """Sum of the 16 smallest product norms under each of the four configurations.

    Inputs are (..., 4, 3, 3); the result has shape (..., 4).
    """
    Rij, Rjk, Rki = (np.asarray(x, dtype=float) for x in (Rij, Rjk, Rki))
    out = []
    for flip in CONFIGS:
        A = conjugate_by_J(Rij) if flip[0] else Rij
        B = conjugate_by_J(Rjk) if flip[1] else Rjk
        C = conjugate_by_J(Rki) if flip[2] else Rki
        norms = np.sort(_triple_norms(A, B, C), axis=-1)
        out.append(norms[..., :N_SMALLEST].sum(axis=-1))
    return np.stack(out, axis=-1)


def triplet_config(Rij, Rjk, Rki) -> int:
    """Index ``p`` in 0..3 of the configuration of one triangle (ties to the lowest).

    ``Rki`` holds ``R_k^T g_m R_i``, i.e. the member-wise transpose of the
    stored ``(i, k)`` quadruple.
    """
    return int(np.argmin(config_scores(Rij, Rjk, Rki)))


def all_triplet_configs(quads: dict, N: int | None = None, chunk: int = 4096):
    """Configurations of every triangle ``i < j < k``.

    :return: ``(triangles, configs)`` arrays of shape (T, 3) and (T,).
    """
    N = infer_n(quads) if N is None else N
    Q = stack_pairs(quads, N)
    tri, e_ij, e_jk, e_ik = triangle_pair_ids(N)
    conf = np.empty(len(tri), dtype=np.int64)
    for s in range(0, len(tri), chunk):
        sl = slice(s, s + chunk)
        scores = config_scores(Q[e_ij[sl]], Q[e_jk[sl]], np.swapaxes(Q[e_ik[sl]], -1, -2))
        conf[sl] = np.argmin(scores, axis=-1)
    return tri, conf


def build_sigma(configs, N: int) -> np.ndarray:
    """Signed pair-graph matrix from triangle configurations.

    :param configs: mapping ``(i, j, k) -> p`` with ``p`` in 0..3, covering all
        triangles, or the ``(triangles, configs)`` pair from
        :func:`all_triplet_configs`.
    :param N: number of images.
    :return: symmetric (C(N,2), C(N,2)) array in {-1, 0, 1}.
    """
    tri, e_ij, e_jk, e_ik = triangle_pair_ids(N)
    if isinstance(configs, dict):
        try:
            conf = np.array([configs[tuple(int(x) for x in t)] for t in tri], dtype=np.int64)
        except KeyError as exc:
            raise MissingTriangle(f"triangle {exc.args[0]} has no configuration") from None
    else:
        tri_given, conf = configs
        if len(tri_given) != len(tri):
            raise MissingTriangle(f"expected {len(tri)} triangles, got {len(tri_given)}")
    d = CONFIGS[conf]
    sign = lambda a, b: np.where(np.maximum(a, b) > 0, -1.0, 1.0)  # noqa: E731
    n = N * (N - 1) // 2
    S = np.zeros((n, n))
    S[e_ij, e_jk] = sign(d[:, 0], d[:, 1])
    S[e_jk, e_ik] = sign(d[:, 1], d[:, 2])
    S[e_ik, e_ij] = sign(d[:, 2], d[:, 0])
    return S + S.T


@dataclass
class HandSyncResult:
    quadruples: dict
    flipped: list
    eigenvector: np.ndarray
    eigenvalue: float


def synchronize_hands(quads: dict) -> HandSyncResult:
    """J-conjugate the quadruples of the minority hand class.

    :param quads: mapping ``(i, j) -> (4, 3, 3)`` for all ``i < j``.
    :raises EigenFailure: if the power iteration does not converge.
    """
    N = infer_n(quads)
    sigma = build_sigma(all_triplet_configs(quads, N), N)
    val, vec = power_iteration(sigma)
    out, flipped = {}, []
    for n, key in enumerate(sorted(quads)):
        q = np.asarray(quads[key], dtype=float)
        if vec[n] < 0:
            q = conjugate_by_J(q)
            flipped.append(key)
        out[key] = q
    return HandSyncResult(out, flipped, vec, val)
