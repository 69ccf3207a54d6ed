"""Sign synchronization of one color class of rank-1 matrices ``s_ij v_i^T v_j``."""

from __future__ import annotations

import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateDotWarning, InvalidParam
from .linalg import power_iteration
from .pairs import infer_n, pair_list, triangle_pair_ids

DOT_TOL = 1e-6


def _block(cset, i, j):
    """Block (i, j) of the symmetric block matrix built from the ``i < j`` entries."""
    return np.asarray(cset[(i, j)]) if i < j else np.asarray(cset[(j, i)]).T


def estimate_self_products(cset: dict, N: int | None = None) -> np.ndarray:
    """Estimate ``v_i^T v_i`` for every image, (N, 3, 3).

    Averages ``B B^T`` over all blocks ``B`` in row ``i`` (signs cancel), then
    keeps the nearest unit-trace rank-1 PSD matrix.
    """
    N = infer_n(cset) if N is None else N
    if N < 3:
        raise InvalidParam("need N >= 3")
    out = np.empty((N, 3, 3))
    for i in range(N):
        acc = sum(_block(cset, i, j) @ _block(cset, i, j).T for j in range(N) if j != i)
        w, V = np.linalg.eigh(acc / (N - 1))
        v = V[:, -1]
        out[i] = np.outer(v, v)
    return out


def _assemble(cset: dict, self_products: np.ndarray) -> np.ndarray:
    N = len(self_products)
    H = np.zeros((N, 3, N, 3))
    for i in range(N):
        H[i, :, i, :] = self_products[i]
    for i, j in pair_list(N):
        B = np.asarray(cset[(i, j)], dtype=float)
        H[i, :, j, :] = B
        H[j, :, i, :] = B.T
    return H.reshape(3 * N, 3 * N)


def build_Hn(cset: dict, self_products: np.ndarray, n: int) -> np.ndarray:
    """Block matrix whose off-diagonal signs are made consistent through image ``n``.

    Each block ``(i, j)`` with ``i, j != n`` is negated when
    ``B_in B_nj`` is closer to ``-B_ij`` than to ``B_ij``.
    """
    N = len(self_products)
    if not 0 <= n < N:
        raise InvalidParam(f"anchor index {n} out of range")
    fixed = {}
    for i, j in pair_list(N):
        B = np.asarray(cset[(i, j)], dtype=float)
        if n not in (i, j):
            through = _block(cset, i, n) @ _block(cset, n, j)
            if np.linalg.norm(through - B) > np.linalg.norm(through + B):
                B = -B
        fixed[(i, j)] = B
    return _assemble(fixed, self_products)


def _leading_rows(H: np.ndarray) -> np.ndarray:
    _, v = power_iteration(H)
    rows = v.reshape(-1, 3)
    norms = np.linalg.norm(rows, axis=1, keepdims=True)
    return rows / np.where(norms == 0, 1.0, norms)


def build_S(row_estimates: np.ndarray, return_degenerate: bool = False):
    """Pair-sign product matrix from the per-anchor row estimates.

    :param row_estimates: (N, N, 3); ``row_estimates[n, i]`` is anchor ``n``'s
        unit estimate of row ``i`` (up to sign).
    :return: symmetric (C(N,2), C(N,2)) array in {-1, 0, 1}; with
        ``return_degenerate`` also the number of entries zeroed because the
        dot product was below ``1e-6`` in magnitude.
    """
    V = np.asarray(row_estimates, dtype=float)
    N = V.shape[0]
    tri, e_ij, e_jk, e_ik = triangle_pair_ids(N)
    i, j, k = tri.T
    n = N * (N - 1) // 2
    S = np.zeros((n, n))
    degenerate = 0
    # edges (a, x) and (x, b) share x: the sign is the product read at slot x
    for e1, e2, a, x, b in ((e_ij, e_jk, i, j, k), (e_ij, e_ik, j, i, k), (e_jk, e_ik, j, k, i)):
        dots = np.einsum("td,td->t", V[a, x], V[b, x])
        small = np.abs(dots) < DOT_TOL
        degenerate += int(small.sum())
        S[e1, e2] = np.where(small, 0.0, np.sign(dots))
    S = S + S.T
    if degenerate:
        warnings.warn(f"{degenerate} near-zero sign products set to 0", DegenerateDotWarning)
    return (S, degenerate) if return_degenerate else S


@dataclass
class SignSyncResult:
    rows: np.ndarray
    pair_signs: np.ndarray
    anchor_rows: np.ndarray
    degenerate_dots: int
    top_eigenvalue: float


def direct_pair_signs(cset: dict, anchors: np.ndarray) -> np.ndarray:
    """Pair signs read from each anchor's estimate of its own row.

    Anchor ``i`` returns its own row as ``a_i v_i`` and anchor ``j`` as
    ``a_j v_j``, so ``sign(a_i v_i B_ij (a_j v_j)^T)`` is the sign that turns
    ``B_ij`` into ``a_i a_j v_i^T v_j``.
    """
    N = len(anchors)
    own = anchors[np.arange(N), np.arange(N)]
    return np.array([np.sign(own[i] @ np.asarray(cset[(i, j)]) @ own[j]) for i, j in pair_list(N)])


def adjust_signs(cset: dict, self_products: np.ndarray | None = None, threads: int = 1) -> SignSyncResult:
    """Recover the rows ``v_i`` (up to one global sign) from one color class.

    :param cset: mapping ``(i, j) -> s_ij v_i^T v_j`` for all ``i < j``.
    :param self_products: optional (N, 3, 3) estimates of ``v_i^T v_i``.
    :param threads: workers for the per-anchor factorizations.
    """
    N = infer_n(cset)
    if N < 4:
        raise InvalidParam("sign synchronization needs N >= 4")
    if self_products is None:
        self_products = estimate_self_products(cset, N)

    def anchor(n):
        return _leading_rows(build_Hn(cset, self_products, n))

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            anchors = np.stack(list(pool.map(anchor, range(N))))
    else:
        anchors = np.stack([anchor(n) for n in range(N)])
    S, degenerate = build_S(anchors, return_degenerate=True)
    _, u = power_iteration(S)
    signs = np.where(u < 0, -1.0, 1.0)
    # S cannot tell u from -u; the per-pair readout from the anchors can,
    # so let it vote on the global sign
    if signs @ direct_pair_signs(cset, anchors) < 0:
        signs = -signs
    tilde = {key: c * np.asarray(cset[key], dtype=float) for key, c in zip(pair_list(N), signs)}
    val, v = power_iteration(_assemble(tilde, self_products))
    rows = v.reshape(N, 3)
    rows = rows / np.linalg.norm(rows, axis=1, keepdims=True)
    return SignSyncResult(rows, signs, anchors, degenerate, val)
