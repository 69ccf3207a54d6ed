"""Row synchronization: split the rank-1 pair matrices into three color classes.

A hand-consistent quadruple ``{R_i^T g_m R_j}`` sums to three signed rank-1
matrices ``+-v_i^T v_j``, one per row of the rotations, in an unknown order.
Triangles tell which slots of neighbouring pairs share a row; those votes
form a signed graph whose top eigenspace encodes the 3-coloring of all slots.
"""

from __future__ import annotations

import warnings
from itertools import permutations

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import AmbiguousUnmixingWarning, InvalidParam
from .linalg import best_rank1, orthogonal_iteration
from .pairs import infer_n, pair_list, stack_pairs, triangle_pair_ids

#: all of S3 in lexicographic order, 0-based
PERMS = np.array(list(permutations(range(3))))
GRID_POINTS = 3600
REFINE_TOL = 1e-10


def quadruple_to_rank1_triple(quad) -> np.ndarray:
    """``((Q_1 + Q_m) / 2)`` for ``m = 2, 3, 4``, as a (3, 3, 3) array."""
    quad = np.asarray(quad, dtype=float)
    return 0.5 * (quad[..., :1, :, :] + quad[..., 1:, :, :])


def rank1_residual(triple) -> float:
    """Largest ``sigma_2 / sigma_1`` over the three matrices of a triple."""
    s = np.linalg.svd(np.asarray(triple), compute_uv=False)
    return float((s[..., 1] / np.maximum(s[..., 0], 1e-300)).max())


def _alignment_costs(Tij, Tjk, Tik):
    """f values for all 36 ``(gamma, delta)``; leading axes broadcast."""
    Tij, Tjk, Tik = best_rank1(Tij), best_rank1(Tjk), best_rank1(Tik)
    Tki = np.swapaxes(Tik, -1, -2)
    prod = np.einsum("...aij,...bjk,...ckl->...abcil", Tij, Tjk, Tki)
    back = np.einsum("...aij,...akj->...aik", Tij, Tij)[..., :, None, None, :, :]
    minus = np.sqrt(((prod - back) ** 2).sum(axis=(-2, -1)))
    plus = np.sqrt(((prod + back) ** 2).sum(axis=(-2, -1)))
    term = np.minimum(minus, plus)
    slots = np.arange(3)
    g = PERMS[:, None, :]
    d = PERMS[None, :, :]
    return term[..., slots, g, d].sum(axis=-1).reshape(*term.shape[:-3], 36)


def triangle_permutations(t_ij, t_jk, t_ik) -> tuple[tuple, tuple]:
    """Slot alignment of a triangle of rank-1 triples.

    Returns 0-based ``(gamma, delta)``: slot ``m`` of ``t_ij`` shares its row
    with slot ``gamma[m]`` of ``t_jk`` and slot ``delta[m]`` of ``t_ik``.
    Ties go to the lexicographically smallest pair.
    """
    costs = _alignment_costs(t_ij, t_jk, t_ik)
    best = int(np.argmin(costs))
    return tuple(int(x) for x in PERMS[best // 6]), tuple(int(x) for x in PERMS[best % 6])


def triangle_cost(t_ij, t_jk, t_ik, gamma, delta) -> float:
    costs = _alignment_costs(t_ij, t_jk, t_ik)
    gi = [tuple(p) for p in PERMS.tolist()].index(tuple(gamma))
    di = [tuple(p) for p in PERMS.tolist()].index(tuple(delta))
    return float(costs[gi * 6 + di])


def _match_block(perm):
    """3x3 block with +1 where column = perm[row], -1 elsewhere."""
    B = -np.ones(perm.shape[:-1] + (3, 3))
    np.put_along_axis(B, perm[..., :, None], 1.0, axis=-1)
    return B


def build_omega(triples: dict, N: int | None = None, chunk: int = 4096) -> np.ndarray:
    """Signed slot graph, (3 C(N,2), 3 C(N,2)).

    Vertex ``3 p + s`` is slot ``s`` of pair ``p`` (pairs ordered as
    :func:`pairs.pair_list`).

    :param triples: mapping ``(i, j) -> (3, 3, 3)`` rank-1 triples.
    :raises MissingTriangle: when a pair is missing.
    """
    N = infer_n(triples) if N is None else N
    if N < 3:
        raise InvalidParam("need N >= 3")
    T = stack_pairs(triples, N)
    tri, e_ij, e_jk, e_ik = triangle_pair_ids(N)
    n = len(T)
    W = np.zeros((n, 3, n, 3))
    for s in range(0, len(tri), chunk):
        sl = slice(s, s + chunk)
        best = np.argmin(_alignment_costs(T[e_ij[sl]], T[e_jk[sl]], T[e_ik[sl]]), axis=-1)
        gamma, delta = PERMS[best // 6], PERMS[best % 6]
        inv_gamma = np.argsort(gamma, axis=-1)
        W[e_ij[sl], :, e_jk[sl], :] = _match_block(gamma)
        W[e_ij[sl], :, e_ik[sl], :] = _match_block(delta)
        W[e_jk[sl], :, e_ik[sl], :] = _match_block(np.take_along_axis(delta, inv_gamma, axis=-1))
    W = W.reshape(3 * n, 3 * n)
    return W + W.T


def color_vector_alpha(n_pairs: int) -> float:
    return (2.0 * n_pairs) ** -0.5


def _block_stats(w):
    """(max, middle, min) by value of each consecutive block of three."""
    s = np.sort(w.reshape(-1, 3), axis=1)
    return s[:, 2], s[:, 1], s[:, 0]


def unmixing_objective(theta, va, vb) -> float:
    """Distance of the rotated eigenvector pair from the 3-color / 2-color patterns."""
    c, s = np.cos(theta), np.sin(theta)
    a = c * va + s * vb
    b = -s * va + c * vb
    Ma, da, ma = _block_stats(a)
    Mb, db, mb = _block_stats(b)
    return float(
        ((Ma + ma) ** 2 + da**2).sum()
        + ((mb + 2 * Mb) ** 2 + (mb + 2 * db) ** 2 + (Mb - db) ** 2).sum()
    )


def threshold_colors(w) -> np.ndarray:
    """Replace each block's (max, middle, min) by (+alpha, 0, -alpha)."""
    blocks = np.asarray(w, dtype=float).reshape(-1, 3)
    alpha = color_vector_alpha(len(blocks))
    order = np.argsort(blocks, axis=1, kind="stable")
    out = np.zeros_like(blocks)
    np.put_along_axis(out, order[:, 2:3], alpha, axis=1)
    np.put_along_axis(out, order[:, 0:1], -alpha, axis=1)
    return out.ravel()


def color_labels(u) -> np.ndarray:
    """Per-slot color 0, 1, 2 for entries +alpha, 0, -alpha; shape (n_pairs, 3)."""
    blocks = np.asarray(u).reshape(-1, 3)
    return np.where(blocks > 0, 0, np.where(blocks < 0, 2, 1))


def same_partition(labels_a, labels_b) -> bool:
    """True if two colorings agree up to a global relabeling."""
    a = np.asarray(labels_a).ravel()
    b = np.asarray(labels_b).ravel()
    return any(np.array_equal(p[a], b) for p in PERMS)


def unmix_u_alpha(omega: np.ndarray, grid_points: int = GRID_POINTS, return_theta: bool = False):
    """Recover the thresholded 3-color vector from the top eigenspace of ``omega``.

    :param omega: the signed slot graph.
    :param grid_points: coarse samples of the rotation angle before refinement.
    :return: the color vector (and the optimal angle if ``return_theta``).
    :raises EigenFailure: if the orthogonal iteration fails.
    """
    vals, V = orthogonal_iteration(omega, k=2)
    va, vb = V[:, 0], V[:, 1]
    step = 2 * np.pi / grid_points
    thetas = np.arange(grid_points) * step
    f = np.array([unmixing_objective(t, va, vb) for t in thetas])
    # local minima of the periodic grid, best first
    is_min = (f <= np.roll(f, 1)) & (f <= np.roll(f, -1))
    cand = np.flatnonzero(is_min)
    cand = cand[np.lexsort((cand, f[cand]))]

    def refine(g):
        res = minimize_scalar(
            unmixing_objective,
            bracket=(thetas[g] - step, thetas[g], thetas[g] + step),
            args=(va, vb),
            method="golden",
            tol=REFINE_TOL,
        )
        t = res.x if res.fun <= f[g] else thetas[g]
        return t, min(res.fun, f[g])

    theta, best = refine(cand[0])
    u = threshold_colors(np.cos(theta) * va + np.sin(theta) * vb)
    if len(cand) > 1 and f[cand[1]] - f[cand[0]] < 1e-12:
        t2, _ = refine(cand[1])
        u2 = threshold_colors(np.cos(t2) * va + np.sin(t2) * vb)
        if not same_partition(color_labels(u), color_labels(u2)):
            warnings.warn(
                f"unmixing minima at {theta:.6f} and {t2:.6f} give different colorings; keeping the first",
                AmbiguousUnmixingWarning,
            )
    return (u, theta) if return_theta else u


def partition_rows(u, triples: dict, N: int | None = None) -> list[dict]:
    """Split the slots of every triple into the three color classes.

    :return: three dicts ``(i, j) -> 3x3`` matrix, for colors +alpha, 0, -alpha.
    """
    N = infer_n(triples) if N is None else N
    labels = color_labels(u)
    sets = [{}, {}, {}]
    for n, key in enumerate(pair_list(N)):
        T = np.asarray(triples[key])
        for slot in range(3):
            sets[labels[n, slot]][key] = T[slot]
    return sets


def synchronize_rows(quads: dict):
    """Quadruples to three color classes of signed rank-1 matrices.

    :return: ``(sets, triples, u)``.
    """
    N = infer_n(quads)
    triples = {k: quadruple_to_rank1_triple(v) for k, v in quads.items()}
    omega = build_omega(triples, N)
    u = unmix_u_alpha(omega)
    return partition_rows(u, triples, N), triples, u
