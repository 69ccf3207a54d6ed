"""Deterministic iterative eigen-solvers for the symmetric sync matrices.

Both solvers target the algebraically largest eigenvalues.  The matrix is
shifted by its Gershgorin lower bound so that negative eigenvalues of large
magnitude cannot take over the iteration.
"""

from __future__ import annotations

import numpy as np

from .errors import EigenFailure

TOL = 1e-10
MAXITER = 10_000


def _shift(A: np.ndarray) -> float:
    off = np.abs(A).sum(axis=1) - np.abs(np.diag(A))
    return max(0.0, float(-(np.diag(A) - off).min()))


def _start(n: int, k: int) -> np.ndarray:
    # ones plus a fixed pseudo-random tilt; plain ones is an exact eigenvector
    # (or orthogonal to the target) for several of the sync matrices
    rng = np.random.default_rng(20200401)
    V = np.ones((n, k)) + 0.1 * rng.standard_normal((n, k))
    return V


def power_iteration(
    A: np.ndarray,
    tol: float = TOL,
    maxiter: int = MAXITER,
    v0: np.ndarray | None = None,
) -> tuple[float, np.ndarray]:
    """Leading eigenpair of a symmetric matrix.

    :param A: symmetric (n, n) array.
    :param tol: stop once successive unit iterates differ by less than ``tol``.
    :param maxiter: iteration cap.
    :param v0: optional start vector; defaults to a fixed deterministic vector.
    :return: ``(eigenvalue, unit eigenvector)``.
    :raises EigenFailure: if the cap is reached.
    """
    A = np.asarray(A, dtype=float)
    n = A.shape[0]
    c = _shift(A)
    v = _start(n, 1)[:, 0] if v0 is None else np.asarray(v0, dtype=float).copy()
    v /= np.linalg.norm(v)
    for _ in range(maxiter):
        w = A @ v + c * v
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return 0.0, v
        w /= nw
        if np.linalg.norm(w - v) < tol:
            return float(w @ A @ w), w
        v = w
    raise EigenFailure(f"power iteration did not converge in {maxiter} iterations")


def orthogonal_iteration(
    A: np.ndarray, k: int = 2, tol: float = TOL, maxiter: int = MAXITER
) -> tuple[np.ndarray, np.ndarray]:
    """Top-``k`` eigenpairs of a symmetric matrix by subspace iteration.

    Returns eigenvalues in descending order and an (n, k) matrix of
    orthonormal eigenvectors (Rayleigh-Ritz rotated).
    """
    A = np.asarray(A, dtype=float)
    n = A.shape[0]
    c = _shift(A)
    V, _ = np.linalg.qr(_start(n, k))
    for _ in range(maxiter):
        W, _ = np.linalg.qr(A @ V + c * V)
        # distance between the two subspaces
        if np.linalg.norm(V - W @ (W.T @ V)) < tol:
            V = W
            break
        V = W
    else:
        raise EigenFailure(f"orthogonal iteration did not converge in {maxiter} iterations")
    T = V.T @ A @ V
    vals, U = np.linalg.eigh((T + T.T) / 2)
    order = np.argsort(vals)[::-1]
    return vals[order], V @ U[:, order]


def best_rank1(M: np.ndarray) -> np.ndarray:
    """Best rank-1 approximation(s) via the leading singular triplet.

    Accepts a single matrix or a stack with shape (..., p, q).
    """
    U, s, Vt = np.linalg.svd(M)
    return s[..., 0, None, None] * U[..., :, :1] * Vt[..., :1, :]


def nearest_rotation(M: np.ndarray) -> np.ndarray:
    """Closest orthogonal matrix in Frobenius norm (polar factor); may have det -1."""
    U, _, Vt = np.linalg.svd(M)
    return U @ Vt
