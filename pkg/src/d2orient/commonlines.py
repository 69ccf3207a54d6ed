"""Relative-rotation estimation by exhaustive common-line scoring over a grid."""

from __future__ import annotations

import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import _scoring
from .errors import InvalidParam, NoAdmissibleCandidate, ZeroRayWarning
from .grid import CandidateTable

#: pair factors (4) plus self factors of both images (3 + 3)
FULL_FACTOR_COUNT = 10


@dataclass
class RelRotQuadruple:
    """Four relative rotations with the grid candidate they came from.

    :param mats: (4, 3, 3) array ``Q_l^T g_m Q_r``.
    :param source: ``(l, r)`` linear grid indices, or ``"synthetic"``.
    :param score: candidate score.
    """

    mats: np.ndarray
    source: tuple | str = "synthetic"
    score: float = float("nan")


def normalize_rays(P: np.ndarray) -> np.ndarray:
    """Scale every ray to unit norm; zero rays stay zero (with a warning)."""
    P = np.asarray(P, dtype=complex)
    norms = np.linalg.norm(P, axis=-1, keepdims=True)
    zero = norms == 0
    if zero.any():
        warnings.warn(f"{int(zero.sum())} zero-norm Fourier rays; their correlations are 0", ZeroRayWarning)
    return P / np.where(zero, 1.0, norms)


def ray_correlations(Pa: np.ndarray, Pb: np.ndarray) -> np.ndarray:
    """Real part of the normalized correlation of every ray of ``Pa`` with every ray of ``Pb``.

    :param Pa: complex (L_rays, n_rad) rays.
    :param Pb: rays of the second image (may be ``Pa`` itself).
    :return: (L_rays, L_rays) array with values in [-1, 1].
    """
    if np.shape(Pa) != np.shape(Pb):
        raise InvalidParam(f"ray arrays differ in shape: {np.shape(Pa)} vs {np.shape(Pb)}")
    A = normalize_rays(Pa)
    B = A if Pb is Pa else normalize_rays(Pb)
    return np.real(A.conj() @ B.T)


def _factor(corr, a, b):
    return max(float(corr[a, b]), 0.0)


def pair_score(corr_ab, corr_aa, corr_bb, pair_coords, self_coords_a=None, self_coords_b=None) -> float:
    """Score of one candidate from its ray indices.

    Correlations are clamped at zero.  When some self lines are undefined the
    product of the present factors is raised to ``10 / n_present``, i.e. each
    missing factor is replaced by the geometric mean of the others.

    :param pair_coords: (4, 2) ray indices of the common lines, image a first.
    :param self_coords_a: (3, 2) self-line ray indices of image a; rows with a
        negative index are absent.
    :param self_coords_b: same for image b.
    """
    factors = [_factor(corr_ab, a, b) for a, b in np.asarray(pair_coords)]
    for corr, coords in ((corr_aa, self_coords_a), (corr_bb, self_coords_b)):
        if coords is None:
            continue
        factors += [_factor(corr, a, b) for a, b in np.asarray(coords) if a >= 0]
    prod = float(np.prod(factors))
    if prod <= 0.0:
        return 0.0
    return prod ** (FULL_FACTOR_COUNT / len(factors))


def self_products(corr_aa: np.ndarray, table: CandidateTable) -> np.ndarray:
    """Product of clamped self-line correlations for every grid rotation, (K, L)."""
    c = np.clip(corr_aa, 0.0, 1.0)
    steps = np.arange(table.L) * table.shift
    base = table.self_base.astype(np.int64)
    idx = (base[:, None, :, :] - steps[None, :, None, None]) % table.L_rays
    vals = c[idx[..., 0], idx[..., 1]]
    vals[np.broadcast_to(base[:, None, :, 0] < 0, vals.shape)] = 1.0
    return vals.prod(axis=-1)


def score_exponents(table: CandidateTable) -> np.ndarray:
    cnt = table.self_count
    k1, k2 = table.pair_dirs[:, 0], table.pair_dirs[:, 1]
    return FULL_FACTOR_COUNT / (4.0 + cnt[k1] + cnt[k2])


class PairScorer:
    """Holds the per-image precomputation shared by all pairs of a stack."""

    def __init__(self, polar: np.ndarray, table: CandidateTable, backend: str | None = None):
        polar = np.asarray(polar)
        if polar.ndim != 3 or polar.shape[1] != table.L_rays:
            raise InvalidParam(f"rays must be (N, {table.L_rays}, n_rad), got {polar.shape}")
        if table.n_pairs == 0:
            raise NoAdmissibleCandidate("candidate table has no admissible pairs")
        self.table = table
        self.backend = backend
        self.rays = normalize_rays(polar)
        self.self_prod = [self_products(np.real(r.conj() @ r.T), table) for r in self.rays]
        self.expo = score_exponents(table)
        self._dirs = np.ascontiguousarray(table.pair_dirs, dtype=np.int32)
        self._base = np.ascontiguousarray(table.pair_base, dtype=np.int32)

    def estimate(self, i: int, j: int) -> RelRotQuadruple:
        t = self.table
        corr = np.clip(np.real(self.rays[i].conj() @ self.rays[j].T), 0.0, 1.0)
        score, p, l1, l2 = _scoring.best_candidate(
            corr, self.self_prod[i], self.self_prod[j], self.expo, self._dirs, self._base, t.shift, self.backend
        )
        if p < 0:
            # every candidate scored 0; fall back to the first one deterministically
            p, l1, l2 = 0, 0, 0
        k1, k2 = t.pair_dirs[p]
        return RelRotQuadruple(t.candidate_quadruple(p, l1, l2), (int(k1 * t.L + l1), int(k2 * t.L + l2)), score)


def estimate_relative_quadruple(Pa, Pb, table: CandidateTable, backend: str | None = None) -> RelRotQuadruple:
    """Best-scoring grid candidate for one image pair."""
    return PairScorer(np.stack([Pa, Pb]), table, backend).estimate(0, 1)


def estimate_all(polar, table: CandidateTable, threads: int = 1, backend: str | None = None) -> dict:
    """Quadruples for every pair ``i < j`` of a ray stack.

    :param polar: complex (N, L_rays, n_rad) rays.
    :param threads: worker threads; results do not depend on it.
    :return: dict ``(i, j) -> RelRotQuadruple``.
    """
    scorer = PairScorer(polar, table, backend)
    N = len(scorer.rays)
    pairs = [(i, j) for i in range(N) for j in range(i + 1, N)]
    if threads <= 1:
        results = [scorer.estimate(i, j) for i, j in pairs]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(lambda ij: scorer.estimate(*ij), pairs))
    return dict(zip(pairs, results))
