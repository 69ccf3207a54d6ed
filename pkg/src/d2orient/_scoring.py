"""Candidate-search kernels and backend selection.

The compiled kernel from ``_cscore`` is used when it is importable and the
environment variable ``D2ORIENT_PURE`` is unset or ``0``; otherwise the numpy
implementation below runs.  Both return identical candidates.
"""

from __future__ import annotations

import os

import numpy as np

_CHUNK = 64


def best_candidate_numpy(corr, self_a, self_b, expo, pair_dirs, pair_base, shift):
    """Numpy twin of ``_cscore.best_candidate``.

    :param corr: (R, R) clamped ray correlations between the two images.
    :param self_a: (K, L) products of the clamped self-line factors of image a.
    :param self_b: same for image b.
    :param expo: (P,) exponent turning the per-pair product into the final score.
    :param pair_dirs: (P, 2) beaming-direction indices.
    :param pair_base: (P, 4, 2) ray indices at in-plane index 0.
    :param shift: ray shift per in-plane step.
    :return: ``(score, p, l1, l2)``; ``p = -1`` when every candidate scores 0.
    """
    R = corr.shape[0]
    L = self_a.shape[1]
    steps = np.arange(L) * shift
    pair_dirs = np.asarray(pair_dirs)
    cand = []
    for s in range(0, len(pair_dirs), _CHUNK):
        dirs = pair_dirs[s : s + _CHUNK]
        base = np.asarray(pair_base[s : s + _CHUNK], dtype=np.int64)
        rows = (base[:, None, :, 0] - steps[None, :, None]) % R
        cols = (base[:, None, :, 1] - steps[None, :, None]) % R
        prod = self_a[dirs[:, 0]][:, :, None] * self_b[dirs[:, 1]][:, None, :]
        for m in range(4):
            prod = prod * corr[rows[:, :, None, m], cols[:, None, :, m]]
        flat = prod.reshape(len(dirs), -1)
        arg = flat.argmax(axis=1)
        top = flat[np.arange(len(dirs)), arg]
        for q in np.flatnonzero(top > 0):
            cand.append((s + q, arg[q] // L, arg[q] % L, top[q]))
    if not cand:
        return 0.0, -1, 0, 0
    p, l1, l2, top = (np.array(c) for c in zip(*cand))
    p = p.astype(np.int64)
    score = np.power(top, np.asarray(expo)[p])
    key_l = pair_dirs[p, 0].astype(np.int64) * L + l1
    key_r = pair_dirs[p, 1].astype(np.int64) * L + l2
    order = np.lexsort((key_r, key_l, -score))
    b = order[0]
    return float(score[b]), int(p[b]), int(l1[b]), int(l2[b])


def _load_compiled():
    if os.environ.get("D2ORIENT_PURE", "0") not in ("", "0"):
        return None
    try:
        from . import _cscore
    except ImportError:
        return None
    return _cscore.best_candidate


_compiled = _load_compiled()
BACKEND = "cython" if _compiled is not None else "numpy"


def best_candidate(corr, self_a, self_b, expo, pair_dirs, pair_base, shift, backend=None):
    """Dispatch to the selected kernel; ``backend`` may force ``"numpy"`` or ``"cython"``."""
    backend = backend or BACKEND
    if backend == "cython":
        if _compiled is None:
            raise RuntimeError("compiled scoring kernel is not available")
        return _compiled(
            np.ascontiguousarray(corr, dtype=np.float64),
            np.ascontiguousarray(self_a, dtype=np.float64),
            np.ascontiguousarray(self_b, dtype=np.float64),
            np.ascontiguousarray(expo, dtype=np.float64),
            np.ascontiguousarray(pair_dirs, dtype=np.int32),
            np.ascontiguousarray(pair_base, dtype=np.int32),
            int(shift),
        )
    return best_candidate_numpy(corr, self_a, self_b, expo, pair_dirs, pair_base, shift)
