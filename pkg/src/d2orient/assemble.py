"""Assemble rotations from synchronized rows and score them against ground truth."""

from __future__ import annotations

import io
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import IllConditionedWarning, InvalidParam
from .geom import KLEIN, conjugate_by_J, geodesic_angle
from .linalg import nearest_rotation

COND_LIMIT = 1e3
REFINE_ROUNDS = 5


@dataclass
class OrientationEstimate:
    rotations: np.ndarray
    ill_conditioned: list = field(default_factory=list)


def assemble_rotations(rows1, rows2, rows3) -> OrientationEstimate:
    """Stack three row fields into rotations.

    Each stacked matrix is projected onto the orthogonal group and negated
    if its determinant is -1.

    :param rows1: (N, 3) rows of the first color class; likewise ``rows2``, ``rows3``.
    """
    rows = [np.asarray(r, dtype=float) for r in (rows1, rows2, rows3)]
    if len({r.shape for r in rows}) != 1 or rows[0].ndim != 2 or rows[0].shape[1] != 3:
        raise InvalidParam("row fields must all have shape (N, 3)")
    M = np.stack(rows, axis=1)
    cond = np.linalg.cond(M)
    bad = [int(i) for i in np.flatnonzero(~(cond <= COND_LIMIT))]
    if bad:
        warnings.warn(f"stacked rows ill-conditioned for images {bad}", IllConditionedWarning)
    Rot = nearest_rotation(M)
    Rot[np.linalg.det(Rot) < 0] *= -1
    return OrientationEstimate(Rot, bad)


@dataclass
class AlignmentReport:
    """Per-image geodesic errors after removing the global rotation, hand and symmetry gauge.

    ``est_i`` (J-conjugated when ``j_conjugated``) is compared with
    ``global_rotation @ g_{klein[i]} @ truth_i``.
    """

    per_image_error: np.ndarray
    j_conjugated: bool
    global_rotation: np.ndarray
    klein: np.ndarray

    @property
    def mean_error(self) -> float:
        return float(np.mean(self.per_image_error))

    @property
    def median_error(self) -> float:
        return float(np.median(self.per_image_error))

    def summary(self) -> dict:
        deg = np.degrees(self.per_image_error)
        return {
            "n_images": len(deg),
            "mean_error_deg": f"{deg.mean():.6f}",
            "median_error_deg": f"{np.median(deg):.6f}",
            "max_error_deg": f"{deg.max():.6f}",
            "j_conjugated": str(bool(self.j_conjugated)).lower(),
        }

    def to_text(self) -> str:
        out = io.StringIO()
        out.write(f"{'image':>6} {'error_deg':>12} {'g':>3}\n")
        for i, (e, m) in enumerate(zip(self.per_image_error, self.klein)):
            out.write(f"{i:>6d} {np.degrees(e):>12.6f} {m + 1:>3d}\n")
        out.write("\n")
        for k, v in self.summary().items():
            out.write(f"{k}={v}\n")
        return out.getvalue()


def _gauge_errors(E, T, O):
    """Errors (N, 4) of ``E_i`` against ``O g_m T_i``."""
    cand = np.einsum("ab,mbc,ncd->nmad", O, KLEIN, T)
    return geodesic_angle(E[:, None], cand)


def _register(E, T):
    best = None
    for r in range(len(E)):
        for m in range(4):
            O = E[r] @ T[r].T @ KLEIN[m]
            for _ in range(REFINE_ROUNDS):
                err = _gauge_errors(E, T, O)
                ms = err.argmin(axis=1)
                M = np.einsum("nab,ncb,ncd->ad", E, T, KLEIN[ms])
                O_new = nearest_rotation(M)
                if np.linalg.det(O_new) < 0:
                    U, _, Vt = np.linalg.svd(M)
                    U[:, -1] *= -1
                    O_new = U @ Vt
                if np.allclose(O_new, O, atol=1e-14, rtol=0):
                    break
                O = O_new
            err = _gauge_errors(E, T, O)
            ms = err.argmin(axis=1)
            e = err[np.arange(len(E)), ms]
            if best is None or e.mean() < best[0].mean() - 1e-15:
                best = (e, O, ms)
    return best


def align_and_score(est, truth) -> AlignmentReport:
    """Compare estimated rotations with the truth modulo every ambiguity.

    :param est: :class:`OrientationEstimate` or (N, 3, 3) array.
    :param truth: (N, 3, 3) true rotations.
    """
    E = np.asarray(getattr(est, "rotations", est), dtype=float)
    T = np.asarray(truth, dtype=float)
    if E.shape != T.shape or len(E) < 2:
        raise InvalidParam("estimate and truth must hold the same number (>= 2) of rotations")
    plain = _register(E, T)
    mirrored = _register(conjugate_by_J(E), T)
    if mirrored[0].mean() < plain[0].mean():
        return AlignmentReport(mirrored[0], True, mirrored[1], mirrored[2])
    return AlignmentReport(plain[0], False, plain[1], plain[2])
