"""D2 common-line geometry.

Rotations are 3x3 numpy arrays whose columns are the image frame: the first
two columns span the projection plane and the third is the beaming
direction.  The symmetry group is the Klein four-group ``{g1, g2, g3, g4}``
(identity and the half turns about x, y and z).
"""

from __future__ import annotations

import enum
from typing import NamedTuple

import numpy as np

from .errors import AllDegenerate, DegenerateViewPair

#: g1..g4 stacked, indexed 0..3.
KLEIN = np.array(
    [
        np.diag([1.0, 1.0, 1.0]),
        np.diag([1.0, -1.0, -1.0]),
        np.diag([-1.0, 1.0, -1.0]),
        np.diag([-1.0, -1.0, 1.0]),
    ]
)
KLEIN.setflags(write=False)

#: Diagonal sign patterns of g1..g4, handy for broadcasting.
KLEIN_DIAG = np.array([[1, 1, 1], [1, -1, -1], [-1, 1, -1], [-1, -1, 1]], dtype=float)
KLEIN_DIAG.setflags(write=False)

#: Reflection through the xy-plane.
J = np.diag([1.0, 1.0, -1.0])
J.setflags(write=False)

DEFAULT_EPS_ALIGN = 1e-6


class KleinElement(enum.IntEnum):
    G1 = 1
    G2 = 2
    G3 = 3
    G4 = 4

    @property
    def matrix(self) -> np.ndarray:
        return KLEIN[self - 1]


def klein_mul(a: KleinElement, b: KleinElement) -> KleinElement:
    """Group product of two Klein elements (``a.matrix @ b.matrix``)."""
    prod = KLEIN_DIAG[int(a) - 1] * KLEIN_DIAG[int(b) - 1]
    idx = int(np.flatnonzero((KLEIN_DIAG == prod).all(axis=1))[0])
    return KleinElement(idx + 1)


class CommonLineCoords(NamedTuple):
    """In-plane angles (radians, in ``[0, 2pi)``) of one common line."""

    alpha_ij: float
    alpha_ji: float


def is_rotation(R: np.ndarray, atol: float = 1e-12) -> bool:
    R = np.asarray(R, dtype=float)
    return (
        R.shape == (3, 3)
        and np.allclose(R.T @ R, np.eye(3), atol=atol, rtol=0)
        and abs(np.linalg.det(R) - 1.0) <= atol
    )


def conjugate_by_J(R: np.ndarray) -> np.ndarray:
    """Return ``J R J``; works on stacks of matrices too."""
    R = np.asarray(R, dtype=float)
    # J R J flips the sign of the entries (i, 3) and (3, j) for i, j != 3.
    out = R.copy()
    out[..., 2, :2] *= -1
    out[..., :2, 2] *= -1
    return out


def admissible(a: np.ndarray, b: np.ndarray, eps_align: float = DEFAULT_EPS_ALIGN):
    """True where the lines spanned by unit vectors ``a`` and ``b`` are separated
    by more than ``eps_align`` radians.  Broadcasts over leading axes."""
    dots = np.abs(np.sum(np.asarray(a) * np.asarray(b), axis=-1))
    return dots < np.cos(eps_align)


def wrap_angle(theta):
    """Map angles to ``[0, 2pi)``."""
    out = np.mod(theta, 2 * np.pi)
    # np.mod can return exactly 2pi for tiny negative inputs
    return np.where(out >= 2 * np.pi, 0.0, out)


def _unit_cross(a, b):
    c = np.cross(a, b)
    return c / np.linalg.norm(c, axis=-1, keepdims=True)


def _frame_angle(q, e1, e2):
    return wrap_angle(np.arctan2(np.sum(q * e2, axis=-1), np.sum(q * e1, axis=-1)))


def common_line_directions(
    Ri: np.ndarray, Rj: np.ndarray, eps_align: float = DEFAULT_EPS_ALIGN
) -> np.ndarray:
    """Directions of the four common lines between the images of ``Ri`` and ``Rj``.

    :param Ri: rotation of the first image.
    :param Rj: rotation of the second image.
    :param eps_align: minimal angle (radians) between ``Ri[:, 2]`` and each
        ``g_m Rj[:, 2]``.
    :return: array of shape (4, 3); row ``m`` is ``q_ij^{m+1}``.
    :raises DegenerateViewPair: when a beaming-direction pair nearly coincides.
    """
    zi = np.asarray(Ri, dtype=float)[:, 2]
    zj = KLEIN_DIAG * np.asarray(Rj, dtype=float)[:, 2]
    if not np.all(admissible(zi, zj, eps_align)):
        raise DegenerateViewPair("beaming directions coincide up to a symmetry element")
    return _unit_cross(zi, zj)


def common_line_coords(
    Ri: np.ndarray, Rj: np.ndarray, eps_align: float = DEFAULT_EPS_ALIGN
) -> list[CommonLineCoords]:
    """Local angles of the four common lines on both projection planes."""
    Ri = np.asarray(Ri, dtype=float)
    Rj = np.asarray(Rj, dtype=float)
    q = common_line_directions(Ri, Rj, eps_align)
    gRj = KLEIN @ Rj
    a_ij = _frame_angle(q, Ri[:, 0], Ri[:, 1])
    a_ji = _frame_angle(q, gRj[:, :, 0], gRj[:, :, 1])
    return [CommonLineCoords(float(a), float(b)) for a, b in zip(a_ij, a_ji)]


def self_common_line_coords(
    Ri: np.ndarray, eps_align: float = DEFAULT_EPS_ALIGN
) -> list[CommonLineCoords | None]:
    """Self common lines of one image, for m = 2, 3, 4.

    Entries whose line is undefined (``g_m Ri[:, 2]`` parallel to ``Ri[:, 2]``)
    are ``None``.

    :raises AllDegenerate: if none of the three lines is defined.
    """
    Ri = np.asarray(Ri, dtype=float)
    z = Ri[:, 2]
    out: list[CommonLineCoords | None] = []
    for g in KLEIN[1:]:
        gz = g @ z
        if not admissible(z, gz, eps_align):
            out.append(None)
            continue
        q = _unit_cross(z, gz)
        gR = g @ Ri
        out.append(
            CommonLineCoords(
                float(_frame_angle(q, Ri[:, 0], Ri[:, 1])),
                float(_frame_angle(q, gR[:, 0], gR[:, 1])),
            )
        )
    if all(c is None for c in out):
        raise AllDegenerate("beaming direction lies on a symmetry axis")
    return out


def relative_quadruple(Ri: np.ndarray, Rj: np.ndarray) -> np.ndarray:
    """``(Ri^T g_m Rj)_{m=1..4}`` as a (4, 3, 3) array."""
    return np.einsum("ba,mbc,cd->mad", Ri, KLEIN, Rj)


def rotation_about(axis: str | np.ndarray, angle: float) -> np.ndarray:
    """Right-handed rotation by ``angle`` radians about a coordinate axis or vector."""
    if isinstance(axis, str):
        axis = {"x": [1.0, 0, 0], "y": [0, 1.0, 0], "z": [0, 0, 1.0]}[axis]
    k = np.asarray(axis, dtype=float)
    k = k / np.linalg.norm(k)
    K = np.array([[0, -k[2], k[1]], [k[2], 0, -k[0]], [-k[1], k[0], 0]])
    return np.eye(3) + np.sin(angle) * K + (1 - np.cos(angle)) * (K @ K)


def geodesic_angle(A: np.ndarray, B: np.ndarray):
    """Rotation angle of ``A^T B`` in radians; broadcasts over stacks.

    Uses ``||A - B||_F = 2 sqrt(2) sin(angle / 2)``, which stays accurate for
    tiny angles where the trace formula loses half the digits.
    """
    chord = np.sqrt(np.sum((np.asarray(A) - np.asarray(B)) ** 2, axis=(-2, -1)))
    return 2.0 * np.arcsin(np.clip(chord / (2.0 * np.sqrt(2.0)), 0.0, 1.0))
