"""Synthetic ground truth: D2 phantoms, analytic projections, Fourier rays and
corrupted relative-rotation quadruples."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.transform import Rotation as ScipyRotation

from .errors import InvalidParam
from .geom import KLEIN_DIAG, conjugate_by_J, relative_quadruple

DEFAULT_SIDE = 65
DEFAULT_N_RAD = 32
#: outermost radial node as a fraction of the Nyquist radius
DEFAULT_BAND = 1.0 / 3.0


@dataclass(frozen=True)
class Phantom:
    """Sum of isotropic Gaussian blobs, already closed under the symmetry group.

    Each blob contributes ``amplitude * exp(-|r - center|^2 / (2 sigma^2))``.
    """

    centers: np.ndarray
    sigmas: np.ndarray
    amplitudes: np.ndarray

    def density(self, r: np.ndarray) -> np.ndarray:
        r = np.atleast_2d(r)
        d2 = ((r[:, None, :] - self.centers[None]) ** 2).sum(-1)
        return (self.amplitudes * np.exp(-d2 / (2 * self.sigmas**2))).sum(-1)

    def mirrored(self) -> "Phantom":
        """The mirror image ``r -> J r``."""
        return Phantom(self.centers * [1.0, 1.0, -1.0], self.sigmas, self.amplitudes)


def d2_phantom(centers, sigmas, amplitudes=None) -> Phantom:
    """Expand blobs to their orbits under the Klein group.

    Orbit members are kept with multiplicity, so a blob on a symmetry axis is
    counted more than once, exactly as the symmetrized sum prescribes.

    :param centers: (n, 3) blob centers.
    :param sigmas: (n,) positive widths.
    :param amplitudes: (n,) weights, default 1.
    """
    centers = np.atleast_2d(np.asarray(centers, dtype=float))
    if centers.size == 0:
        raise InvalidParam("phantom needs at least one blob")
    n = len(centers)
    sigmas = np.broadcast_to(np.asarray(sigmas, dtype=float), (n,))
    amplitudes = np.ones(n) if amplitudes is None else np.broadcast_to(np.asarray(amplitudes, float), (n,))
    if np.any(sigmas <= 0):
        raise InvalidParam("blob sigmas must be positive")
    orbit = (KLEIN_DIAG[:, None, :] * centers[None]).reshape(-1, 3)
    return Phantom(orbit, np.tile(sigmas, 4), np.tile(amplitudes, 4))


def random_phantom(rng: np.random.Generator, n_blobs: int = 6, radius: float = 18.0) -> Phantom:
    """A generic (no extra symmetry) phantom sized for the default 65-pixel image."""
    dirs = rng.standard_normal((n_blobs, 3))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    centers = dirs * radius * rng.uniform(0.3, 1.0, (n_blobs, 1))
    return d2_phantom(centers, rng.uniform(1.8, 3.2, n_blobs), rng.uniform(0.5, 1.5, n_blobs))


def pixel_coords(side: int, pixel_size: float = 1.0) -> np.ndarray:
    return (np.arange(side) - side // 2) * pixel_size


def project(phantom: Phantom, R: np.ndarray, side: int = DEFAULT_SIDE, pixel_size: float = 1.0) -> np.ndarray:
    """Line integral of the phantom along ``R[:, 2]``.

    Image rows follow ``R[:, 1]`` and columns follow ``R[:, 0]``.
    """
    if side < 8:
        raise InvalidParam(f"image side must be >= 8, got {side}")
    local = phantom.centers @ np.asarray(R, dtype=float)
    x = pixel_coords(side, pixel_size)
    s2 = 2 * phantom.sigmas**2
    gx = np.exp(-((x[None, :] - local[:, 0:1]) ** 2) / s2[:, None])
    gy = np.exp(-((x[None, :] - local[:, 1:2]) ** 2) / s2[:, None])
    w = phantom.amplitudes * np.sqrt(2 * np.pi) * phantom.sigmas
    return np.einsum("b,by,bx->yx", w, gy, gx)


def add_noise(images: np.ndarray, snr: float, rng: np.random.Generator) -> np.ndarray:
    """Add white Gaussian noise so that signal variance / noise variance = ``snr``."""
    if not np.isfinite(snr):
        return np.array(images, dtype=float)
    if snr <= 0:
        raise InvalidParam(f"SNR must be positive, got {snr}")
    images = np.asarray(images, dtype=float)
    sigma = np.sqrt(images.var() / snr)
    return images + sigma * rng.standard_normal(images.shape)


def radial_nodes(n_rad: int, pixel_size: float = 1.0, band: float = DEFAULT_BAND) -> np.ndarray:
    return np.arange(1, n_rad + 1) * (band * np.pi / pixel_size) / n_rad


def polar_fourier(
    image: np.ndarray,
    L_rays: int = 360,
    n_rad: int = DEFAULT_N_RAD,
    pixel_size: float = 1.0,
    band: float = DEFAULT_BAND,
) -> np.ndarray:
    """Fourier rays of an image by direct summation at polar nodes.

    Ray ``r`` lies at angle ``2 pi r / L_rays``; sample ``s`` at radius
    ``s * band * pi / (n_rad * pixel_size)`` for ``s = 1..n_rad``.

    :return: complex (L_rays, n_rad) array.
    """
    if L_rays % 2 or L_rays < 2:
        raise InvalidParam(f"L_rays must be even, got {L_rays}")
    if n_rad < 2:
        raise InvalidParam(f"n_rad must be >= 2, got {n_rad}")
    image = np.asarray(image, dtype=float)
    x = pixel_coords(image.shape[0], pixel_size)
    half = L_rays // 2
    t = 2 * np.pi * np.arange(half) / L_rays
    xi = radial_nodes(n_rad, pixel_size, band)
    kx = (np.cos(t)[:, None] * xi[None]).ravel()
    ky = (np.sin(t)[:, None] * xi[None]).ravel()
    Ex = np.exp(-1j * kx[:, None] * x[None])
    Ey = np.exp(-1j * ky[:, None] * x[None])
    F = np.sum((Ey @ image) * Ex, axis=1).reshape(half, n_rad)
    # the antipodal rays of a real image are exact conjugates
    return np.concatenate([F, F.conj()])


def polar_fourier_stack(images, L_rays=360, n_rad=DEFAULT_N_RAD, pixel_size=1.0, band=DEFAULT_BAND):
    return np.stack([polar_fourier(im, L_rays, n_rad, pixel_size, band) for im in images])


def random_rotations(n: int, rng: np.random.Generator) -> np.ndarray:
    """``n`` Haar-distributed rotations, (n, 3, 3)."""
    return ScipyRotation.random(n, random_state=rng).as_matrix()


@dataclass(frozen=True)
class CorruptionSpec:
    """How to damage true quadruples.

    :param permute: shuffle the four members of every quadruple.
    :param jflip_prob: chance of replacing a quadruple by its J-conjugate.
    :param outlier_prob: chance of replacing a quadruple by that of a random pair.
    :param noise_sigma: per-axis std (radians) of a random rotation applied to each member.
    """

    permute: bool = False
    jflip_prob: float = 0.0
    outlier_prob: float = 0.0
    noise_sigma: float = 0.0

    def __post_init__(self):
        for p in (self.jflip_prob, self.outlier_prob):
            if not 0.0 <= p <= 1.0:
                raise InvalidParam(f"probabilities must lie in [0, 1], got {p}")
        if self.noise_sigma < 0:
            raise InvalidParam("noise_sigma must be non-negative")


@dataclass
class CorruptionRecord:
    """What ``synth_quadruples`` did to each pair."""

    perms: dict = field(default_factory=dict)
    flipped: set = field(default_factory=set)
    outliers: set = field(default_factory=set)


def synth_quadruples(rotations, corruption: CorruptionSpec = CorruptionSpec(), seed=0, return_info=False):
    """Relative-rotation quadruples ``(Ri^T g_m Rj)_m`` for all ``i < j``.

    :param rotations: (N, 3, 3) true rotations.
    :param corruption: damage to apply.
    :param seed: RNG seed; the output is a deterministic function of it.
    :param return_info: also return a :class:`CorruptionRecord`.
    :return: dict ``(i, j) -> (4, 3, 3)`` array.
    """
    R = np.asarray(rotations, dtype=float)
    N = len(R)
    if N < 3:
        raise InvalidParam(f"need N >= 3 rotations, got {N}")
    rng = np.random.default_rng(seed)
    info = CorruptionRecord()
    out = {}
    for i in range(N):
        for j in range(i + 1, N):
            quad = relative_quadruple(R[i], R[j])
            if rng.random() < corruption.outlier_prob:
                A, B = random_rotations(2, rng)
                quad = relative_quadruple(A, B)
                info.outliers.add((i, j))
            if rng.random() < corruption.jflip_prob:
                quad = conjugate_by_J(quad)
                info.flipped.add((i, j))
            perm = rng.permutation(4) if corruption.permute else np.arange(4)
            quad = quad[perm]
            info.perms[(i, j)] = perm
            if corruption.noise_sigma > 0:
                jitter = ScipyRotation.from_rotvec(corruption.noise_sigma * rng.standard_normal((4, 3)))
                quad = quad @ jitter.as_matrix()
            out[(i, j)] = quad
    return (out, info) if return_info else out


@dataclass
class SimulatedData:
    rotations: np.ndarray
    images: np.ndarray
    pixel_size: float
    phantom: Phantom


def simulate_dataset(
    n_images: int,
    seed: int = 0,
    side: int = DEFAULT_SIDE,
    pixel_size: float = 1.0,
    snr: float = np.inf,
    phantom: Phantom | None = None,
) -> SimulatedData:
    """Random rotations, a random phantom (unless given) and its projections."""
    if n_images < 1:
        raise InvalidParam("n_images must be positive")
    rng = np.random.default_rng(seed)
    if phantom is None:
        phantom = random_phantom(rng, radius=0.28 * side * pixel_size)
    rots = random_rotations(n_images, rng)
    images = np.stack([project(phantom, R, side, pixel_size) for R in rots])
    images = add_noise(images, snr, rng)
    return SimulatedData(rots, images, pixel_size, phantom)


__all__ = [
    "Phantom",
    "d2_phantom",
    "random_phantom",
    "project",
    "add_noise",
    "polar_fourier",
    "polar_fourier_stack",
    "random_rotations",
    "CorruptionSpec",
    "CorruptionRecord",
    "synth_quadruples",
    "SimulatedData",
    "simulate_dataset",
]
