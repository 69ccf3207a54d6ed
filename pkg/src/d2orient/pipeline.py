"""End-to-end orchestration of the estimation stages."""

from __future__ import annotations

import contextlib
import dataclasses
import math
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import io
from .assemble import AlignmentReport, OrientationEstimate, align_and_score, assemble_rotations
from .commonlines import estimate_all
from .errors import D2OrientError, InvalidParam
from .grid import DEFAULT_K, DEFAULT_L, DEFAULT_RAYS, GRID_EPS_ALIGN, cached_candidate_table
from .handsync import synchronize_hands
from .rowsync import synchronize_rows
from .signsync import adjust_signs
from .simulate import DEFAULT_BAND, DEFAULT_N_RAD, DEFAULT_SIDE, CorruptionSpec, polar_fourier_stack, simulate_dataset

STAGES = ("estimate", "handsync", "rowsync", "signsync", "assemble", "eval")


def resolve_threads(threads: int | None = None) -> int:
    """Explicit value, else ``D2ORIENT_THREADS``, else the available cores."""
    if threads is None:
        env = os.environ.get("D2ORIENT_THREADS", "").strip()
        threads = int(env) if env else (len(os.sched_getaffinity(0)) if hasattr(os, "sched_getaffinity") else os.cpu_count() or 1)
    if threads < 1:
        raise InvalidParam(f"threads must be positive, got {threads}")
    return threads


@dataclass
class PipelineConfig:
    K: int = DEFAULT_K
    L: int = DEFAULT_L
    L_rays: int = DEFAULT_RAYS
    n_rad: int = DEFAULT_N_RAD
    band: float = DEFAULT_BAND
    eps_align: float = GRID_EPS_ALIGN
    seed: int = 0
    n_images: int = 20
    side: int = DEFAULT_SIDE
    pixel_size: float = 1.0
    snr: float = math.inf
    permute: bool = False
    jflip_prob: float = 0.0
    outlier_prob: float = 0.0
    noise_sigma: float = 0.0
    skip_estimate: bool = False
    threads: int | None = None
    table_cache: str | None = None
    dump_dir: str | None = None

    def __post_init__(self):
        for name in ("K", "L", "L_rays", "n_rad", "n_images", "side"):
            if getattr(self, name) <= 0:
                raise InvalidParam(f"{name} must be positive")
        if not (self.snr > 0):
            raise InvalidParam("snr must be positive or inf")

    @property
    def corruption(self) -> CorruptionSpec:
        return CorruptionSpec(self.permute, self.jflip_prob, self.outlier_prob, self.noise_sigma)

    def replace(self, **changes) -> "PipelineConfig":
        return dataclasses.replace(self, **changes)


def _coerce(value: str, typ):
    typ = str(typ)
    if "bool" in typ:
        if value.lower() in ("1", "true", "yes", "on"):
            return True
        if value.lower() in ("0", "false", "no", "off"):
            return False
        raise InvalidParam(f"not a boolean: {value!r}")
    if value.lower() in ("none", ""):
        return None
    if "int" in typ:
        return int(value)
    if "float" in typ:
        return float(value)
    return value


def read_config(path: str | os.PathLike) -> dict:
    """Parse ``key=value`` lines (``#`` starts a comment) into typed overrides."""
    types = {f.name: f.type for f in dataclasses.fields(PipelineConfig)}
    out = {}
    for n, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key = key.strip()
        if not sep or key not in types:
            raise InvalidParam(f"{path}:{n}: unknown or malformed entry {line!r}")
        out[key] = _coerce(value.strip(), types[key])
    return out


@contextlib.contextmanager
def stage(name: str):
    try:
        yield
    except D2OrientError as exc:
        if exc.stage is None:
            exc.stage = name
        raise


@dataclass
class PipelineResult:
    estimate: OrientationEstimate
    quadruples: dict
    report: AlignmentReport | None = None
    truth: np.ndarray | None = None
    diagnostics: dict = field(default_factory=dict)


def run_sync(quads: dict, threads: int = 1, dump_dir=None) -> tuple[OrientationEstimate, dict]:
    """Hand, row and sign synchronization followed by assembly."""
    quads = {k: getattr(v, "mats", v) for k, v in quads.items()}
    N = max(max(k) for k in quads) + 1
    diag = {}
    with stage("handsync"):
        hands = synchronize_hands(quads)
        diag["hand_flips"] = len(hands.flipped)
    with stage("rowsync"):
        sets, _, _ = synchronize_rows(hands.quadruples)
    with stage("signsync"):
        fields = [adjust_signs(s, threads=threads) for s in sets]
        diag["degenerate_dots"] = sum(f.degenerate_dots for f in fields)
    with stage("assemble"):
        est = assemble_rotations(*(f.rows for f in fields))
        diag["ill_conditioned"] = len(est.ill_conditioned)
    if dump_dir is not None:
        d = Path(dump_dir)
        d.mkdir(parents=True, exist_ok=True)
        io.write_quadruples(d / "handsync.d2quad", hands.quadruples, N)
        io.write_color_sets(d / "colors.d2cset", sets, N)
        io.write_rotations(d / "rows.txt", np.stack([f.rows for f in fields], axis=1))
        io.write_rotations(d / "rotations.txt", est.rotations)
    return est, diag


def run_pipeline(config: PipelineConfig, images=None, quadruples=None, truth=None) -> PipelineResult:
    """Run the stages in order.

    Inputs, by priority: ``quadruples`` (skips common-line estimation),
    ``images`` (an (N, side, side) stack), or a seeded simulation when both
    are ``None``.  With ``config.skip_estimate`` and no quadruples, exact
    quadruples are synthesized from the simulated truth and damaged per the
    corruption settings.
    """
    threads = resolve_threads(config.threads)
    diag = {}
    pixel_size = config.pixel_size
    if quadruples is None and images is None:
        sim = simulate_dataset(config.n_images, config.seed, config.side, config.pixel_size, config.snr)
        truth = sim.rotations if truth is None else truth
        images = sim.images
        if config.skip_estimate:
            from .simulate import synth_quadruples

            quadruples = synth_quadruples(truth, config.corruption, seed=config.seed + 1)
    if quadruples is None:
        with stage("estimate"):
            table = cached_candidate_table(config.K, config.L, config.L_rays, config.eps_align, config.table_cache)
            rays = polar_fourier_stack(images, config.L_rays, config.n_rad, pixel_size, config.band)
            estimated = estimate_all(rays, table, threads=threads)
            quadruples = {k: v.mats for k, v in estimated.items()}
            diag["mean_score"] = float(np.mean([v.score for v in estimated.values()]))
        if config.dump_dir is not None:
            Path(config.dump_dir).mkdir(parents=True, exist_ok=True)
            io.write_quadruples(Path(config.dump_dir) / "estimate.d2quad", quadruples, len(images))
    est, sync_diag = run_sync(quadruples, threads, config.dump_dir)
    diag.update(sync_diag)
    report = None
    if truth is not None:
        with stage("eval"):
            report = align_and_score(est, truth)
    return PipelineResult(est, quadruples, report, truth, diag)
