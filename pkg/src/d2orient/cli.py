"""Command-line entry point ``d2orient``."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import io
from .assemble import align_and_score, assemble_rotations
from .commonlines import estimate_all
from .errors import D2OrientError
from .grid import cached_candidate_table
from .handsync import synchronize_hands
from .pairs import infer_n
from .pipeline import PipelineConfig, read_config, resolve_threads, run_pipeline, run_sync, stage
from .rowsync import synchronize_rows
from .signsync import adjust_signs
from .simulate import polar_fourier_stack, simulate_dataset, synth_quadruples

# flag name -> PipelineConfig field; every flag defaults to None so that only
# explicitly given flags override the config file
_CONFIG_FLAGS = {
    "K": int,
    "L": int,
    "L_rays": int,
    "n_rad": int,
    "band": float,
    "eps_align": float,
    "seed": int,
    "n_images": int,
    "side": int,
    "pixel_size": float,
    "snr": float,
    "jflip_prob": float,
    "outlier_prob": float,
    "noise_sigma": float,
    "threads": int,
    "table_cache": str,
}


def _add_config_flags(p: argparse.ArgumentParser, names) -> None:
    p.add_argument("--config", help="key=value configuration file; flags override it")
    for name in names:
        flag = "--" + name.replace("_", "-")
        aliases = [flag, "--n"] if name == "n_images" else [flag]
        p.add_argument(*aliases, dest=name, type=_CONFIG_FLAGS[name], default=None)
    if "jflip_prob" in names:
        p.add_argument("--permute", action="store_const", const=True, default=None)


def _config(args) -> PipelineConfig:
    values = read_config(args.config) if getattr(args, "config", None) else {}
    for name in list(_CONFIG_FLAGS) + ["permute"]:
        v = getattr(args, name, None)
        if v is not None:
            values[name] = v
    return PipelineConfig(**values)


_SIM = ["seed", "n_images", "side", "pixel_size", "snr"]
_CORRUPT = ["jflip_prob", "outlier_prob", "noise_sigma"]
_GRID = ["K", "L", "L_rays", "n_rad", "band", "eps_align", "table_cache"]


def cmd_simulate(args) -> int:
    cfg = _config(args)
    sim = simulate_dataset(cfg.n_images, cfg.seed, cfg.side, cfg.pixel_size, cfg.snr)
    io.write_images(args.images, sim.images, sim.pixel_size)
    io.write_rotations(args.rotations, sim.rotations)
    if args.quadruples:
        quads = synth_quadruples(sim.rotations, cfg.corruption, seed=cfg.seed + 1)
        io.write_quadruples(args.quadruples, quads, cfg.n_images)
    return 0


def cmd_estimate(args) -> int:
    cfg = _config(args)
    images, pixel_size = io.read_images(args.images)
    with stage("estimate"):
        table = cached_candidate_table(cfg.K, cfg.L, cfg.L_rays, cfg.eps_align, cfg.table_cache)
        rays = polar_fourier_stack(images, cfg.L_rays, cfg.n_rad, pixel_size, cfg.band)
        est = estimate_all(rays, table, threads=resolve_threads(cfg.threads))
    io.write_quadruples(args.out, est, len(images))
    return 0


def cmd_handsync(args) -> int:
    quads = io.read_quadruples(args.quadruples)
    with stage("handsync"):
        res = synchronize_hands(quads)
    io.write_quadruples(args.out, res.quadruples, infer_n(quads))
    print(f"flipped={len(res.flipped)}")
    return 0


def cmd_rowsync(args) -> int:
    quads = io.read_quadruples(args.quadruples)
    with stage("rowsync"):
        sets, _, _ = synchronize_rows(quads)
    io.write_color_sets(args.out, sets, infer_n(quads))
    return 0


def cmd_signsync(args) -> int:
    sets = io.read_color_sets(args.colors)
    threads = resolve_threads(args.threads)
    with stage("signsync"):
        fields = [adjust_signs(s, threads=threads) for s in sets]
    io.write_rotations(args.out, np.stack([f.rows for f in fields], axis=1))
    return 0


def cmd_assemble(args) -> int:
    rows = io.read_rotations(args.rows)
    with stage("assemble"):
        est = assemble_rotations(rows[:, 0], rows[:, 1], rows[:, 2])
    io.write_rotations(args.out, est.rotations)
    return 0


def _emit_report(report, path) -> None:
    if path:
        Path(path).write_text(report.to_text())
    for k, v in report.summary().items():
        print(f"{k}={v}")


def cmd_eval(args) -> int:
    with stage("eval"):
        report = align_and_score(io.read_rotations(args.estimate), io.read_rotations(args.truth))
    _emit_report(report, args.report)
    return 0


def cmd_pipeline(args) -> int:
    cfg = _config(args)
    if args.dump_dir:
        cfg = cfg.replace(dump_dir=args.dump_dir)
    truth = io.read_rotations(args.truth) if args.truth else None
    if args.images:
        images, pixel_size = io.read_images(args.images)
        res = run_pipeline(cfg.replace(pixel_size=pixel_size), images=images, truth=truth)
    else:
        res = run_pipeline(cfg, truth=truth)
    if args.out:
        io.write_rotations(args.out, res.estimate.rotations)
    for k, v in res.diagnostics.items():
        print(f"{k}={v}")
    if res.report is not None:
        _emit_report(res.report, args.report)
    return 0


def cmd_sync(args) -> int:
    cfg = _config(args)
    quads = io.read_quadruples(args.quadruples)
    est, diag = run_sync(quads, resolve_threads(cfg.threads), args.dump_dir)
    if args.out:
        io.write_rotations(args.out, est.rotations)
    for k, v in diag.items():
        print(f"{k}={v}")
    if args.truth:
        with stage("eval"):
            _emit_report(align_and_score(est, io.read_rotations(args.truth)), args.report)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="d2orient", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="simulate images (and optionally quadruples) with known rotations")
    _add_config_flags(p, _SIM + _CORRUPT)
    p.add_argument("--images", required=True, help="output D2IMGS stack")
    p.add_argument("--rotations", required=True, help="output true rotations (text)")
    p.add_argument("--quadruples", help="also write exact (optionally corrupted) D2QUAD quadruples")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("estimate", help="relative rotations from images by common-line search")
    _add_config_flags(p, _GRID + ["threads"])
    p.add_argument("--images", required=True)
    p.add_argument("--out", required=True, help="output D2QUAD file")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("handsync", help="make all quadruples hand-consistent")
    p.add_argument("--quadruples", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_handsync)

    p = sub.add_parser("rowsync", help="split hand-consistent quadruples into three color sets")
    p.add_argument("--quadruples", required=True)
    p.add_argument("--out", required=True, help="output D2CSET file")
    p.set_defaults(func=cmd_rowsync)

    p = sub.add_parser("signsync", help="recover the rows of every color set")
    p.add_argument("--colors", required=True)
    p.add_argument("--out", required=True, help="output stacked rows (rotations text format)")
    p.add_argument("--threads", type=int, default=None)
    p.set_defaults(func=cmd_signsync)

    p = sub.add_parser("assemble", help="project stacked rows onto rotations")
    p.add_argument("--rows", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_assemble)

    p = sub.add_parser("eval", help="score estimated rotations against the truth")
    p.add_argument("--estimate", required=True)
    p.add_argument("--truth", required=True)
    p.add_argument("--report", help="write the per-image table here")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("pipeline", help="run every stage from images (or a simulation)")
    _add_config_flags(p, list(_CONFIG_FLAGS))
    src = p.add_mutually_exclusive_group()
    src.add_argument("--simulate", action="store_true", help="use a seeded simulation (default)")
    src.add_argument("--images", help="input D2IMGS stack")
    p.add_argument("--truth", help="true rotations for scoring")
    p.add_argument("--out", help="output rotations")
    p.add_argument("--report", help="write the per-image table here")
    p.add_argument("--dump-dir", help="write intermediate artifacts here")
    p.set_defaults(func=cmd_pipeline)

    p = sub.add_parser("sync", help="run everything after common-line estimation")
    _add_config_flags(p, ["threads"])
    p.add_argument("--quadruples", required=True)
    p.add_argument("--truth")
    p.add_argument("--out")
    p.add_argument("--report")
    p.add_argument("--dump-dir")
    p.set_defaults(func=cmd_sync)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except D2OrientError as exc:
        where = f"[{exc.stage}] " if exc.stage else ""
        print(f"d2orient: error: {where}{type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"d2orient: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
