"""Command line entry point: resolve a configuration, run it, write manifest and CSVs."""

from __future__ import annotations

import argparse
import csv
import dataclasses
import sys
from pathlib import Path

from . import __version__
from .config import PRESETS, apply_scale, emit_config, load_config, preset, validate
from .errors import ManakovError
from .experiments import run_experiment
from .noise import dump_increments, sample_path

EXIT_CONFIG = 2
EXIT_IO = 3


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="smanakov", description="Stochastic Manakov equation experiments.")
    src = p.add_mutually_exclusive_group()
    src.add_argument("--config", type=Path, help="configuration or manifest file")
    src.add_argument("--preset", help="named preset (see --list-presets)")
    p.add_argument("--out", type=Path, default=Path("out"), help="output directory (default: out)")
    p.add_argument("--workers", type=int, help="worker processes (results do not depend on this)")
    p.add_argument("--seed", type=int, help="base seed, unsigned 64-bit")
    p.add_argument("--scale", type=int, default=1,
                   help="divide sample count, N_ref and every N by this factor")
    p.add_argument("--dump-increments", action="store_true",
                   help="also write each sample's finest Brownian increments as raw float64")
    p.add_argument("--list-presets", action="store_true", help="print preset names and exit")
    return p


def resolve_config(args):
    if args.config is not None:
        cfg = load_config(args.config)
    elif args.preset is not None:
        cfg = preset(args.preset)
    else:
        raise ManakovError("one of --config or --preset is required")
    if args.seed is not None:
        cfg.sampling = dataclasses.replace(cfg.sampling, seed=args.seed)
    if args.workers is not None:
        cfg.sampling = dataclasses.replace(cfg.sampling, workers=args.workers)
    validate(cfg)
    return apply_scale(cfg, args.scale)


def write_csv(path: Path, rows) -> None:
    fields = list(rows[0]) if rows else []
    for row in rows:
        for k in row:
            if k not in fields:
                fields.append(k)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=fields, lineterminator="\n")
        w.writeheader()
        for row in rows:
            # str(float) is the shortest round-trip decimal
            w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()})


def manifest_text(cfg) -> str:
    return f'code_version = "{__version__}"\n' + emit_config(cfg)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.list_presets:
        for name in sorted(PRESETS):
            print(f"{name}\t{PRESETS[name]['experiment']}")
        return 0
    try:
        cfg = resolve_config(args)
    except (ManakovError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        args.out.mkdir(parents=True, exist_ok=True)
        (args.out / "manifest.toml").write_text(manifest_text(cfg), encoding="utf-8")
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    try:
        report = run_experiment(cfg)
    except ManakovError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        for name, rows in report.tables.items():
            write_csv(args.out / f"{name}.csv", rows)
        if report.summary:
            write_csv(args.out / "summary.csv", [{"key": k, "value": v} for k, v in report.summary.items()])
        if args.dump_increments:
            inc_dir = args.out / "increments"
            inc_dir.mkdir(exist_ok=True)
            for s in range(cfg.sampling.samples):
                path = sample_path(cfg.sampling.seed, s, cfg.time.T, cfg.path_steps)
                dump_increments(path, inc_dir / f"sample_{s:05d}.bin")
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    for name in report.tables:
        print(args.out / f"{name}.csv")
    return 0
