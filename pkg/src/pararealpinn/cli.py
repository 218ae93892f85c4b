"""Command-line front end: ``pararealpinn {train,solve,parareal,sweep,bench}``."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import experiments as ex
from .config import ConfigError, load_config, validate
from .pinn import CheckpointError, TrainingDivergedError, save_checkpoint
from .parareal import PararealError

DEFAULT_VARIANTS = {
    "solve": ["numerical"],
    "parareal": ["numerical"],
    "sweep": ["pinn"],
    "bench": ["numerical", "pinn"],
}


def _int_list(text: str) -> list:
    return [int(x) for x in text.split(",") if x.strip()]


def _float_list(text: str) -> list:
    return [float(x) for x in text.split(",") if x.strip()]


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="config file (default: $PARAREALPINN_CONFIG)")
    common.add_argument("--seed", type=int, help="training / sampling seed")
    common.add_argument("--checkpoint", help="physics-informed network checkpoint")
    common.add_argument("--nn-checkpoint", help="data-only network checkpoint")
    common.add_argument("--out", help="output directory")
    common.add_argument("--workers", type=int, help="worker threads for fine sweeps")
    common.add_argument("--repetitions", type=int, help="timing repetitions (bench)")
    common.add_argument("--variant", action="append", choices=ex.VARIANTS,
                        help="coarse propagator / network variant; repeatable")

    p = argparse.ArgumentParser(prog="pararealpinn",
                                description="Parareal with numerical and network coarse propagators "
                                            "for the Black-Scholes equation.")
    sub = p.add_subparsers(dest="command", required=True)
    t = sub.add_parser("train", parents=[common], help="train a network, write checkpoint and loss CSV")
    t.add_argument("--supervised", action="store_true",
                   help="fit fine-solver samples only (no PDE terms)")
    sub.add_parser("solve", parents=[common], help="serial solves, error vs closed form per slice")
    pa = sub.add_parser("parareal", parents=[common], help="Parareal convergence per variant")
    pa.add_argument("--coarse-equals-fine", action="store_true",
                    help="debug: use the fine propagator as the coarse one")
    sw = sub.add_parser("sweep", parents=[common], help="iterations to tolerance vs r or sigma")
    sw.add_argument("--parameter", choices=["r", "sigma"], action="append",
                    help="swept parameter (default: both)")
    sw.add_argument("--values", type=_float_list, help="comma-separated values")
    b = sub.add_parser("bench", parents=[common], help="runtime, speedup and efficiency")
    b.add_argument("--slices", type=_int_list, help="comma-separated slice counts P")
    return p


def _config(args):
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg = cfg.set("training.seed", args.seed)
    if args.checkpoint:
        cfg = cfg.set("paths.checkpoint", args.checkpoint)
    if args.nn_checkpoint:
        cfg = cfg.set("paths.nn_checkpoint", args.nn_checkpoint)
    if args.out:
        cfg = cfg.set("paths.out_dir", args.out)
    if args.workers is not None:
        cfg = cfg.set("parareal.workers", args.workers)
    if args.repetitions is not None:
        cfg = cfg.set("parareal.repetitions", args.repetitions)
    return validate(cfg)


def _networks(cfg, variants) -> dict:
    paths = {"pinn": cfg.paths.checkpoint, "nn": cfg.paths.nn_checkpoint}
    return {v: (ex.load_network(paths[v], cfg) if v in paths else None) for v in variants}


def cmd_train(cfg, args) -> int:
    net, header, rows, meta = ex.run_train(cfg, supervised=args.supervised)
    ckpt = cfg.paths.nn_checkpoint if args.supervised else cfg.paths.checkpoint
    if args.supervised and args.checkpoint:
        ckpt = args.checkpoint
    save_checkpoint(ckpt, net, meta)
    name = "table1_supervised.csv" if args.supervised else "table1.csv"
    out = ex.write_csv(Path(cfg.paths.out_dir) / name, header, rows)
    print(f"checkpoint: {ckpt}")
    print(f"loss history: {out} ({len(rows)} epochs)")
    if rows:
        print("final: " + ", ".join(f"{h}={v:.3e}" for h, v in zip(header[1:], rows[-1][1:])))
    return 0


def cmd_solve(cfg, args) -> int:
    variants = args.variant or DEFAULT_VARIANTS["solve"]
    nets = {k: v for k, v in _networks(cfg, variants).items() if v is not None}
    header, rows = ex.run_solve(cfg, nets)
    out = ex.write_csv(Path(cfg.paths.out_dir) / "figure3_left.csv", header, rows)
    print(f"errors vs closed form at t = 0: "
          + ", ".join(f"{h}={v:.3e}" for h, v in zip(header[2:], rows[-1][2:])))
    print(f"written: {out}")
    return 0


def cmd_parareal(cfg, args) -> int:
    variants = args.variant or DEFAULT_VARIANTS["parareal"]
    nets = _networks(cfg, variants)
    rows = []
    for v in variants:
        name = "fine" if args.coarse_equals_fine else v
        rep = ex.run_parareal(cfg, v, nets[v], coarse_equals_fine=args.coarse_equals_fine)
        rows += ex.convergence_rows(name, rep)
        print(f"{name}: {rep.iterations} iterations, final error {rep.errors[-1]:.3e}")
        if args.coarse_equals_fine:
            break
    out = ex.write_csv(Path(cfg.paths.out_dir) / "figure3_right.csv", ex.FIG3R_HEADER, rows)
    print(f"written: {out}")
    return 0


def cmd_sweep(cfg, args) -> int:
    variants = args.variant or DEFAULT_VARIANTS["sweep"]
    nets = _networks(cfg, variants)
    params = args.parameter or ["sigma", "r"]
    rows = []
    for v in variants:
        for p in params:
            values = args.values or (cfg.sweep.sigma_values if p == "sigma" else cfg.sweep.r_values)
            rows += ex.run_sweep(cfg, p, values, v, nets[v])
    for row in rows:
        print(f"{row[2]} {row[0]}={row[1]}: iterations {row[3]}, converged {row[4]}")
    out = ex.write_csv(Path(cfg.paths.out_dir) / "figure4.csv", ex.FIG4_HEADER, rows)
    print(f"written: {out}")
    return 0


def cmd_bench(cfg, args) -> int:
    variants = args.variant or DEFAULT_VARIANTS["bench"]
    nets = _networks(cfg, variants)
    slices = args.slices or list(cfg.parareal.bench_slices)
    fig6, table2 = ex.run_bench(cfg, slices, nets)
    for row in fig6:
        print(f"P={row[0]:3d} {row[1]:9s} speedup {row[6]:.3f} (bound {row[8]:.3f}), "
              f"efficiency {row[7]:.3f}")
    out = Path(cfg.paths.out_dir)
    ex.write_csv(out / "figure6.csv", ex.FIG6_HEADER, fig6)
    ex.write_csv(out / "table2.csv", ex.TABLE2_HEADER, table2)
    print(f"written: {out / 'figure6.csv'}, {out / 'table2.csv'}")
    return 0


COMMANDS = {"train": cmd_train, "solve": cmd_solve, "parareal": cmd_parareal,
            "sweep": cmd_sweep, "bench": cmd_bench}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _config(args)
        return COMMANDS[args.command](cfg, args)
    except (ConfigError, ex.MissingCheckpointError, CheckpointError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (TrainingDivergedError, PararealError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
