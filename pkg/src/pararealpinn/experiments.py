"""Experiment drivers behind the command-line interface.

Each ``run_*`` function computes rows for one CSV file; ``write_csv``
serializes them with full-precision floats and a fixed header.
"""

from __future__ import annotations

import csv
import io
import math
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .config import RunConfig
from .discretization import SpatialGrid, StepScheme, terminal_state
from .model import MarketParams, analytic_call_price, error
from .parareal import (PararealConfig, SliceDecomposition, StepperPropagator, measure,
                       parareal_run, serial_fine, speedup_bound)
from .pinn import (NetworkPropagator, TrainConfig, domain_mismatch, fine_solution_samples,
                   generate_collocation, holdout_split, init_kaiming, load_checkpoint,
                   save_checkpoint, train, train_supervised)
from .pinn.checkpoint import market_metadata
from .pinn.network import Mlp

VARIANTS = ("numerical", "nn", "pinn")


class MissingCheckpointError(FileNotFoundError):
    pass


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def csv_text(header: list, rows: list) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def write_csv(path, header: list, rows: list) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(csv_text(header, rows))
    return path


# -- builders ---------------------------------------------------------------

def grid_for(cfg: RunConfig) -> SpatialGrid:
    return SpatialGrid(cfg.market.domain_bound, cfg.grid.n_intervals, cfg.grid.upper_bc)


def decomposition(cfg: RunConfig, slices: Optional[int] = None) -> SliceDecomposition:
    return SliceDecomposition(cfg.market.expiry, slices or cfg.parareal.slices,
                              cfg.stepping.fine_steps, cfg.stepping.coarse_steps)


def fine_propagator(cfg: RunConfig, params: MarketParams, decomp: SliceDecomposition):
    return StepperPropagator(grid_for(cfg), params, decomp.fine_steps,
                             StepScheme(cfg.stepping.fine_scheme), cfg.stepping.startup_steps)


def coarse_propagator(cfg: RunConfig, params: MarketParams, decomp: SliceDecomposition,
                      variant: str = "numerical", net: Optional[Mlp] = None):
    if variant == "numerical":
        return StepperPropagator(grid_for(cfg), params, decomp.coarse_steps,
                                 StepScheme(cfg.stepping.coarse_scheme))
    if net is None:
        raise MissingCheckpointError(f"variant {variant!r} needs a trained network")
    return NetworkPropagator(net, grid_for(cfg), params.expiry)


def new_network(cfg: RunConfig) -> Mlp:
    nw = cfg.network
    return init_kaiming(cfg.layer_sizes, seed=cfg.training.seed, activation=nw.activation,
                        input_scale=nw.input_scale or cfg.market.domain_bound,
                        output_scale=nw.output_scale or cfg.market.strike)


def train_config(cfg: RunConfig) -> TrainConfig:
    tr = cfg.training
    return TrainConfig(phases=tr.phases, batch_size=tr.batch_size, shuffle=tr.shuffle,
                       seed=tr.seed, dtype=tr.dtype)


def load_network(path, cfg: RunConfig, warn: bool = True) -> Mlp:
    if not Path(path).is_file():
        raise MissingCheckpointError(f"checkpoint not found: {path}")
    net, meta = load_checkpoint(path)
    fields_ = domain_mismatch(meta, cfg.market_params)
    if fields_ and warn:
        print(f"warning: checkpoint {path} was trained on a different domain "
              f"({', '.join(fields_)})", file=sys.stderr)
    return net


# -- train ------------------------------------------------------------------

TABLE1_HEADER = ["epoch", "mse_exp", "mse_b", "mse_f"]
SUPERVISED_HEADER = ["epoch", "mse_data", "mse_val"]


def run_train(cfg: RunConfig, supervised: bool = False):
    """Train from the configured initialization; returns (net, header, rows, metadata)."""
    params = cfg.market_params
    net = new_network(cfg)
    tcfg = train_config(cfg)
    meta = {"market": market_metadata(params), "seed": cfg.training.seed,
            "phases": [list(p) for p in cfg.training.phases],
            "mode": "supervised" if supervised else "physics_informed"}
    if supervised:
        data = fine_solution_samples(grid_for(cfg), params, cfg.stepping.fine_steps,
                                     cfg.training.data_node_stride, cfg.stepping.startup_steps)
        fit, val = holdout_split(data, cfg.training.validation_fraction, cfg.training.seed)
        net, rep = train_supervised(net, fit, tcfg, val if len(val) else None)
        rows = [(e, m, rep.mse_val[i] if rep.mse_val else float("nan"))
                for i, (e, m) in enumerate(zip(rep.epoch, rep.mse_data))]
        meta["loss_tail"] = [list(r) for r in rows[-5:]]
        return net, SUPERVISED_HEADER, rows, meta
    colloc = generate_collocation(params, cfg.training.n_f, cfg.training.n_b,
                                  cfg.training.n_exp, seed=cfg.training.seed)
    meta["counts"] = list(colloc.counts())
    net, rep = train(net, colloc, tcfg, params, cfg.grid.upper_bc)
    rows = list(zip(rep.epoch, rep.mse_exp, rep.mse_b, rep.mse_f))
    meta["loss_tail"] = rep.tail(5)
    return net, TABLE1_HEADER, rows, meta


# -- solve ------------------------------------------------------------------

def run_solve(cfg: RunConfig, networks: dict) -> tuple[list, list]:
    """Normalized l2 error vs the closed form at every slice boundary.

    ``networks`` maps a column name (e.g. "pinn") to a trained net.
    """
    params = cfg.market_params
    decomp = decomposition(cfg)
    grid = grid_for(cfg)
    V0 = terminal_state(grid, params)
    fine = serial_fine(fine_propagator(cfg, params, decomp), V0, decomp)
    coarse = serial_fine(coarse_propagator(cfg, params, decomp), V0, decomp)
    names = sorted(networks)
    header = ["slice", "t", "fine", "coarse"] + names
    rows = []
    S = grid.interior
    for n, tau in enumerate(decomp.boundaries):
        t = params.expiry - float(tau)
        exact = analytic_call_price(S, t, params)
        row = [n, t, error(fine[n].values, exact), error(coarse[n].values, exact)]
        for name in names:
            row.append(error(networks[name](np.full(S.shape, t), S), exact))
        rows.append(row)
    return header, rows


# -- parareal ---------------------------------------------------------------

FIG3R_HEADER = ["variant", "iteration", "error", "increment"]


def parareal_config(cfg: RunConfig, workers: Optional[int] = None, **changes) -> PararealConfig:
    pr = cfg.parareal
    base = dict(max_iterations=pr.max_iterations, tolerance=pr.tolerance, stopping=pr.stopping,
                workers=workers or pr.workers, executor=pr.executor)
    base.update(changes)
    return PararealConfig(**base)


def run_parareal(cfg: RunConfig, variant: str, net: Optional[Mlp] = None,
                 coarse_equals_fine: bool = False, workers: Optional[int] = None,
                 fine_params: Optional[MarketParams] = None):
    params = fine_params or cfg.market_params
    decomp = decomposition(cfg)
    F = fine_propagator(cfg, params, decomp)
    G = F if coarse_equals_fine else coarse_propagator(cfg, params, decomp, variant, net)
    V0 = terminal_state(grid_for(cfg), params)
    return parareal_run(F, G, V0, decomp, parareal_config(cfg, workers))


def convergence_rows(variant: str, report) -> list:
    incs = [float("nan")] + list(report.increments)
    return [(variant, k, e, incs[k]) for k, e in enumerate(report.errors)]


# -- sweep ------------------------------------------------------------------

FIG4_HEADER = ["parameter", "value", "variant", "iterations", "converged", "final_error"]


def run_sweep(cfg: RunConfig, parameter: str, values, variant: str = "pinn",
              net: Optional[Mlp] = None, workers: Optional[int] = None) -> list:
    """Iterations to reach the tolerance vs serial fine for each parameter value.

    The coarse network stays fixed; the fine propagator uses the swept value.
    """
    if parameter not in ("r", "sigma"):
        raise ValueError(f"parameter must be 'r' or 'sigma', got {parameter!r}")
    rows = []
    tol = cfg.parareal.tolerance
    for v in values:
        fine_params = cfg.market_params.replace(**{parameter: float(v)})
        rep = run_parareal(cfg, variant, net, workers=workers, fine_params=fine_params)
        k = rep.iterations_to(tol)
        rows.append((parameter, float(v), variant, k if k is not None else rep.iterations,
                     k is not None, rep.errors[-1]))
    return rows


# -- bench ------------------------------------------------------------------

FIG6_HEADER = ["slices", "variant", "iterations", "mean_time", "std_time", "serial_time",
               "speedup", "efficiency", "bound", "c_c", "c_f"]
TABLE2_HEADER = ["slices", "variant", "c_c_ms", "c_c_ms_std", "c_f_ms", "c_f_ms_std"]


def run_bench(cfg: RunConfig, slice_counts, variants: dict, repetitions: Optional[int] = None):
    """Wall-clock Parareal timings with workers = slices = P.

    ``variants`` maps a variant name to its network (None for numerical).
    Iterations are fixed at min(bench_iterations, P).
    """
    params = cfg.market_params
    reps = repetitions or cfg.parareal.repetitions
    fig6, table2 = [], []
    for P in slice_counts:
        decomp = decomposition(cfg, P)
        F = fine_propagator(cfg, params, decomp)
        V0 = terminal_state(grid_for(cfg), params)
        K = min(cfg.parareal.bench_iterations, P)
        pcfg = parareal_config(cfg, workers=P, max_iterations=K, stopping="fixed")
        for name, net in variants.items():
            G = coarse_propagator(cfg, params, decomp, name, net)
            m = measure(F, G, V0, decomp, pcfg, reps)
            fig6.append((P, name, m.iterations, m.parareal_time[0], m.parareal_time[1],
                         m.serial_time[0], m.speedup, m.efficiency, m.bound, m.c_c[0], m.c_f[0]))
            table2.append((P, name, 1e3 * m.c_c[0], 1e3 * m.c_c[1], 1e3 * m.c_f[0], 1e3 * m.c_f[1]))
    return fig6, table2
