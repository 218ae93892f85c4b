"""Training loops: physics-informed (three loss terms) and data-only."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..discretization import (SpatialGrid, StateVector, StepScheme, boundary_forcing,
                              build_operator, step, terminal_state)
from ..model import MarketParams, UpperBoundary
from .loss import CollocationSet, data_gradient, param_gradient
from .network import Mlp, Workspace
from .optim import AdamState, adam_step

FULL_BATCH_LIMIT = 50_000
DEFAULT_BATCH = 10_000


class TrainingDivergedError(RuntimeError):
    def __init__(self, epoch: int):
        super().__init__(f"non-finite loss at epoch {epoch}")
        self.epoch = epoch


@dataclass(frozen=True)
class TrainConfig:
    phases: tuple = ((5000, 1e-2), (800, 1e-3))
    batch_size: int | None = None
    shuffle: bool = True
    seed: int = 0
    betas: tuple = (0.9, 0.999)
    eps: float = 1e-8
    dtype: str = "float32"

    def __post_init__(self):
        for epochs, lr in self.phases:
            if epochs < 0:
                raise ValueError(f"epochs must be >= 0, got {epochs}")
            if not lr > 0:
                raise ValueError(f"learning rate must be > 0, got {lr}")

    @property
    def total_epochs(self) -> int:
        return sum(e for e, _ in self.phases)


@dataclass
class LossReport:
    """Per-epoch loss terms, averaged over the batches of the epoch."""

    epoch: list = field(default_factory=list)
    mse_f: list = field(default_factory=list)
    mse_b: list = field(default_factory=list)
    mse_exp: list = field(default_factory=list)

    def append(self, epoch: int, mse_f: float, mse_b: float, mse_exp: float):
        self.epoch.append(epoch)
        self.mse_f.append(mse_f)
        self.mse_b.append(mse_b)
        self.mse_exp.append(mse_exp)

    @property
    def total(self) -> list:
        return [f + b + e for f, b, e in zip(self.mse_f, self.mse_b, self.mse_exp)]

    def __len__(self):
        return len(self.epoch)

    def tail(self, n: int = 1) -> list:
        return [dict(epoch=self.epoch[i], mse_f=self.mse_f[i], mse_b=self.mse_b[i],
                     mse_exp=self.mse_exp[i]) for i in range(max(0, len(self) - n), len(self))]


@dataclass
class DataReport:
    epoch: list = field(default_factory=list)
    mse_data: list = field(default_factory=list)
    mse_val: list = field(default_factory=list)

    def __len__(self):
        return len(self.epoch)


def _n_batches(total: int, batch_size: int | None) -> int:
    if batch_size is None:
        return 1 if total <= FULL_BATCH_LIMIT else math.ceil(total / DEFAULT_BATCH)
    return max(1, math.ceil(total / batch_size))


def _split(a: np.ndarray, order: np.ndarray | None, k: int) -> list:
    if order is not None:
        a = a[order]
    return np.array_split(a, k)


def train(net: Mlp, colloc: CollocationSet, config: TrainConfig, params: MarketParams,
          upper_bc=UpperBoundary.ASYMPTOTIC) -> tuple[Mlp, LossReport]:
    """Minimise mse_f + mse_b + mse_exp over the configured Adam phases.

    Returns a trained copy; ``net`` itself is left untouched.
    """
    if config.total_epochs == 0:
        return net.copy(), LossReport()
    net = net.astype(np.dtype(config.dtype))
    report = LossReport()
    rng = np.random.default_rng(config.seed)
    state = AdamState.for_net(net, *config.betas, config.eps)
    ws = Workspace()
    n_f, n_b, n_e = colloc.counts()
    k = _n_batches(n_f + n_b + n_e, config.batch_size)
    epoch = 0
    for n_epochs, lr in config.phases:
        for _ in range(n_epochs):
            orders = [rng.permutation(n) if config.shuffle else None for n in (n_f, n_b, n_e)]
            parts = zip(_split(colloc.interior, orders[0], k),
                        _split(colloc.boundary, orders[1], k),
                        _split(colloc.expiry, orders[2], k))
            acc = np.zeros(3)
            for interior, boundary, expiry in parts:
                terms, grads = param_gradient(
                    net, CollocationSet(interior, boundary, expiry), params, upper_bc, ws)
                if not math.isfinite(terms.total):
                    raise TrainingDivergedError(epoch)
                acc += [terms.mse_f * len(interior), terms.mse_b * len(boundary),
                        terms.mse_exp * len(expiry)]
                adam_step(net, grads, state, lr)
            report.append(epoch, acc[0] / n_f, acc[1] / n_b, acc[2] / n_e)
            epoch += 1
    return net, report


@dataclass(frozen=True)
class SupervisedData:
    t: np.ndarray
    S: np.ndarray
    V: np.ndarray

    def __len__(self):
        return len(self.V)

    def subset(self, idx) -> "SupervisedData":
        return SupervisedData(self.t[idx], self.S[idx], self.V[idx])


def fine_solution_samples(grid: SpatialGrid, params: MarketParams, n_steps: int = 200,
                          node_stride: int = 10, startup_steps: int = 2) -> SupervisedData:
    """Space-time samples (t, S, V) of a serial Crank-Nicolson solve.

    Every time level of the solve is kept, spatial nodes are thinned by
    ``node_stride``; boundary nodes are included with their Dirichlet values.
    """
    A = build_operator(grid, params)
    forcing = boundary_forcing(grid, params)
    state = terminal_state(grid, params)
    picks = np.arange(0, grid.n_intervals + 1, node_stride)
    nodes = grid.nodes[picks]
    dtau = params.expiry / n_steps
    ts, Ss, Vs = [], [], []
    for i in range(n_steps + 1):
        ts.append(np.full(len(nodes), params.expiry - state.tau))
        Ss.append(nodes)
        Vs.append(state.with_boundary(grid, params)[picks])
        if i == n_steps:
            break
        if i < startup_steps:
            for _ in range(2):
                state = step(state, A, 0.5 * dtau, StepScheme.IMPLICIT_EULER, forcing)
        else:
            state = step(state, A, dtau, StepScheme.CRANK_NICOLSON, forcing)
        state = StateVector(state.values, (i + 1) * dtau)
    return SupervisedData(np.concatenate(ts), np.concatenate(Ss), np.concatenate(Vs))


def holdout_split(data: SupervisedData, fraction: float = 0.2, seed: int = 0):
    """Random (train, validation) split."""
    order = np.random.default_rng(seed).permutation(len(data))
    n_val = int(round(fraction * len(data)))
    return data.subset(np.sort(order[n_val:])), data.subset(np.sort(order[:n_val]))


def train_supervised(net: Mlp, data: SupervisedData, config: TrainConfig,
                     validation: SupervisedData | None = None) -> tuple[Mlp, DataReport]:
    """Fit the network to solver samples only (no PDE terms)."""
    if config.total_epochs == 0:
        return net.copy(), DataReport()
    net = net.astype(np.dtype(config.dtype))
    report = DataReport()
    rng = np.random.default_rng(config.seed)
    state = AdamState.for_net(net, *config.betas, config.eps)
    ws = Workspace()
    n = len(data)
    k = _n_batches(n, config.batch_size)
    epoch = 0
    for n_epochs, lr in config.phases:
        for _ in range(n_epochs):
            order = rng.permutation(n) if config.shuffle else np.arange(n)
            acc = 0.0
            for idx in np.array_split(order, k):
                mse, grads = data_gradient(net, data.t[idx], data.S[idx], data.V[idx], ws)
                if not math.isfinite(mse):
                    raise TrainingDivergedError(epoch)
                acc += mse * len(idx)
                adam_step(net, grads, state, lr)
            report.epoch.append(epoch)
            report.mse_data.append(acc / n)
            if validation is not None:
                pred = net(validation.t, validation.S)
                report.mse_val.append(float(np.mean(((pred - validation.V) / net.output_scale) ** 2)))
            epoch += 1
    return net, report
