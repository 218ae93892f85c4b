"""Physics-informed loss: PDE residual, boundary and expiry mismatches.

All loss terms are reported in output-scaled units, i.e. the physical
mismatch divided by the network's ``output_scale`` before squaring, so the
three terms are O(1) at initialisation regardless of the currency scale.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..model import MarketParams, UpperBoundary, payoff, upper_boundary_value
from .network import Jet2, JetTape, Mlp, Workspace


class InvalidCollocationError(ValueError):
    """A collocation category is empty."""


@dataclass(frozen=True)
class CollocationSet:
    interior: np.ndarray   # (N_f, 2) columns t, S
    boundary: np.ndarray   # (N_b, 2) columns t, S with S in {0, L}
    expiry: np.ndarray     # (N_exp,) asset values at t = T
    seed: int = 0

    def counts(self) -> tuple[int, int, int]:
        return len(self.interior), len(self.boundary), len(self.expiry)


def generate_collocation(params: MarketParams, n_f: int = 100_000, n_b: int = 10_000,
                         n_exp: int = 10_000, seed: int = 0) -> CollocationSet:
    """Uniform random collocation points; boundary points alternate S = 0 and S = L."""
    rng = np.random.default_rng(seed)
    T, L = params.expiry, params.domain_bound
    interior = np.column_stack([rng.uniform(0.0, T, n_f), rng.uniform(0.0, L, n_f)])
    bt = rng.uniform(0.0, T, n_b)
    bs = np.where(np.arange(n_b) % 2 == 0, 0.0, L)
    expiry = rng.uniform(0.0, L, n_exp)
    return CollocationSet(interior, np.column_stack([bt, bs]), expiry, seed)


def pde_residual(jet: Jet2, S, params: MarketParams):
    """Black-Scholes operator applied to a jet: V_t + sigma^2 S^2 V_SS / 2 + r S V_S - r V."""
    S = np.asarray(S, dtype=float)
    return (jet.d_t + 0.5 * params.sigma**2 * S**2 * jet.d_ss
            + params.r * S * jet.d_s - params.r * jet.value)


@dataclass
class LossTerms:
    mse_f: float
    mse_b: float
    mse_exp: float

    @property
    def total(self) -> float:
        return self.mse_f + self.mse_b + self.mse_exp


def boundary_targets(points: np.ndarray, params: MarketParams,
                     upper_bc=UpperBoundary.ASYMPTOTIC) -> np.ndarray:
    t, S = points[:, 0], points[:, 1]
    top = np.asarray(upper_boundary_value(t, params, upper_bc), dtype=float)
    return np.where(S > 0.0, top, 0.0)


def _require(colloc: CollocationSet):
    for name, n in zip(("interior", "boundary", "expiry"), colloc.counts()):
        if n == 0:
            raise InvalidCollocationError(f"empty {name} collocation set")


def loss_terms(net, colloc: CollocationSet, params: MarketParams,
               upper_bc=UpperBoundary.ASYMPTOTIC, scale: float | None = None) -> LossTerms:
    """Evaluate the three loss terms for any model exposing ``jet(t, S)`` and ``__call__``.

    ``scale`` defaults to the model's ``output_scale`` (or the strike for
    models without one).
    """
    _require(colloc)
    if scale is None:
        scale = getattr(net, "output_scale", params.strike)
    t, S = colloc.interior[:, 0], colloc.interior[:, 1]
    res = pde_residual(net.jet(t, S), S, params) / scale
    bvals = np.asarray(net(colloc.boundary[:, 0], colloc.boundary[:, 1]), dtype=float)
    bmis = (bvals - boundary_targets(colloc.boundary, params, upper_bc)) / scale
    evals = np.asarray(net(np.full(len(colloc.expiry), params.expiry), colloc.expiry), dtype=float)
    emis = (evals - payoff(colloc.expiry, params)) / scale
    return LossTerms(float(np.mean(res**2)), float(np.mean(bmis**2)), float(np.mean(emis**2)))


def _scaled(net: Mlp, t, S) -> np.ndarray:
    X = np.column_stack([np.asarray(t, dtype=float), np.asarray(S, dtype=float) / net.input_scale])
    return X.astype(net.dtype, copy=False)


def param_gradient(net: Mlp, batch: CollocationSet, params: MarketParams,
                   upper_bc=UpperBoundary.ASYMPTOTIC,
                   workspace: Workspace | None = None) -> tuple[LossTerms, list]:
    """Loss terms and exact gradient of their sum for one batch.

    Empty categories contribute nothing, so a batch may hold e.g. only
    expiry points. Gradients are ordered like :meth:`Mlp.parameters`.
    """
    k, L = net.output_scale, net.input_scale
    grads = [np.zeros_like(p) for p in net.parameters()]
    terms = [0.0, 0.0, 0.0]

    n_f = len(batch.interior)
    if n_f:
        t, S = batch.interior[:, 0], batch.interior[:, 1]
        tape = JetTape(net, _scaled(net, t, S), order=2, workspace=workspace, tag="f")
        y, yt, ys, yss = tape.output
        dt = net.dtype
        s = (S / L).astype(dt)
        # residual / output_scale, written in scaled coordinates
        cs = dt.type(0.5 * params.sigma**2) * s * s
        cd = dt.type(params.r) * s
        r = dt.type(params.r)
        res = yt + cs * yss + cd * ys - r * y
        terms[0] = float(np.mean(res.astype(float) ** 2))
        g = dt.type(2.0 / n_f) * res
        _accumulate(grads, tape.backward([-r * g, g, cd * g, cs * g]))

    rows, targets = [], []
    n_b, n_e = len(batch.boundary), len(batch.expiry)
    if n_b:
        rows.append(_scaled(net, batch.boundary[:, 0], batch.boundary[:, 1]))
        targets.append(boundary_targets(batch.boundary, params, upper_bc) / k)
    if n_e:
        rows.append(_scaled(net, np.full(n_e, params.expiry), batch.expiry))
        targets.append(payoff(batch.expiry, params) / k)
    if rows:
        tape = JetTape(net, np.concatenate(rows), order=0, workspace=workspace, tag="b")
        mis = tape.output[0].astype(float) - np.concatenate(targets)
        g = np.empty_like(mis)
        if n_b:
            terms[1] = float(np.mean(mis[:n_b] ** 2))
            g[:n_b] = 2.0 * mis[:n_b] / n_b
        if n_e:
            terms[2] = float(np.mean(mis[n_b:] ** 2))
            g[n_b:] = 2.0 * mis[n_b:] / n_e
        _accumulate(grads, tape.backward([g]))
    return LossTerms(*terms), grads


def data_gradient(net: Mlp, t, S, V, workspace: Workspace | None = None) -> tuple[float, list]:
    """Mean squared (scaled) data mismatch and its gradient."""
    tape = JetTape(net, _scaled(net, t, S), order=0, workspace=workspace)
    mis = tape.output[0].astype(float) - np.asarray(V, dtype=float) / net.output_scale
    n = len(mis)
    return float(np.mean(mis**2)), tape.backward([2.0 * mis / n])


def _accumulate(acc: list, new: list):
    for a, b in zip(acc, new):
        a += b
