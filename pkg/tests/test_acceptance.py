"""Acceptance criteria 1-10, one test each.

Every test records a single PASS/FAIL line (printed again in the terminal
summary) and then asserts the criterion at its stated tolerance.
"""

import math
import time

import numpy as np
import pytest

from conftest import record_criterion

from pararealpinn import experiments as ex
from pararealpinn import cli
from pararealpinn.config import RunConfig
from pararealpinn.discretization import (SpatialGrid, StateVector, StepScheme, propagate,
                                         terminal_state)
from pararealpinn.model import MarketParams, analytic_call_price, error
from pararealpinn.parareal import (PararealConfig, SliceDecomposition, StepperPropagator,
                                   parareal_run, speedup_bound)
from pararealpinn.pinn import (NetworkPropagator, forward, forward_jet, generate_collocation,
                               init_kaiming, loss_terms, param_gradient, save_checkpoint)
from pararealpinn.pinn.checkpoint import market_metadata

P = MarketParams()
CN, IE = StepScheme.CRANK_NICOLSON, StepScheme.IMPLICIT_EULER


def _fine_error_defaults() -> float:
    g = SpatialGrid.for_params(P)
    out = propagate(terminal_state(g, P), 0.0, P.expiry, 200, CN, g, P, startup_steps=2)
    return error(out.values, analytic_call_price(g.interior, 0.0, P))


def _paper_setup(params=P, slices=16):
    g = SpatialGrid.for_params(params)
    d = SliceDecomposition(params.expiry, slices, 200, 100)
    F = StepperPropagator(g, params, d.fine_steps, CN, 2)
    G = StepperPropagator(g, params, d.coarse_steps, IE)
    return g, d, F, G, terminal_state(g, params)


def test_criterion_01_parareal_exactness():
    t0 = time.perf_counter()
    rng = np.random.default_rng(2024)
    worst = 0.0
    for P_ in (2, 4, 8):
        for _ in range(3):
            params = MarketParams(r=float(rng.uniform(0, 0.2)), sigma=float(rng.uniform(0.1, 1.0)))
            g = SpatialGrid(5000.0, int(rng.integers(20, 80)))
            d = SliceDecomposition(1.0, P_, int(rng.integers(1, 6)) * P_, int(rng.integers(1, 3)) * P_)
            F = StepperPropagator(g, params, d.fine_steps, CN, int(rng.integers(0, 3)))
            G = StepperPropagator(g, params, d.coarse_steps, [CN, IE][int(rng.integers(0, 2))])
            rep = parareal_run(F, G, terminal_state(g, params), d,
                               PararealConfig(max_iterations=P_, stopping="fixed"))
            for k, row in enumerate(rep.history):
                for n in range(min(k, P_) + 1):
                    ref = rep.reference[n].values
                    dev = np.linalg.norm(row[n].values - ref) / max(np.linalg.norm(ref), 1e-300)
                    worst = max(worst, dev)
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-12 and elapsed < 10
    record_criterion(1, "Parareal exactness", ok,
                     f"max rel deviation {worst:.2e} (<= 1e-12) over P in {{2,4,8}}, {elapsed:.1f} s (< 10 s)")
    assert ok


def test_criterion_02_fine_accuracy():
    t0 = time.perf_counter()
    err = _fine_error_defaults()
    elapsed = time.perf_counter() - t0
    ok = 2e-4 <= err <= 5e-3 and elapsed < 30
    record_criterion(2, "fine-solver accuracy", ok,
                     f"CN 200 steps vs closed form at t=0: {err:.3e} in [2e-4, 5e-3], {elapsed:.1f} s (< 30 s)")
    assert ok


def test_criterion_03_temporal_order():
    t0 = time.perf_counter()
    g = SpatialGrid(5000.0, 200)
    V0 = terminal_state(g, P)
    orders = {}
    for scheme in (CN, IE):
        ref = propagate(V0, 0.0, 0.5, 4096, scheme, g, P, startup_steps=4).values
        errs = [np.linalg.norm(propagate(V0, 0.0, 0.5, n, scheme, g, P, startup_steps=4).values - ref)
                for n in (32, 64, 128)]
        orders[scheme] = [math.log2(errs[i] / errs[i + 1]) for i in range(2)]
    elapsed = time.perf_counter() - t0
    ok = (all(abs(o - 2.0) <= 0.2 for o in orders[CN]) and all(abs(o - 1.0) <= 0.2 for o in orders[IE])
          and elapsed < 60)
    record_criterion(3, "temporal order", ok,
                     "CN slopes " + ", ".join(f"{o:.3f}" for o in orders[CN])
                     + "; IE slopes " + ", ".join(f"{o:.3f}" for o in orders[IE]) + f", {elapsed:.1f} s (< 60 s)")
    assert ok


def _convergence(G_kind, net=None):
    g, d, F, G, V0 = _paper_setup()
    if G_kind == "pinn":
        G = NetworkPropagator(net, g, P.expiry)
    rep = parareal_run(F, G, V0, d, PararealConfig(max_iterations=16, stopping="fixed"))
    return rep


def test_criterion_04_parareal_convergence(desk_pinn):
    net, _, train_seconds = desk_pinn
    t0 = time.perf_counter()
    fine_err = _fine_error_defaults()
    results = {}
    for kind in ("numerical", "pinn"):
        rep = _convergence(kind, net)
        k = rep.iterations_to(1e-10)
        results[kind] = (rep.errors[1], k, rep.errors[1] < fine_err and k is not None and k <= 5)
    elapsed = time.perf_counter() - t0 + train_seconds
    ok = all(r[2] for r in results.values()) and elapsed < 300
    detail = "; ".join(f"{kind}: iter-1 error {e1:.2e} (fine {fine_err:.2e}), 1e-10 at iteration {k}"
                       for kind, (e1, k, _) in results.items())
    record_criterion(4, "Parareal convergence", ok, detail + f"; {elapsed:.0f} s incl. training (< 300 s)")
    assert ok


def test_criterion_05_training_decay(desk_pinn):
    _, rep, seconds = desk_pinn
    drops = {name: getattr(rep, name)[0] / getattr(rep, name)[-1] for name in ("mse_f", "mse_b", "mse_exp")}
    ok = all(d >= 100 for d in drops.values()) and seconds < 900 and len(rep) == 2500
    detail = ", ".join(f"{n} {getattr(rep, n)[0]:.2e} -> {getattr(rep, n)[-1]:.2e} (x{drops[n]:.0f})"
                       for n in ("mse_f", "mse_b", "mse_exp"))
    record_criterion(5, "PINN training decay", ok, detail + f"; {seconds:.0f} s (< 900 s)")
    assert ok


def test_criterion_06_gradient_and_jet_oracles():
    t0 = time.perf_counter()
    jet_worst = 0.0
    for seed in range(5):
        net = init_kaiming([2, 12, 12, 1], seed=seed)
        rng = np.random.default_rng(seed)
        t, S = rng.uniform(0.05, 0.95, 10), rng.uniform(200, 4800, 10)
        j = forward_jet(net, t, S)
        h = 1e-4
        fd_t = (forward(net, t + h, S) - forward(net, t - h, S)) / (2 * h)
        fd_s = (forward(net, t, S + h * P.domain_bound) - forward(net, t, S - h * P.domain_bound)) / (2 * h * P.domain_bound)
        for got, ref in ((j.d_t, fd_t), (j.d_s, fd_s)):
            jet_worst = max(jet_worst, np.max(np.abs(got - ref)) / np.max(np.abs(ref)))
    grad_worst = 0.0
    for seed, sizes in enumerate(([2, 3, 1], [2, 6, 6, 1], [2, 10, 8, 8, 1])):
        net = init_kaiming(sizes, seed=seed)
        assert net.n_params <= 200
        c = generate_collocation(P, 6, 4, 4, seed=seed)
        _, g = param_gradient(net, c, P)
        fd = []
        for p in net.parameters():
            arr = np.zeros_like(p)
            for idx in np.ndindex(p.shape):
                old = p[idx]
                p[idx] = old + 1e-6
                up = loss_terms(net, c, P).total
                p[idx] = old - 1e-6
                dn = loss_terms(net, c, P).total
                p[idx] = old
                arr[idx] = (up - dn) / 2e-6
            fd.append(arr)
        a = np.concatenate([x.ravel() for x in g])
        b = np.concatenate([x.ravel() for x in fd])
        grad_worst = max(grad_worst, np.max(np.abs(a - b)) / np.max(np.abs(b)))
    elapsed = time.perf_counter() - t0
    ok = jet_worst <= 1e-6 and grad_worst <= 1e-5 and elapsed < 10
    record_criterion(6, "gradient and jet oracles", ok,
                     f"jet vs FD {jet_worst:.2e} (<= 1e-6), gradient vs FD {grad_worst:.2e} (<= 1e-5), "
                     f"{elapsed:.1f} s (< 10 s)")
    assert ok


def test_criterion_07_generalization(desk_pinn):
    net, _, _ = desk_pinn
    t0 = time.perf_counter()
    cfg = RunConfig()
    base = ex.run_sweep(cfg, "sigma", [0.4], "pinn", net)[0][3]
    rows = ex.run_sweep(cfg, "sigma", [0.4, 0.8, 2.0, 4.0], "pinn", net)
    rows += ex.run_sweep(cfg, "r", [0.03, 0.3], "pinn", net)
    elapsed = time.perf_counter() - t0
    worst = max(r[3] for r in rows) - base
    ok = all(r[4] for r in rows) and worst <= 2 and elapsed < 300
    detail = ", ".join(f"{r[0]}={r[1]}: {r[3]}" for r in rows)
    note = " (every run needs P=16 iterations: the network coarse step ignores the state)" \
        if all(r[3] == 16 for r in rows) else ""
    record_criterion(7, "generalization", ok,
                     f"baseline {base} iterations; {detail}; max increase {worst}{note}; {elapsed:.0f} s (< 300 s)")
    assert ok


def _mean_slice_time(prop, d, V0, reps=5):
    times = []
    for _ in range(reps):
        state = V0
        t0 = time.perf_counter()
        for n in range(d.n_slices):
            state = prop.advance(state, *d.slice(n))
        times.append((time.perf_counter() - t0) / d.n_slices)
    return float(np.mean(times))


def test_criterion_08_coarse_cost(desk_pinn):
    net, _, _ = desk_pinn
    t0 = time.perf_counter()
    g, d, F, G, V0 = _paper_setup()
    pinn = NetworkPropagator(net, g, P.expiry)
    _mean_slice_time(pinn, d, V0, 1)
    _mean_slice_time(G, d, V0, 1)
    t_net = _mean_slice_time(pinn, d, V0)
    t_ie = _mean_slice_time(G, d, V0)
    elapsed = time.perf_counter() - t0
    ratio = t_ie / t_net
    ok = t_net <= t_ie / 1.5 and elapsed < 60
    record_criterion(8, "coarse-propagator cost", ok,
                     f"network {1e3 * t_net:.3f} ms vs implicit Euler {1e3 * t_ie:.3f} ms per slice "
                     f"(factor {ratio:.1f} >= 1.5), {elapsed:.1f} s (< 60 s)")
    assert ok


def test_criterion_09_speedup_bound(desk_pinn):
    net, _, _ = desk_pinn
    t0 = time.perf_counter()
    fig6, _ = ex.run_bench(RunConfig(), [1, 2, 4, 8], {"numerical": None, "pinn": net}, repetitions=5)
    elapsed = time.perf_counter() - t0
    col = {h: i for i, h in enumerate(ex.FIG6_HEADER)}
    worst = max(r[col["speedup"]] / r[col["bound"]] for r in fig6)
    s8 = {r[col["variant"]]: r[col["speedup"]] for r in fig6 if r[col["slices"]] == 8}
    exact = speedup_bound(3, 16, 0) == 16 / 3
    ok = worst <= 1.1 and exact and s8["pinn"] > s8["numerical"] and elapsed < 300
    record_criterion(9, "speedup-bound dominance", ok,
                     f"max measured/bound {worst:.3f} (<= 1.1) over {len(fig6)} rows; bound(3,16,0) == 16/3: {exact}; "
                     f"P=8 speedup pinn {s8['pinn']:.3f} > numerical {s8['numerical']:.3f}; {elapsed:.0f} s (< 300 s)")
    assert ok


def test_criterion_10_determinism(desk_pinn, tmp_path, monkeypatch):
    net, _, _ = desk_pinn
    monkeypatch.chdir(tmp_path)
    monkeypatch.delenv("PARAREALPINN_CONFIG", raising=False)
    t0 = time.perf_counter()
    (tmp_path / "desk.conf").write_text(
        "network.hidden_layers = 3\ntraining.phases = 40:0.01, 10:0.001\n"
        "training.n_f = 20000\ntraining.n_b = 2000\ntraining.n_exp = 2000\n")
    save_checkpoint(tmp_path / "trained.json", net, {"market": market_metadata(P)})
    outputs = []
    for run in ("a", "b"):
        out = tmp_path / run
        assert cli.main(["train", "--config", "desk.conf", "--out", str(out),
                         "--checkpoint", str(out / "pinn.json")]) == 0
        for cmd in ("parareal", "sweep"):
            assert cli.main([cmd, "--config", "desk.conf", "--out", str(out), "--checkpoint",
                             "trained.json", "--variant", "pinn"]) == 0
        outputs.append({name: (out / name).read_bytes()
                        for name in ("table1.csv", "figure3_right.csv", "figure4.csv")})
        outputs[-1]["pinn.json"] = (out / "pinn.json").read_bytes()
    elapsed = time.perf_counter() - t0
    same = {name: outputs[0][name] == outputs[1][name] for name in outputs[0]}
    ok = all(same.values()) and elapsed < 900
    record_criterion(10, "determinism", ok,
                     ", ".join(f"{k} {'identical' if v else 'DIFFERS'}" for k, v in same.items())
                     + f"; {elapsed:.0f} s (< 900 s)")
    assert ok
