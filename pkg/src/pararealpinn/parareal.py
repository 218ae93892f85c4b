"""Parareal over pluggable propagators, with timing and the speedup model.

Slices are indexed n = 0..N-1 in reversed time; slice n spans
[T^n, T^{n+1}] with T^n = n T / N. The update is

    V^{k+1}_{n+1} = G(V^{k+1}_n) + F(V^k_n) - G(V^k_n)

where the fine evaluations of one iteration are independent and run on a
worker pool, and the coarse correction sweep is serial.
"""

from __future__ import annotations

import math
import statistics
import time
from concurrent.futures import ProcessPoolExecutor, ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Protocol

import numpy as np

from .discretization import SpatialGrid, StateVector, StepScheme, propagate
from .model import MarketParams, error


class Propagator(Protocol):
    def advance(self, state: StateVector, tau_start: float, tau_end: float) -> StateVector: ...


@dataclass(frozen=True)
class StepperPropagator:
    """Fixed number of implicit steps per slice."""

    grid: SpatialGrid
    params: MarketParams
    steps: int
    scheme: StepScheme = StepScheme.CRANK_NICOLSON
    startup_steps: int = 0

    def advance(self, state: StateVector, tau_start: float, tau_end: float) -> StateVector:
        return propagate(state, tau_start, tau_end, self.steps, self.scheme, self.grid,
                         self.params, startup_steps=self.startup_steps)


class PararealError(RuntimeError):
    def __init__(self, slice_index: int, iteration: int, cause: BaseException):
        super().__init__(f"propagator failed on slice {slice_index} in iteration {iteration}: {cause}")
        self.slice_index = slice_index
        self.iteration = iteration


@dataclass(frozen=True)
class SliceDecomposition:
    horizon: float = 1.0
    n_slices: int = 16
    fine_steps_total: int = 200
    coarse_steps_total: int = 100

    def __post_init__(self):
        if self.n_slices < 1:
            raise ValueError(f"n_slices must be >= 1, got {self.n_slices}")
        if not self.horizon > 0:
            raise ValueError(f"horizon must be > 0, got {self.horizon}")
        if self.fine_steps_total < 1 or self.coarse_steps_total < 1:
            raise ValueError("step totals must be >= 1")

    @property
    def boundaries(self) -> np.ndarray:
        return np.array([n * self.horizon / self.n_slices for n in range(self.n_slices + 1)])

    @property
    def fine_steps(self) -> int:
        # rounded up when P does not divide the total
        return math.ceil(self.fine_steps_total / self.n_slices)

    @property
    def coarse_steps(self) -> int:
        return math.ceil(self.coarse_steps_total / self.n_slices)

    def slice(self, n: int) -> tuple[float, float]:
        b = self.boundaries
        return float(b[n]), float(b[n + 1])


class Stopping(str, Enum):
    INCREMENT = "increment"
    REFERENCE = "reference"
    FIXED = "fixed"


@dataclass(frozen=True)
class PararealConfig:
    max_iterations: int = 16
    tolerance: float = 1e-10
    stopping: Stopping = Stopping.INCREMENT
    workers: int = 1
    executor: str = "thread"

    def __post_init__(self):
        object.__setattr__(self, "stopping", Stopping(self.stopping))
        if self.max_iterations < 1:
            raise ValueError(f"max_iterations must be >= 1, got {self.max_iterations}")
        if not self.tolerance > 0:
            raise ValueError(f"tolerance must be > 0, got {self.tolerance}")
        if self.workers < 1:
            raise ValueError(f"workers must be >= 1, got {self.workers}")
        if self.executor not in ("thread", "process"):
            raise ValueError(f"executor must be 'thread' or 'process', got {self.executor!r}")


@dataclass
class ParRealReport:
    errors: list                 # per iteration k = 0..K, vs serial fine at T
    increments: list             # per iteration k = 1..K
    iterations: int
    history: list                # history[k][n] = V^k_n
    reference: list              # serial fine slice-boundary states
    coarse_times: list = field(default_factory=list)
    fine_times: list = field(default_factory=list)
    parareal_time: float = 0.0
    serial_time: float = 0.0
    workers: int = 1

    @property
    def final(self) -> StateVector:
        return self.history[-1][-1]

    @property
    def c_c(self) -> float:
        return statistics.fmean(self.coarse_times) if self.coarse_times else 0.0

    @property
    def c_f(self) -> float:
        return statistics.fmean(self.fine_times) if self.fine_times else 0.0

    @property
    def speedup(self) -> float:
        return self.serial_time / self.parareal_time if self.parareal_time > 0 else float("nan")

    @property
    def efficiency(self) -> float:
        return self.speedup / self.workers

    def iterations_to(self, tol: float) -> Optional[int]:
        """First iteration whose error vs serial fine is <= tol."""
        for k, e in enumerate(self.errors):
            if e <= tol:
                return k
        return None


def serial_fine(F: Propagator, V0: StateVector, decomp: SliceDecomposition) -> list:
    """Classical sequential sweep; returns states at T^0..T^N."""
    if V0.tau != 0.0:
        raise ValueError(f"initial state must sit at tau = 0, got {V0.tau}")
    out = [V0]
    for n in range(decomp.n_slices):
        out.append(F.advance(out[-1], *decomp.slice(n)))
    return out


def _timed_advance(P, state, a, b):
    t0 = time.perf_counter()
    out = P.advance(state, a, b)
    return out, time.perf_counter() - t0


def _rel(a: np.ndarray, b: np.ndarray) -> float:
    nb = float(np.linalg.norm(b))
    d = float(np.linalg.norm(a - b))
    return d / nb if nb > 0 else d


def parareal_run(F: Propagator, G: Propagator, V0: StateVector, decomp: SliceDecomposition,
                 config: PararealConfig, reference: Optional[list] = None) -> ParRealReport:
    N = decomp.n_slices
    if config.max_iterations > N:
        raise ValueError(f"max_iterations {config.max_iterations} exceeds n_slices {N}")
    if reference is None:
        t0 = time.perf_counter()
        reference = serial_fine(F, V0, decomp)
        serial_time = time.perf_counter() - t0
    else:
        serial_time = 0.0
    ref_final = reference[-1].values
    coarse_times, fine_times = [], []

    def coarse(state, n, k):
        try:
            out, dt = _timed_advance(G, state, *decomp.slice(n))
        except Exception as exc:
            raise PararealError(n, k, exc) from exc
        coarse_times.append(dt)
        return out

    pool_cls = ThreadPoolExecutor if config.executor == "thread" else ProcessPoolExecutor
    start = time.perf_counter()
    with pool_cls(max_workers=config.workers) as pool:
        U = [V0]
        g_old = []
        for n in range(N):
            g_old.append(coarse(U[n], n, 0))
            U.append(g_old[n])
        history = [U]
        errors = [_rel(U[-1].values, ref_final)]
        increments = []
        k = 0
        while k < config.max_iterations:
            futures = [pool.submit(_timed_advance, F, U[n], *decomp.slice(n)) for n in range(N)]
            fine = []
            for n, fut in enumerate(futures):
                try:
                    out, dt = fut.result()
                except Exception as exc:
                    raise PararealError(n, k + 1, exc) from exc
                fine.append(out)
                fine_times.append(dt)
            new = [V0]
            g_new = []
            for n in range(N):
                g = coarse(new[n], n, k + 1)
                g_new.append(g)
                values = g.values + fine[n].values - g_old[n].values
                new.append(StateVector(values, fine[n].tau))
            k += 1
            increments.append(_rel(new[-1].values, U[-1].values))
            errors.append(_rel(new[-1].values, ref_final))
            history.append(new)
            U, g_old = new, g_new
            if config.stopping is Stopping.INCREMENT and increments[-1] < config.tolerance:
                break
            if config.stopping is Stopping.REFERENCE and errors[-1] < config.tolerance:
                break
    elapsed = time.perf_counter() - start
    return ParRealReport(errors, increments, k, history, reference, coarse_times, fine_times,
                         elapsed, serial_time, config.workers)


def speedup_bound(K: float, P: float, cc_over_cf: float) -> float:
    """Model speedup 1 / ((1 + K/P) c_c/c_f + K/P)."""
    if K < 1 or P < 1 or cc_over_cf < 0:
        raise ValueError("need K >= 1, P >= 1, cc_over_cf >= 0")
    q = K / P
    return 1.0 / ((1.0 + q) * cc_over_cf + q)


@dataclass
class Measurement:
    iterations: int
    workers: int
    n_slices: int
    c_c: tuple          # (mean, std) seconds per coarse slice
    c_f: tuple          # (mean, std) seconds per fine slice
    parareal_time: tuple
    serial_time: tuple
    errors: list

    @property
    def speedup(self) -> float:
        return self.serial_time[0] / self.parareal_time[0]

    @property
    def efficiency(self) -> float:
        return self.speedup / self.workers

    @property
    def bound(self) -> float:
        return speedup_bound(max(self.iterations, 1), self.n_slices, self.c_c[0] / self.c_f[0])


def _mean_std(xs) -> tuple:
    xs = list(xs)
    return statistics.fmean(xs), (statistics.stdev(xs) if len(xs) > 1 else 0.0)


def measure(F: Propagator, G: Propagator, V0: StateVector, decomp: SliceDecomposition,
            config: PararealConfig, repetitions: int = 5) -> Measurement:
    """Time serial fine and Parareal ``repetitions`` times each, after one warm-up run."""
    if repetitions < 1:
        raise ValueError(f"repetitions must be >= 1, got {repetitions}")
    # one untimed pass so caches and lazily compiled code are warm
    parareal_run(F, G, V0, decomp, config, reference=serial_fine(F, V0, decomp))
    serial, runs = [], []
    for _ in range(repetitions):
        t0 = time.perf_counter()
        ref = serial_fine(F, V0, decomp)
        serial.append(time.perf_counter() - t0)
        runs.append(parareal_run(F, G, V0, decomp, config, reference=ref))
    last = runs[-1]
    return Measurement(
        iterations=last.iterations,
        workers=config.workers,
        n_slices=decomp.n_slices,
        c_c=_mean_std(r.c_c for r in runs),
        c_f=_mean_std(r.c_f for r in runs),
        parareal_time=_mean_std(r.parareal_time for r in runs),
        serial_time=_mean_std(serial),
        errors=last.errors,
    )
