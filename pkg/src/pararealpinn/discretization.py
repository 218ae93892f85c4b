"""Finite-difference semi-discretization and implicit time stepping.

The backward-in-time Black-Scholes problem is rewritten in reversed time
tau = T - t, so every stepper marches forward from the payoff at tau = 0.
Only interior nodes S_1..S_{N-1} are unknowns; V_0 = 0 and the upper
boundary value enters the last row as a forcing term.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Optional

import numpy as np

from .model import MarketParams, UpperBoundary, payoff, upper_boundary_value


class SingularSystemError(ArithmeticError):
    """Zero pivot met during tridiagonal elimination."""


class StepScheme(str, Enum):
    CRANK_NICOLSON = "crank_nicolson"
    IMPLICIT_EULER = "implicit_euler"


@dataclass(frozen=True)
class SpatialGrid:
    domain_bound: float = 5000.0
    n_intervals: int = 1000
    upper_bc: UpperBoundary = UpperBoundary.ASYMPTOTIC

    def __post_init__(self):
        if self.n_intervals < 2:
            raise ValueError(f"n_intervals must be >= 2, got {self.n_intervals}")
        if not self.domain_bound > 0:
            raise ValueError(f"domain_bound must be > 0, got {self.domain_bound}")
        object.__setattr__(self, "upper_bc", UpperBoundary(self.upper_bc))

    @classmethod
    def for_params(cls, params: MarketParams, n_intervals: int = 1000,
                   upper_bc=UpperBoundary.ASYMPTOTIC) -> "SpatialGrid":
        return cls(params.domain_bound, n_intervals, upper_bc)

    @property
    def spacing(self) -> float:
        return self.domain_bound / self.n_intervals

    @property
    def nodes(self) -> np.ndarray:
        return np.arange(self.n_intervals + 1) * self.spacing

    @property
    def interior(self) -> np.ndarray:
        return self.nodes[1:-1]


@dataclass(frozen=True)
class StateVector:
    """Interior option values at reversed time ``tau``."""

    values: np.ndarray
    tau: float

    def with_boundary(self, grid: SpatialGrid, params: MarketParams) -> np.ndarray:
        """Values on all N + 1 nodes, boundary entries filled in."""
        t = params.expiry - self.tau
        top = upper_boundary_value(t, params, grid.upper_bc)
        return np.concatenate(([0.0], self.values, [top]))


@dataclass(frozen=True)
class TridiagonalMatrix:
    lower: np.ndarray
    diag: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        n = len(self.diag)
        if len(self.lower) != n - 1 or len(self.upper) != n - 1:
            raise ValueError(
                f"inconsistent bands: diag {n}, lower {len(self.lower)}, upper {len(self.upper)}"
            )

    @property
    def size(self) -> int:
        return len(self.diag)

    def matvec(self, x: np.ndarray) -> np.ndarray:
        y = self.diag * x
        y[1:] += self.lower * x[:-1]
        y[:-1] += self.upper * x[1:]
        return y

    def to_dense(self) -> np.ndarray:
        return np.diag(self.diag) + np.diag(self.lower, -1) + np.diag(self.upper, 1)

    def identity_minus(self, c: float) -> "TridiagonalMatrix":
        """I - c * self."""
        return TridiagonalMatrix(-c * self.lower, 1.0 - c * self.diag, -c * self.upper)


def _stencil(grid: SpatialGrid, params: MarketParams):
    S = grid.interior
    a = params.sigma**2 * S**2 / (2.0 * grid.spacing**2)
    b = params.r * S / (2.0 * grid.spacing)
    return a, b


def build_operator(grid: SpatialGrid, params: MarketParams) -> TridiagonalMatrix:
    """Interior operator A of w'(tau) = A w + boundary forcing."""
    a, b = _stencil(grid, params)
    lower = (a - b)[1:]
    upper = (a + b)[:-1]
    return TridiagonalMatrix(lower, -2.0 * a - params.r, upper)


def boundary_coupling(grid: SpatialGrid, params: MarketParams) -> tuple[float, float]:
    """Coefficients multiplying V_0 in row 1 and V_N in row N-1."""
    a, b = _stencil(grid, params)
    return float(a[0] - b[0]), float(a[-1] + b[-1])


def boundary_forcing(grid: SpatialGrid, params: MarketParams) -> Optional[Callable[[float], np.ndarray]]:
    """Forcing vector f(tau) contributed by the upper Dirichlet value, or None if zero."""
    if grid.upper_bc is UpperBoundary.ZERO:
        return None
    _, coeff = boundary_coupling(grid, params)
    n = grid.n_intervals - 1

    def forcing(tau: float) -> np.ndarray:
        f = np.zeros(n)
        f[-1] = coeff * upper_boundary_value(params.expiry - tau, params, grid.upper_bc)
        return f

    return forcing


def thomas_solve(m: TridiagonalMatrix, rhs) -> np.ndarray:
    """Solve m x = rhs by the Thomas algorithm (no pivoting)."""
    d = np.asarray(rhs, dtype=float)
    n = m.size
    if d.shape != (n,):
        raise ValueError(f"rhs shape {d.shape} does not match matrix size {n}")
    # plain lists are several times faster than numpy scalar indexing here
    lo, di, up, d = m.lower.tolist(), m.diag.tolist(), m.upper.tolist(), d.tolist()
    cp = [0.0] * n
    dp = [0.0] * n
    piv = di[0]
    if piv == 0.0:
        raise SingularSystemError("zero pivot at row 0")
    if n > 1:
        cp[0] = up[0] / piv
    dp[0] = d[0] / piv
    for i in range(1, n):
        piv = di[i] - lo[i - 1] * cp[i - 1]
        if piv == 0.0:
            raise SingularSystemError(f"zero pivot at row {i}")
        if i < n - 1:
            cp[i] = up[i] / piv
        dp[i] = (d[i] - lo[i - 1] * dp[i - 1]) / piv
    x = dp
    for i in range(n - 2, -1, -1):
        x[i] = dp[i] - cp[i] * x[i + 1]
    return np.array(x)


def step(state: StateVector, A: TridiagonalMatrix, dtau: float, scheme,
         forcing: Optional[Callable[[float], np.ndarray]] = None) -> StateVector:
    """Advance one implicit step of size ``dtau``."""
    if not dtau > 0:
        raise ValueError(f"dtau must be > 0, got {dtau}")
    scheme = StepScheme(scheme)
    w = state.values
    tau_new = state.tau + dtau
    if scheme is StepScheme.IMPLICIT_EULER:
        rhs = w.copy()
        if forcing is not None:
            rhs += dtau * forcing(tau_new)
        x = thomas_solve(A.identity_minus(dtau), rhs)
    else:
        half = 0.5 * dtau
        rhs = w + half * A.matvec(w)
        if forcing is not None:
            rhs += half * (forcing(state.tau) + forcing(tau_new))
        x = thomas_solve(A.identity_minus(half), rhs)
    return StateVector(x, tau_new)


def propagate(state: StateVector, tau_start: float, tau_end: float, n_steps: int, scheme,
              grid: SpatialGrid, params: MarketParams, startup_steps: int = 0) -> StateVector:
    """Integrate from tau_start to tau_end with ``n_steps`` equal steps.

    ``startup_steps`` > 0 replaces that many leading Crank-Nicolson steps by
    pairs of implicit Euler half steps when starting from the payoff
    (tau_start == 0), damping the high-frequency content of the kink.
    """
    if not tau_end > tau_start:
        raise ValueError(f"tau_end {tau_end} must exceed tau_start {tau_start}")
    if n_steps < 1:
        raise ValueError(f"n_steps must be >= 1, got {n_steps}")
    if not math.isclose(state.tau, tau_start, rel_tol=0.0, abs_tol=1e-12):
        raise ValueError(f"state is at tau={state.tau}, expected {tau_start}")
    scheme = StepScheme(scheme)
    A = build_operator(grid, params)
    forcing = boundary_forcing(grid, params)
    dtau = (tau_end - tau_start) / n_steps
    cur = StateVector(state.values, tau_start)
    smoothing = scheme is StepScheme.CRANK_NICOLSON and tau_start == 0.0
    for i in range(n_steps):
        if smoothing and i < startup_steps:
            cur = step(cur, A, 0.5 * dtau, StepScheme.IMPLICIT_EULER, forcing)
            cur = step(cur, A, 0.5 * dtau, StepScheme.IMPLICIT_EULER, forcing)
        else:
            cur = step(cur, A, dtau, scheme, forcing)
    # land exactly on the requested end time
    return StateVector(cur.values, tau_end)


def terminal_state(grid: SpatialGrid, params: MarketParams) -> StateVector:
    """Payoff on the interior nodes at tau = 0."""
    return StateVector(np.asarray(payoff(grid.interior, params), dtype=float), 0.0)
