"""Continuous Black-Scholes problem for a European call.

Holds the market parameters, the payoff, the boundary data used on the
truncated asset domain, the closed-form price and the error metric shared by
every experiment.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from enum import Enum

import numpy as np
from scipy.special import erfc


class InvalidParameterError(ValueError):
    """A parameter violates its documented invariant."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


class InvalidReferenceError(ValueError):
    """Normalized error requested against a zero-norm reference."""


class UpperBoundary(str, Enum):
    """Dirichlet data imposed at the artificial bound S = L.

    ``asymptotic`` uses the large-S behaviour of a call, ``L - K exp(-r (T - t))``.
    ``zero`` is the homogeneous condition V(t, L) = 0. ``exact`` uses the
    closed-form price itself and only exists for verification runs.
    """

    ASYMPTOTIC = "asymptotic"
    ZERO = "zero"
    EXACT = "exact"


class ErrorMetric(str, Enum):
    NORMALIZED_L2 = "normalized_l2"


@dataclass(frozen=True)
class MarketParams:
    r: float = 0.03
    sigma: float = 0.4
    strike: float = 2500.0
    expiry: float = 1.0
    domain_bound: float = 5000.0

    def __post_init__(self):
        if not self.sigma > 0:
            raise InvalidParameterError("sigma", f"must be > 0, got {self.sigma}")
        if not self.expiry > 0:
            raise InvalidParameterError("expiry", f"must be > 0, got {self.expiry}")
        if not self.strike > 0:
            raise InvalidParameterError("strike", f"must be > 0, got {self.strike}")
        if not self.domain_bound > self.strike:
            raise InvalidParameterError(
                "domain_bound", f"must exceed strike {self.strike}, got {self.domain_bound}"
            )
        if not self.r >= 0:
            raise InvalidParameterError("r", f"must be >= 0, got {self.r}")

    def replace(self, **changes) -> "MarketParams":
        return MarketParams(**{**asdict(self), **changes})


def payoff(S, params: MarketParams):
    """Call payoff max(S - K, 0); scalar in, scalar out."""
    S = np.asarray(S, dtype=float)
    out = np.maximum(S - params.strike, 0.0)
    return out.item() if out.ndim == 0 else out


def norm_cdf(x):
    """Standard normal CDF via the complementary error function."""
    return 0.5 * erfc(-np.asarray(x, dtype=float) / math.sqrt(2.0))


def norm_pdf(x):
    x = np.asarray(x, dtype=float)
    return np.exp(-0.5 * x * x) / math.sqrt(2.0 * math.pi)


def _d1_d2(S, tau, params: MarketParams):
    vol = params.sigma * np.sqrt(tau)
    with np.errstate(divide="ignore"):
        d1 = (np.log(S / params.strike) + (params.r + 0.5 * params.sigma**2) * tau) / vol
    return d1, d1 - vol


def analytic_call_price(S, t, params: MarketParams):
    """Closed-form European call price V(t, S)."""
    S, t = np.broadcast_arrays(np.asarray(S, dtype=float), np.asarray(t, dtype=float))
    tau = params.expiry - t
    out = np.array(np.maximum(S - params.strike, 0.0), dtype=float)
    live = (tau > 0) & (S > 0)
    if np.any(live):
        s, tl = S[live], tau[live]
        d1, d2 = _d1_d2(s, tl, params)
        out[live] = s * norm_cdf(d1) - params.strike * np.exp(-params.r * tl) * norm_cdf(d2)
    return out.item() if out.ndim == 0 else out


def analytic_call_jet(S, t, params: MarketParams):
    """Closed-form price with its t, S and SS partial derivatives.

    Valid for t < T and S > 0. Returns ``(value, d_t, d_s, d_ss)`` arrays.
    """
    S = np.asarray(S, dtype=float)
    tau = params.expiry - np.asarray(t, dtype=float)
    d1, d2 = _d1_d2(S, tau, params)
    disc = params.strike * np.exp(-params.r * tau)
    value = S * norm_cdf(d1) - disc * norm_cdf(d2)
    delta = norm_cdf(d1)
    gamma = norm_pdf(d1) / (S * params.sigma * np.sqrt(tau))
    theta = -S * norm_pdf(d1) * params.sigma / (2.0 * np.sqrt(tau)) - params.r * disc * norm_cdf(d2)
    return value, theta, delta, gamma


def upper_boundary_value(t, params: MarketParams, kind=UpperBoundary.ASYMPTOTIC):
    """Dirichlet value at S = L for physical time t."""
    kind = UpperBoundary(kind)
    t = np.asarray(t, dtype=float)
    if kind is UpperBoundary.ZERO:
        out = np.zeros_like(t)
    elif kind is UpperBoundary.ASYMPTOTIC:
        out = params.domain_bound - params.strike * np.exp(-params.r * (params.expiry - t))
    else:
        out = np.asarray(analytic_call_price(np.full_like(t, params.domain_bound), t, params))
    return out.item() if out.ndim == 0 else out


def error(a, b, metric=ErrorMetric.NORMALIZED_L2) -> float:
    """Normalized l2 distance ||a - b|| / ||b||."""
    ErrorMetric(metric)
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    scale = float(np.max(np.abs(b))) if b.size else 0.0
    if scale == 0.0:
        raise InvalidReferenceError("reference vector has zero norm")
    # scaling first keeps tiny or huge entries from under/overflowing the squares
    return float(np.linalg.norm((a - b) / scale) / np.linalg.norm(b / scale))
