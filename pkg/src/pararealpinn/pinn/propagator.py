"""Network-backed coarse propagator."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..discretization import SpatialGrid, StateVector
from .network import Mlp


def nn_coarse_propagate(net: Mlp, state: StateVector, tau_start: float, tau_end: float,
                        grid: SpatialGrid, expiry: float) -> StateVector:
    """Network solution at the slice end, t = expiry - tau_end.

    The incoming state values are not used: the network represents the
    whole space-time solution u(t, S).
    """
    if not tau_end > tau_start:
        raise ValueError(f"tau_end {tau_end} must exceed tau_start {tau_start}")
    S = grid.interior
    values = np.asarray(net(np.full(S.shape, expiry - tau_end), S), dtype=float)
    return StateVector(values, tau_end)


@dataclass(frozen=True)
class NetworkPropagator:
    net: Mlp
    grid: SpatialGrid
    expiry: float

    def advance(self, state: StateVector, tau_start: float, tau_end: float) -> StateVector:
        return nn_coarse_propagate(self.net, state, tau_start, tau_end, self.grid, self.expiry)
