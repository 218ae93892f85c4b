"""Fully connected network u(t, S) with second-order jet propagation.

Inputs are scaled as (t, S / input_scale) and the raw output is multiplied by
``output_scale``. The jet pass carries (value, d/dt, d/ds, d2/ds2) through
every layer in scaled coordinates; :func:`forward_jet` converts to physical
units. Reverse accumulation through the same pass gives exact parameter
gradients of any loss built from the four output components.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import _kernels


class Activation(str, Enum):
    TANH = "tanh"
    RELU = "relu"


def _act(kind: Activation, z: np.ndarray, order: int):
    """Activation and its first ``order`` derivatives (up to 3)."""
    if kind is Activation.TANH:
        u = np.tanh(z)
        if order == 0:
            return (u,)
        p1 = 1.0 - u * u
        if order == 1:
            return u, p1
        p2 = -2.0 * u * p1
        p3 = (6.0 * u * u - 2.0) * p1
        return u, p1, p2, p3
    u = np.maximum(z, 0.0)
    if order == 0:
        return (u,)
    p1 = (z > 0).astype(z.dtype)
    if order == 1:
        return u, p1
    zero = np.zeros_like(z)
    return u, p1, zero, zero


@dataclass
class Jet2:
    value: np.ndarray
    d_t: np.ndarray
    d_s: np.ndarray
    d_ss: np.ndarray


@dataclass
class Mlp:
    weights: list  # per layer, shape (fan_out, fan_in)
    biases: list
    activation: Activation = Activation.TANH
    input_scale: float = 5000.0
    output_scale: float = 2500.0

    def __post_init__(self):
        self.activation = Activation(self.activation)
        if len(self.weights) != len(self.biases) or not self.weights:
            raise ValueError("need one bias vector per weight matrix")
        if self.weights[0].shape[1] != 2 or self.weights[-1].shape[0] != 1:
            raise ValueError("network must map (t, S) to a scalar")

    @property
    def layer_sizes(self) -> list:
        return [self.weights[0].shape[1]] + [w.shape[0] for w in self.weights]

    @property
    def dtype(self):
        return self.weights[0].dtype

    def astype(self, dtype) -> "Mlp":
        return Mlp([w.astype(dtype) for w in self.weights], [b.astype(dtype) for b in self.biases],
                   self.activation, self.input_scale, self.output_scale)

    @property
    def n_params(self) -> int:
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases))

    def parameters(self) -> list:
        """Flat list [W0, b0, W1, b1, ...] of the live arrays."""
        out = []
        for w, b in zip(self.weights, self.biases):
            out += [w, b]
        return out

    def copy(self) -> "Mlp":
        return Mlp([w.copy() for w in self.weights], [b.copy() for b in self.biases],
                   self.activation, self.input_scale, self.output_scale)

    def __call__(self, t, S):
        return forward(self, t, S)

    def jet(self, t, S) -> Jet2:
        return forward_jet(self, t, S)


def init_kaiming(layer_sizes, seed: int = 0, activation=Activation.TANH,
                 input_scale: float = 5000.0, output_scale: float = 2500.0) -> Mlp:
    """He-normal weights (std sqrt(2 / fan_in)), zero biases."""
    layer_sizes = list(layer_sizes)
    if len(layer_sizes) < 2:
        raise ValueError("need at least an input and an output layer")
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(layer_sizes[:-1], layer_sizes[1:]):
        weights.append(rng.normal(0.0, np.sqrt(2.0 / fan_in), size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    return Mlp(weights, biases, Activation(activation), input_scale, output_scale)


def _inputs(net: Mlp, t, S) -> tuple[np.ndarray, tuple]:
    t, S = np.broadcast_arrays(np.asarray(t, dtype=float), np.asarray(S, dtype=float))
    X = np.stack([t.ravel(), S.ravel() / net.input_scale], axis=1)
    return X.astype(net.dtype, copy=False), t.shape


def forward_raw(net: Mlp, X: np.ndarray) -> np.ndarray:
    """Unscaled network output for scaled inputs X of shape (n, 2)."""
    h = X
    last = len(net.weights) - 1
    for i, (W, b) in enumerate(zip(net.weights, net.biases)):
        h = h @ W.T + b
        if i < last:
            h = _act(net.activation, h, 0)[0]
    return h[:, 0]


def forward(net: Mlp, t, S):
    """Network prediction in physical units."""
    X, shape = _inputs(net, t, S)
    out = net.output_scale * forward_raw(net, X).astype(float)
    out = out.reshape(shape)
    return out.item() if out.ndim == 0 else out


class Workspace:
    """Scratch arrays reused across calls of the same shape.

    Training repeats identical tape shapes every step; keeping the large
    buffers alive avoids re-faulting fresh pages on each allocation. A tape
    built on a workspace is only valid until the next tape with the same tag.
    """

    def __init__(self):
        self._bufs = {}

    def get(self, key, shape, dtype) -> np.ndarray:
        a = self._bufs.get(key)
        if a is None or a.shape != shape or a.dtype != dtype:
            a = np.empty(shape, dtype=dtype)
            self._bufs[key] = a
        return a


class JetTape:
    """Forward jet pass over scaled inputs, kept for reverse accumulation.

    ``order`` 0 tracks the value only, 2 tracks value and the t, s, ss
    derivatives with respect to the scaled inputs. Components are stacked
    along the first axis so each layer needs a single matrix product.
    """

    def __init__(self, net: Mlp, X: np.ndarray, order: int = 2,
                 workspace: Workspace | None = None, tag: str = ""):
        self.net = net
        self.order = order
        self.dtype = net.dtype
        self.ws = workspace if workspace is not None else Workspace()
        self.tag = tag
        X = np.asarray(X, dtype=self.dtype)
        n = X.shape[0]
        if order:
            H = self._buf("x", 0, (4, n, 2))
            H.fill(0.0)
            H[0] = X
            H[1, :, 0] = 1.0
            H[2, :, 1] = 1.0
        else:
            H = X[None]
        self.inputs = []  # stacked input jet of every layer
        self.saved = []   # (p1, p2, pre-activation jet) per hidden layer
        last = len(net.weights) - 1
        for i, (W, b) in enumerate(zip(net.weights, net.biases)):
            self.inputs.append(H)
            c = H.shape[0]
            Z = self._buf("z", i, (c, n, W.shape[0]))
            np.matmul(H.reshape(c * n, -1), W.T, out=Z.reshape(c * n, -1))
            Z[0] += b
            if i == last:
                H = Z
                break
            H = self._buf("h", i, Z.shape)
            p1 = self._buf("p1", i, Z.shape[1:])
            if order == 0:
                H[0], p1[...] = _act(net.activation, Z[0], 1)
                self.saved.append((p1, None, None))
                continue
            if net.activation is Activation.TANH:
                np.tanh(Z[0], out=H[0])
            else:
                np.maximum(Z[0], 0.0, out=H[0])
            p2 = self._buf("p2", i, Z.shape[1:])
            _kernels.jet_forward(_kernels.kind_code(net.activation), Z, H, p1, p2)
            self.saved.append((p1, p2, Z))
        self.output = [comp[:, 0].copy() for comp in H]

    def _buf(self, name, i, shape):
        return self.ws.get((self.tag, name, i), shape, self.dtype)

    def backward(self, adjoints) -> list:
        """Parameter gradients [dW0, db0, ...] for output-component adjoints.

        ``adjoints`` matches ``self.output``: one array per tracked component.
        """
        net = self.net
        G = np.stack([np.asarray(a, dtype=self.dtype) for a in adjoints])[:, :, None]
        c, n = G.shape[0], G.shape[1]
        grads = [None] * (2 * len(net.weights))
        for i in range(len(net.weights) - 1, -1, -1):
            W = net.weights[i]
            H = self.inputs[i]
            grads[2 * i] = G.reshape(c * n, -1).T @ H.reshape(c * n, -1)
            grads[2 * i + 1] = G[0].sum(axis=0)
            if i == 0:
                break
            GH = self._buf("gh", i, (c, n, W.shape[1]))
            if W.shape[0] == 1:
                # rank-one product: a broadcast is far cheaper than gemm
                np.multiply(G, W[0], out=GH)
            else:
                np.matmul(G.reshape(c * n, -1), W, out=GH.reshape(c * n, -1))
            p1, p2, Z = self.saved[i - 1]
            if self.order == 0:
                G = np.multiply(GH, p1, out=GH)
                continue
            G = self._buf("g", i, GH.shape)
            _kernels.jet_backward(_kernels.kind_code(net.activation), GH, Z, H, p1, p2, G)
        return grads


def forward_jet(net: Mlp, t, S) -> Jet2:
    """Value and exact t, S, SS partials in physical units."""
    X, shape = _inputs(net, t, S)
    tape = JetTape(net, X, order=2)
    y, yt, ys, yss = (c.astype(float) for c in tape.output)
    k, L = net.output_scale, net.input_scale
    comps = [k * y, k * yt, k * ys / L, k * yss / (L * L)]
    comps = [c.reshape(shape) for c in comps]
    return Jet2(*comps)
