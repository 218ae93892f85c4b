import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from pararealpinn.pinn import Activation, Mlp, forward, forward_jet, init_kaiming

L, K = 5000.0, 2500.0


def _pts(n=12, seed=0):
    rng = np.random.default_rng(seed)
    return rng.uniform(0.05, 0.95, n), rng.uniform(200.0, 4800.0, n)


def test_init_determinism_and_shapes():
    a, b = init_kaiming([2, 8, 8, 1], seed=3), init_kaiming([2, 8, 8, 1], seed=3)
    for x, y in zip(a.parameters(), b.parameters()):
        assert np.array_equal(x, y)
    net = init_kaiming([2, 1])
    assert net.weights[0].shape == (1, 2) and net.biases[0].shape == (1,)
    assert net.layer_sizes == [2, 1]
    assert all(not np.any(bias) for bias in init_kaiming([2, 5, 1]).biases)
    with pytest.raises(ValueError):
        init_kaiming([2])


def test_init_variance():
    w = init_kaiming([2, 50, 50, 1], seed=1).weights[1]
    # 2500 draws; 10% band is many standard errors wide
    assert abs(w.var() - 2 / 50) <= 0.1 * 2 / 50


def test_invalid_shapes():
    with pytest.raises(ValueError):
        Mlp([np.zeros((1, 3))], [np.zeros(1)])
    with pytest.raises(ValueError):
        Mlp([np.zeros((2, 2))], [np.zeros(2)])


def test_zero_output_layer():
    net = init_kaiming([2, 6, 1], seed=0)
    net.weights[-1][:] = 0.0
    net.biases[-1][:] = 0.0
    t, S = _pts()
    assert not np.any(forward(net, t, S))


def test_affine_network():
    wt, ws, b = 0.7, -1.3, 0.25
    net = Mlp([np.array([[wt, ws]])], [np.array([b])], input_scale=L, output_scale=K)
    t, S = _pts()
    assert np.allclose(forward(net, t, S), K * (wt * t + ws * S / L + b), rtol=1e-14)
    assert forward(net, 0.5, 1000.0) == pytest.approx(K * (wt * 0.5 + ws * 0.2 + b))


def _independent_forward(net, t, S):
    out = []
    for ti, Si in zip(t, S):
        h = [ti, Si / net.input_scale]
        for i, (W, b) in enumerate(zip(net.weights, net.biases)):
            z = [sum(W[r][c] * h[c] for c in range(len(h))) + b[r] for r in range(len(b))]
            h = z if i == len(net.weights) - 1 else [float(np.tanh(v)) for v in z]
        out.append(net.output_scale * h[0])
    return np.array(out)


def test_forward_duplicate_evaluation():
    net = init_kaiming([2, 7, 5, 1], seed=4)
    net.biases = [np.random.default_rng(9).normal(size=b.shape) for b in net.biases]
    t, S = _pts(6)
    assert np.allclose(forward(net, t, S), _independent_forward(net, t, S), rtol=1e-12)


def test_constant_network_jet():
    net = Mlp([np.zeros((3, 2)), np.zeros((1, 3))], [np.ones(3), np.array([0.4])])
    j = forward_jet(net, *_pts())
    assert not np.any(j.d_t) and not np.any(j.d_s) and not np.any(j.d_ss)


def test_single_neuron_jet_by_hand():
    wt, ws, wo = 0.8, 1.7, 1.0
    net = Mlp([np.array([[wt, ws]]), np.array([[wo]])], [np.zeros(1), np.zeros(1)],
              input_scale=L, output_scale=K)
    t, S = _pts()
    u = np.tanh(wt * t + ws * S / L)
    j = forward_jet(net, t, S)
    assert np.allclose(j.value, K * u, rtol=1e-14)
    assert np.allclose(j.d_t, K * wt * (1 - u**2), rtol=1e-13)
    assert np.allclose(j.d_s, K * ws / L * (1 - u**2), rtol=1e-13)
    assert np.allclose(j.d_ss, K * (-2 * u * (1 - u**2)) * ws**2 / L**2, rtol=1e-12)


def _fd_check(net, t, S, mask=None):
    j = forward_jet(net, t, S)
    f = lambda tt, ss: forward(net, tt, ss)
    ht, hs = 1e-4, 1e-4 * L
    fd_t = (f(t + ht, S) - f(t - ht, S)) / (2 * ht)
    fd_s = (f(t, S + hs) - f(t, S - hs)) / (2 * hs)
    fd_ss = (f(t, S + hs) - 2 * f(t, S) + f(t, S - hs)) / hs**2
    assert np.array_equal(j.value, f(t, S))
    scale = lambda a: np.max(np.abs(a)) + 1e-30
    for got, ref, tol in ((j.d_t, fd_t, 1e-6), (j.d_s, fd_s, 1e-6), (j.d_ss, fd_ss, 1e-5)):
        if mask is not None:
            got, ref = got[mask], ref[mask]
        assert np.max(np.abs(got - ref)) / scale(ref) <= tol


@given(st.integers(0, 10_000))
def test_tanh_jet_matches_finite_differences(seed):
    net = init_kaiming([2, 10, 10, 1], seed=seed)
    _fd_check(net, *_pts(8, seed))


def test_tanh_jet_deep_net():
    # normwise relative: ||jet - fd||_inf / ||fd||_inf
    _fd_check(init_kaiming([2, 20, 20, 20, 1], seed=11), *_pts(20, 3))


def test_relu_jet_away_from_kinks():
    net = init_kaiming([2, 10, 10, 1], seed=5, activation=Activation.RELU)
    t, S = _pts(30, 1)
    # relu is piecewise linear: the second derivative is zero everywhere off the kinks
    assert not np.any(forward_jet(net, t, S).d_ss)
    # points whose pre-activations all sit clear of zero
    X = np.stack([t, S / L], 1)
    h, far = X, np.ones(len(t), bool)
    for W, b in zip(net.weights[:-1], net.biases[:-1]):
        z = h @ W.T + b
        far &= np.all(np.abs(z) > 1e-2, axis=1)
        h = np.maximum(z, 0)
    j = forward_jet(net, t, S)
    hh = 1e-6
    fd_t = (forward(net, t + hh, S) - forward(net, t - hh, S)) / (2 * hh)
    fd_s = (forward(net, t, S + hh * L) - forward(net, t, S - hh * L)) / (2 * hh * L)
    assert far.sum() > 5
    assert np.allclose(j.d_t[far], fd_t[far], rtol=1e-6, atol=1e-9)
    assert np.allclose(j.d_s[far], fd_s[far], rtol=1e-6, atol=1e-12)


@given(st.floats(0.1, 10.0))
def test_scale_covariance(c):
    net = init_kaiming([2, 6, 6, 1], seed=2)
    t, S = _pts()
    big = net.copy()
    big.output_scale = net.output_scale * c
    a, b = forward_jet(net, t, S), forward_jet(big, t, S)
    for x, y in ((a.value, b.value), (a.d_t, b.d_t), (a.d_s, b.d_s), (a.d_ss, b.d_ss)):
        assert np.allclose(y, c * x, rtol=1e-14, atol=0)


def test_float32_network_tracks_float64():
    net = init_kaiming([2, 20, 20, 1], seed=8)
    t, S = _pts()
    assert np.allclose(forward(net.astype(np.float32), t, S), forward(net, t, S), rtol=1e-4, atol=1e-2)
