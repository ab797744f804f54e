from __future__ import annotations

import numpy as np
import pytest

from mobaslice import nn
from mobaslice.errors import ConfigError, ShapeMismatch


def fd_gradients(net, loss_of, eps=1e-6, coords=None, rng=None):
    """Central differences of ``loss_of()`` w.r.t. each parameter tensor.

    ``coords`` caps how many entries per tensor are probed (random subset).
    """
    out = []
    for p in net.params():
        g = np.zeros_like(p)
        flat, gflat = p.reshape(-1), g.reshape(-1)
        idx = np.arange(flat.size)
        if coords is not None and flat.size > coords:
            idx = rng.choice(flat.size, coords, replace=False)
        for j in idx:
            old = flat[j]
            flat[j] = old + eps
            up = loss_of()
            flat[j] = old - eps
            down = loss_of()
            flat[j] = old
            gflat[j] = (up - down) / (2 * eps)
        out.append((g, idx))
    return out


def rel_err(a, b):
    return np.linalg.norm(a - b) / max(np.linalg.norm(a) + np.linalg.norm(b), 1e-12)


def check_net(net, x, y, coords=None, seed=0):
    rng = np.random.default_rng(seed)

    def loss_of():
        out, _ = nn.forward(net, x)
        return nn.mse_loss(out, y)[0]

    out, cache = nn.forward(net, x)
    _, g_out = nn.mse_loss(out, y)
    grads, g_in = nn.backward(net, cache, g_out)
    for analytic, (numeric, idx) in zip(grads, fd_gradients(net, loss_of, coords=coords, rng=rng)):
        a = analytic.reshape(-1)[idx]
        n = numeric.reshape(-1)[idx]
        assert rel_err(a, n) < 1e-4
    return g_in


def test_identity_layer():
    net = nn.DenseNet([nn.Layer(np.eye(3), np.zeros(3), "identity")])
    x = np.array([[1.0, -2.0, 3.5]])
    np.testing.assert_array_equal(nn.forward(net, x)[0], x)


def test_relu_layer():
    net = nn.DenseNet([nn.Layer(np.eye(2), np.zeros(2), "relu")])
    np.testing.assert_array_equal(nn.forward(net, np.array([[-1.0, 2.0]]))[0], [[0.0, 2.0]])


def test_shape_checks():
    with pytest.raises(ShapeMismatch):
        nn.DenseNet([nn.Layer(np.eye(2), np.zeros(2)), nn.Layer(np.eye(3), np.zeros(3))])
    net = nn.init_net([3, 2], ["tanh"], rng=0)
    with pytest.raises(ShapeMismatch):
        nn.forward(net, np.zeros((4, 2)))
    with pytest.raises(ConfigError):
        nn.Layer(np.eye(2), np.zeros(2), "gelu")


def test_dropout_mask_reproducible_and_eval_clean():
    net = nn.init_net([6, 50, 1], ["relu", "tanh"], dropout=0.5, rng=1)
    x = np.random.default_rng(2).normal(size=(4, 6))
    a, ca = nn.forward(net, x, True, np.random.default_rng(9))
    b, cb = nn.forward(net, x, True, np.random.default_rng(9))
    np.testing.assert_array_equal(a, b)
    np.testing.assert_array_equal(ca.masks[0], cb.masks[0])
    assert set(np.unique(ca.masks[0])) <= {0.0, 2.0}
    assert ca.masks[1] is None
    net.set_dropout(0.0)
    clean, _ = nn.forward(net, x)
    net.set_dropout(0.5)
    np.testing.assert_array_equal(nn.forward(net, x)[0], clean)


def test_train_dropout_needs_rng():
    net = nn.init_net([2, 3, 1], ["relu", "tanh"], dropout=0.5, rng=0)
    with pytest.raises(ConfigError):
        nn.forward(net, np.ones((1, 2)), train=True)


def test_inverted_dropout_expectation():
    # all-ones readout of positive units gives a well-conditioned mean
    net = nn.init_net([5, 30, 1], ["relu", "identity"], dropout=0.5, rng=3)
    net.layers[0].weight = np.abs(net.layers[0].weight)
    net.layers[1].weight = np.ones((30, 1))
    x = np.abs(np.random.default_rng(4).normal(size=(1, 5)))
    eval_out = nn.forward(net, x)[0][0, 0]
    rng = np.random.default_rng(5)
    xs = np.repeat(x, 10_000, axis=0)
    mean = nn.forward(net, xs, True, rng)[0].mean()
    assert abs(mean - eval_out) <= 0.02 * abs(eval_out)


def test_linear_mse_closed_form():
    rng = np.random.default_rng(0)
    x, y = rng.normal(size=(7, 3)), rng.normal(size=(7, 1))
    net = nn.init_net([3, 1], ["identity"], rng=1)
    out, cache = nn.forward(net, x)
    _, g = nn.mse_loss(out, y)
    grads, _ = nn.backward(net, cache, g)
    np.testing.assert_allclose(grads[0], 2 * x.T @ (out - y) / 7, rtol=1e-12)
    np.testing.assert_allclose(grads[1], 2 * (out - y).sum(0) / 7, rtol=1e-12)


def test_zero_output_gradient():
    net = nn.init_net([4, 5, 1], ["relu", "tanh"], rng=0)
    out, cache = nn.forward(net, np.ones((3, 4)))
    grads, g_in = nn.backward(net, cache, np.zeros_like(out))
    assert all(not g.any() for g in grads) and not g_in.any()


def test_random_three_layer_gradients():
    rng = np.random.default_rng(11)
    net = nn.init_net([6, 9, 7, 1], ["relu", "tanh", "tanh"], rng=2)
    x, y = rng.normal(size=(20, 6)), rng.uniform(-1, 1, size=(20, 1))
    g_in = check_net(net, x, y)
    # input gradient by finite differences too
    eps = 1e-6
    num = np.zeros_like(x)
    for i in range(x.shape[0]):
        for j in range(x.shape[1]):
            xp, xm = x.copy(), x.copy()
            xp[i, j] += eps
            xm[i, j] -= eps
            num[i, j] = (nn.mse_loss(nn.forward(net, xp)[0], y)[0] - nn.mse_loss(nn.forward(net, xm)[0], y)[0]) / (2 * eps)
    assert rel_err(g_in, num) < 1e-4


def test_backward_shape_mismatch():
    net = nn.init_net([2, 1], ["tanh"], rng=0)
    _, cache = nn.forward(net, np.ones((3, 2)))
    with pytest.raises(ShapeMismatch):
        nn.backward(net, cache, np.ones((2, 1)))


def test_losses():
    assert nn.mae_loss(np.array([1.0, 3.0]), np.zeros(2))[0] == 2.0
    assert nn.mse_loss(np.array([1.0, 3.0]), np.zeros(2))[0] == 5.0
    loss, g = nn.mae_loss(np.array([0.5, -1.0, 2.0]), np.array([0.5, 0.0, 0.0]))
    np.testing.assert_array_equal(g, [0.0, -1 / 3, 1 / 3])
    loss, g = nn.mae_loss(np.ones(4), np.ones(4))
    assert loss == 0.0 and not g.any()


def test_adam_zero_gradient():
    p = [np.array([1.0, -2.0])]
    st = nn.adam_init(p)
    nn.adam_step(st, p, [np.zeros(2)])
    np.testing.assert_array_equal(p[0], [1.0, -2.0])
    assert st.step == 1


def test_adam_first_step_closed_form():
    g = np.array([0.3, -2.0, 1e-9])
    p = [np.zeros(3)]
    st = nn.adam_init(p, lr=0.01)
    nn.adam_step(st, p, [g])
    # bias correction makes m_hat = g and v_hat = g^2 on the first step
    np.testing.assert_allclose(p[0], -0.01 * g / (np.abs(g) + 1e-8), rtol=1e-10)


def test_adam_two_steps_closed_form():
    g1, g2 = np.array([0.5]), np.array([-0.25])
    p = [np.array([1.0])]
    st = nn.adam_init(p, lr=0.1)
    nn.adam_step(st, p, [g1])
    nn.adam_step(st, p, [g2])
    m = 0.9 * 0.1 * g1 + 0.1 * g2
    v = 0.999 * 0.001 * g1**2 + 0.001 * g2**2
    step1 = -0.1 * g1 / (np.abs(g1) + 1e-8)
    step2 = -0.1 * (m / (1 - 0.81)) / (np.sqrt(v / (1 - 0.999**2)) + 1e-8)
    np.testing.assert_allclose(p[0], 1.0 + step1 + step2, rtol=1e-12)


def test_training_is_deterministic():
    def run():
        rng = np.random.default_rng(0)
        net = nn.init_net([3, 8, 1], ["relu", "tanh"], dropout=0.3, rng=7)
        st = nn.adam_init(net.params())
        x, y = rng.normal(size=(16, 3)), rng.uniform(-1, 1, (16, 1))
        for _ in range(5):
            out, cache = nn.forward(net, x, True, rng)
            grads, _ = nn.backward(net, cache, nn.mae_loss(out, y)[1], input_grad=False)
            nn.adam_step(st, net.params(), grads)
        return net.params()

    for a, b in zip(run(), run()):
        assert a.tobytes() == b.tobytes()


def test_toy_regression_loss_decreases():
    rng = np.random.default_rng(1)
    x = rng.normal(size=(64, 4))
    y = np.tanh(x @ np.array([[0.5], [-0.3], [0.2], [0.1]]))
    net = nn.init_net([4, 16, 1], ["relu", "tanh"], rng=2)
    st = nn.adam_init(net.params(), lr=1e-2)
    first = None
    for _ in range(200):
        out, cache = nn.forward(net, x)
        loss, g = nn.mae_loss(out, y)
        first = loss if first is None else first
        grads, _ = nn.backward(net, cache, g, input_grad=False)
        nn.adam_step(st, net.params(), grads)
    assert nn.mae_loss(nn.forward(net, x)[0], y)[0] < 0.3 * first


def test_init_determinism_and_bias():
    a = nn.init_net([10, 20, 1], ["relu", "tanh"], dropout=0.5, rng=4)
    b = nn.init_net([10, 20, 1], ["relu", "tanh"], dropout=0.5, rng=4)
    assert all(x.tobytes() == y.tobytes() for x, y in zip(a.params(), b.params()))
    assert all(not l.bias.any() for l in a.layers)
    assert [l.dropout for l in a.layers] == [0.5, 0.0]


def test_init_variance():
    net = nn.init_net([100, 200, 1], ["relu", "tanh"], rng=0)
    w = net.layers[0].weight
    assert w.size >= 10_000
    assert abs(w.var() / (2 / 100) - 1) < 0.2
    w_out = net.layers[1].weight
    assert np.abs(w_out).max() <= np.sqrt(6 / 201)


def test_serialisation_round_trip():
    net = nn.init_net([3, 4, 1], ["relu", "tanh"], dropout=0.25, rng=0)
    again = nn.net_from_dict(nn.net_to_dict(net))
    assert all(x.tobytes() == y.tobytes() for x, y in zip(net.params(), again.params()))
    assert [l.dropout for l in again.layers] == [0.25, 0.0]


@pytest.mark.parametrize("sizes", [[263, 8, 1], [100, 16, 1], [2, 4, 1]])
def test_reduced_width_gradients(sizes):
    rng = np.random.default_rng(len(sizes) + sizes[0])
    net = nn.init_net(sizes, ["relu", "tanh"], rng=3)
    x = rng.normal(size=(5, sizes[0]))
    check_net(net, x, rng.uniform(-1, 1, (5, 1)), coords=200)
