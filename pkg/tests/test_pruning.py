import math

import numpy as np
import pytest

from conftest import random_conv_net, random_dense_net
from coreprune.activations import Activation
from coreprune.coreset import QueryBall, sampling_plan
from coreprune.errors import (BudgetExceedsWidth, LayerError, LayerTypeMismatch, Unsupported)
from coreprune.harness import network_l1_error, uniform_ball
from coreprune.network import ConvLayer, DenseLayer, Flatten, Network, forward, forward_linear_part
from coreprune.pruning import (PruneSpec, conv_layer_to_weighted_set, dense_layer_to_weighted_set,
                               propagate_beta, prunable_layers, prune_conv, prune_dense,
                               prune_network)

RELU = Activation("relu")


def layer_input(net, i, X):
    return X if i == 0 else forward_linear_part_full(net, i - 1, X)


def forward_linear_part_full(net, i, X):
    z = forward_linear_part(net, i, X)
    return net.layers[i].activation(z)


def channel_sum_oracle(net, l, cs, x):
    """Brute-force channel estimator: for each output channel i and location (r, c),
    sum over kernel offsets j and support kernels q of u^i_j(q) * phi(q . patch + b_q)."""
    a, b = net.layers[l], net.layers[l + 1]
    C, kh, kw = a.kernels.shape[1:]
    q_out, _, kh2, kw2 = b.kernels.shape
    H, W = x.shape[1:]
    H1, W1 = H - kh + 1, W - kw + 1
    H2, W2 = H1 - kh2 + 1, W1 - kw2 + 1
    out = np.zeros((q_out, H2, W2))
    for i in range(q_out):
        for r in range(H2):
            for c in range(W2):
                total = 0.0
                for dr in range(kh2):
                    for dc in range(kw2):
                        j = (i * kh2 + dr) * kw2 + dc
                        patch = x[:, r + dr:r + dr + kh, c + dc:c + dc + kw].reshape(-1)
                        for col, k in enumerate(cs.indices):
                            p = a.kernels[k].reshape(-1)
                            total += cs.weights[j, col] * a.activation(p @ patch + a.bias[k])
                out[i, r, c] = total + b.bias[i]
    return out


# --- weighted sets -------------------------------------------------------


def test_dense_weighted_set_shapes():
    net = random_dense_net(np.random.default_rng(0), [2, 3, 2])
    ws = dense_layer_to_weighted_set(net, 0)
    assert (ws.n, ws.d, ws.k) == (3, 2, 2)
    np.testing.assert_array_equal(ws.points, net.layers[0].weights)
    np.testing.assert_array_equal(ws.weights, net.layers[1].weights)
    assert ws.alpha == pytest.approx(np.linalg.norm(net.layers[0].weights, axis=1).max())


def test_zero_row_contributes_nothing():
    rng = np.random.default_rng(1)
    W1 = rng.normal(size=(3, 5))
    W1[1] = 0.0
    net = Network([DenseLayer(rng.normal(size=(5, 4)), np.zeros(5), RELU),
                   DenseLayer(W1, np.zeros(3), RELU)], (4,))
    ws = dense_layer_to_weighted_set(net, 0)
    plan = sampling_plan(ws, RELU, QueryBall(1.0))
    without = np.max(np.abs(W1[[0, 2]]), axis=0) * ws.norms
    np.testing.assert_allclose(plan.sensitivities, without)


def test_toy_layer_shares_support():
    rng = np.random.default_rng(2)
    net = random_dense_net(rng, [3, 7, 2])
    for seed in range(10):
        pruned, rep, cs = prune_dense(net, 0, PruneSpec([4], seed=seed), return_coreset=True)
        W = pruned.layers[1].weights
        assert W.shape == (2, cs.size) and cs.size <= 4
        # every next-layer neuron reads the same surviving neurons
        assert pruned.layers[0].weights.shape[0] == W.shape[1]


def test_conv_weighted_set_counts():
    rng = np.random.default_rng(3)
    net = Network([ConvLayer(rng.normal(size=(4, 2, 3, 3)), np.zeros(4), RELU),
                   ConvLayer(rng.normal(size=(2, 4, 3, 3)), np.zeros(2), RELU)], (2, 9, 9))
    ws = conv_layer_to_weighted_set(net, 0)
    assert (ws.n, ws.d, ws.k) == (4, 18, 18)

    net1 = Network([ConvLayer(rng.normal(size=(4, 2, 3, 3)), np.zeros(4), RELU),
                    ConvLayer(rng.normal(size=(5, 4, 1, 1)), np.zeros(5), RELU)], (2, 9, 9))
    ws1 = conv_layer_to_weighted_set(net1, 0)
    assert ws1.k == 5
    np.testing.assert_array_equal(ws1.weights, net1.layers[1].kernels[:, :, 0, 0])


def test_conv_weighted_set_1d_indexing():
    rng = np.random.default_rng(4)
    K2 = rng.normal(size=(2, 3, 1, 4))
    net = Network([ConvLayer(rng.normal(size=(3, 1, 1, 2)), np.zeros(3), RELU),
                   ConvLayer(K2, np.zeros(2), RELU)], (1, 1, 10))
    ws = conv_layer_to_weighted_set(net, 0)
    for i in range(2):
        for j in range(4):
            for k in range(3):
                assert ws.weights[i * 4 + j, k] == K2[i, k, 0, j]


def test_layer_type_checks():
    rng = np.random.default_rng(5)
    net = random_conv_net(rng, [2, 3], 6, dense_out=4)
    with pytest.raises(LayerTypeMismatch):
        dense_layer_to_weighted_set(net, 0)
    with pytest.raises(LayerTypeMismatch):
        conv_layer_to_weighted_set(net, 1)
    strided = Network([ConvLayer(rng.normal(size=(3, 1, 2, 2)), np.zeros(3), RELU, (2, 2)),
                       ConvLayer(rng.normal(size=(2, 3, 2, 2)), np.zeros(2), RELU)], (1, 8, 8))
    with pytest.raises(Unsupported):
        conv_layer_to_weighted_set(strided, 0)


# --- dense pruning -------------------------------------------------------


def test_identity_pruning_dense():
    rng = np.random.default_rng(6)
    net = random_dense_net(rng, [5, 8, 6, 3])
    pruned, rep = prune_network(net, PruneSpec([8, 6], method="percentile"))
    X = rng.normal(size=(50, 5))
    assert np.array_equal(forward(net, X), forward(pruned, X))
    assert [r.new_width for r in rep.layers] == [8, 6]


def test_single_dominant_neuron_is_exact():
    rng = np.random.default_rng(7)
    W1 = np.zeros((3, 6))
    W1[:, 2] = rng.normal(size=3)
    net = Network([DenseLayer(rng.normal(size=(6, 4)), rng.normal(size=6), RELU),
                   DenseLayer(W1, rng.normal(size=3), RELU)], (4,))
    X = rng.normal(size=(100, 4))
    for m in (1, 3, 6):
        pruned, rep = prune_dense(net, 0, PruneSpec([m], seed=m))
        assert rep.new_width == 1
        assert np.array_equal(forward(pruned, X), forward(net, X))


def test_estimator_consistency_dense():
    rng = np.random.default_rng(8)
    net = random_dense_net(rng, [6, 20, 7, 3], bias_scale=0.3)
    X = uniform_ball(1.0, 6, 30, 0)
    for i in (0, 1):
        pruned, _, cs = prune_dense(net, i, PruneSpec([9, 5], seed=i), return_coreset=True)
        ws = dense_layer_to_weighted_set(net, i)
        H = layer_input(net, i, X)
        ref = cs.evaluate(ws, net.layers[i].activation, H) + net.layers[i + 1].bias
        np.testing.assert_allclose(forward_linear_part(pruned, i + 1, X), ref, atol=1e-10, rtol=0)


def test_budget_exceeding_width():
    net = random_dense_net(np.random.default_rng(9), [3, 4, 2])
    with pytest.raises(BudgetExceedsWidth):
        prune_dense(net, 0, PruneSpec([5]))
    with pytest.raises(LayerError) as info:
        prune_network(net, PruneSpec([5]))
    assert info.value.layer_index == 0 and isinstance(info.value.cause, BudgetExceedsWidth)


def test_coreset_beats_uniform_on_dense_layer():
    net = random_dense_net(np.random.default_rng(10), [10, 50, 5], spread=1.0, bias_scale=0.0)
    X = uniform_ball(1.0, 10, 100, 1)
    ref = forward_linear_part(net, 1, X)
    err = {}
    for method in ("coreset", "uniform"):
        errs = []
        for seed in range(20):
            pruned, _ = prune_dense(net, 0, PruneSpec([30], method=method, seed=seed))
            errs.append(np.abs(forward_linear_part(pruned, 1, X) - ref).mean())
        err[method] = np.mean(errs)
    assert err["coreset"] < err["uniform"]


# --- conv pruning --------------------------------------------------------


def test_identity_pruning_conv():
    rng = np.random.default_rng(11)
    net = random_conv_net(rng, [2, 5, 3], 7)
    pruned, _ = prune_conv(net, 0, PruneSpec([5], method="percentile"))
    X = rng.normal(size=(4, 2, 7, 7))
    assert np.array_equal(forward(net, X), forward(pruned, X))


def test_single_filter_conv_is_exact():
    rng = np.random.default_rng(12)
    net = random_conv_net(rng, [2, 1, 3], 6)
    pruned, rep = prune_conv(net, 0, PruneSpec([1], seed=3))
    X = rng.normal(size=(3, 2, 6, 6))
    assert np.array_equal(forward(pruned, X), forward(net, X))


def test_conv_rebuild_matches_channel_sum_oracle():
    rng = np.random.default_rng(13)
    net = random_conv_net(rng, [2, 5, 3], 6, bias_scale=0.5)
    pruned, _, cs = prune_conv(net, 0, PruneSpec([3], seed=1), return_coreset=True)
    x = rng.normal(size=(2, 6, 6))
    np.testing.assert_allclose(forward_linear_part(pruned, 1, x), channel_sum_oracle(net, 0, cs, x),
                               atol=1e-10, rtol=0)


def test_coreset_beats_uniform_on_conv_layer():
    net = random_conv_net(np.random.default_rng(14), [4, 8, 4], 8, spread=1.0, bias_scale=0.0)
    X = uniform_ball(1.0, 4 * 8 * 8, 50, 2).reshape(50, 4, 8, 8)
    ref = forward_linear_part(net, 1, X)
    err = {}
    for method in ("coreset", "uniform"):
        errs = []
        for seed in range(20):
            pruned, _ = prune_conv(net, 0, PruneSpec([5], method=method, seed=seed))
            errs.append(np.abs(forward_linear_part(pruned, 1, X) - ref).mean())
        err[method] = np.mean(errs)
    assert err["coreset"] <= err["uniform"]


# --- whole network -------------------------------------------------------


def test_prunable_layers_skip_flatten_boundary():
    net = random_conv_net(np.random.default_rng(15), [2, 4, 3], 8, dense_out=5)
    assert prunable_layers(net) == [0]
    net2 = Network(net.layers + [DenseLayer(np.ones((2, 5)), np.zeros(2), RELU)], net.input_shape)
    assert prunable_layers(net2) == [0, 3]
    pruned, rep = prune_network(net2, PruneSpec([2, 3], seed=1))
    assert [r.layer for r in rep.layers] == [0, 3]
    forward(pruned, np.zeros(net2.input_shape))


def test_full_budgets_identity_network():
    rng = np.random.default_rng(16)
    net = random_dense_net(rng, [4, 6, 5, 2])
    pruned, _ = prune_network(net, PruneSpec([6, 5], method="percentile"))
    X = rng.normal(size=(20, 4))
    assert network_l1_error(net, pruned, X) == 0.0


def test_lenet_shaped_report_and_error():
    net = random_dense_net(np.random.default_rng(17), [784, 300, 100, 10], spread=1.0,
                           bias_scale=0.0)
    pruned, rep = prune_network(net, PruneSpec([30, 10], seed=0, exact_width=True))
    assert len(rep.layers) == 2
    assert [r.new_width for r in rep.layers] == [30, 10]
    assert [l.width for l in pruned.layers] == [30, 10, 10]
    X = uniform_ball(1.0, 784, 100, 3)
    err = {}
    for method in ("coreset", "uniform"):
        err[method] = np.mean([
            network_l1_error(net, prune_network(net, PruneSpec([30, 10], method=method, seed=s))[0], X)
            for s in range(20)
        ])
    assert err["coreset"] < err["uniform"]


def test_exact_width_records_attempts():
    net = random_dense_net(np.random.default_rng(18), [5, 40, 3])
    _, rep = prune_dense(net, 0, PruneSpec([10], seed=0, exact_width=True))
    assert rep.new_width == 10 and 1 <= rep.attempts <= 64
    # near-full budgets cannot be reached by i.i.d. draws: smaller support is accepted
    _, rep = prune_dense(net, 0, PruneSpec([39], seed=0, exact_width=True))
    assert rep.attempts == 64 and rep.new_width < 39


def test_certified_eps_decreases_with_budget():
    net = random_dense_net(np.random.default_rng(19), [6, 30, 4])
    eps = [prune_dense(net, 0, PruneSpec([m], seed=0))[1].certified_eps for m in range(1, 31)]
    assert all(b < a for a, b in zip(eps, eps[1:]))
    _, rep = prune_dense(net, 0, PruneSpec([5], method="percentile"))
    assert rep.certified_eps is None


# --- beta propagation ----------------------------------------------------


def test_propagate_beta_examples():
    W = np.array([[1.0, 0.0], [0.0, 1.0], [0.6, 0.8], [-1.0, 0.0]])
    net = Network([DenseLayer(W, np.zeros(4), RELU)], (2,))
    assert propagate_beta(net, 1.0, include_output=True) == pytest.approx([1.0, 2.0])
    g = Network([DenseLayer([[1.0]], [0.0], Activation("gauss"))], (1,))
    assert propagate_beta(g, 1.0, include_output=True)[1] == pytest.approx(math.e)
    rng = np.random.default_rng(20)
    s = random_dense_net(rng, [5, 9, 3], activation=Activation("sigmoid"), bias_scale=3.0)
    out = propagate_beta(s, 7.0, include_output=True)
    assert out[1] <= math.sqrt(9) and out[2] <= math.sqrt(3)


def test_propagated_beta_bounds_actual_norms():
    rng = np.random.default_rng(21)
    net = random_conv_net(rng, [2, 3, 4], 7, dense_out=5, bias_scale=0.5)
    betas = propagate_beta(net, 1.5, include_output=True)
    X = uniform_ball(1.5, 2 * 7 * 7, 200, 4).reshape(200, 2, 7, 7)
    h = X
    k = 0
    for i, layer in enumerate(net.layers):
        if not isinstance(layer, Flatten):
            assert np.all(np.linalg.norm(h.reshape(len(h), -1), axis=1) <= betas[k] * (1 + 1e-12))
            k += 1
        h = layer.linear(h)
        if layer.activation is not None:
            h = layer.activation(h)
    assert np.all(np.linalg.norm(h.reshape(len(h), -1), axis=1) <= betas[-1] * (1 + 1e-12))


def test_beta_sources():
    net = random_dense_net(np.random.default_rng(22), [4, 6, 3])
    _, rep = prune_dense(net, 0, PruneSpec([3], input_beta=2.5))
    assert rep.beta == 2.5
    net.beta = [0.7, 3.0]
    _, rep = prune_dense(net, 0, PruneSpec([3]))
    assert rep.beta == 0.7
    _, rep = prune_dense(net, 0, PruneSpec([3], beta=[0.2, 0.3]))
    assert rep.beta == 0.2
