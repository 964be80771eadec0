import math

import numpy as np
import pytest
from scipy.stats import chi2_contingency

from coreprune.activations import Activation
from coreprune.baselines import percentile_coreset, uniform_coreset
from coreprune.coreset import QueryBall, WeightedSet, coreset_layer
from coreprune.errors import InvalidParameter

RELU = Activation("relu")


def test_uniform_reweighting_is_n_over_m():
    rng = np.random.default_rng(0)
    ws = WeightedSet(rng.normal(size=(4, 3)), rng.normal(size=(2, 4)))
    for seed in range(30):
        cs = uniform_coreset(ws, 4, seed)
        full = cs.full_weights(4)
        expected = cs.counts * ws.weights[:, cs.indices] * 4 / 4
        np.testing.assert_allclose(cs.weights, expected, rtol=1e-15)
        if cs.size == 4:  # each point drawn once: weights unchanged
            np.testing.assert_allclose(full, ws.weights, rtol=1e-15)


def test_uniform_single_draw_doubles_weight():
    ws = WeightedSet(np.eye(2), [[1.5, -2.0]])
    for seed in range(10):
        cs = uniform_coreset(ws, 1, seed)
        j = cs.indices[0]
        assert cs.weights[0, 0] == pytest.approx(2 * ws.weights[0, j])


def test_uniform_unbiased():
    rng = np.random.default_rng(1)
    ws = WeightedSet(rng.normal(size=(40, 3)) / 2, rng.normal(size=40))
    X = rng.normal(size=(4, 3))
    X /= np.linalg.norm(X, axis=1, keepdims=True)
    exact = ws.evaluate(RELU, X)
    est = np.stack([uniform_coreset(ws, 30, s).evaluate(ws, RELU, X) for s in range(500)])
    se = est.std(axis=0, ddof=1) / math.sqrt(500)
    assert np.all(np.abs(est.mean(axis=0) - exact) <= 3 * se)


def test_percentile_examples():
    P = [[3.0, 0.0], [1.0, 0.0], [0.0, 2.0]]
    ws = WeightedSet(P, [[0.5, -1.0, 2.0]])
    cs = percentile_coreset(ws, 2)
    assert list(cs.indices) == [0, 2]
    np.testing.assert_array_equal(cs.weights, [[0.5, 2.0]])

    full = percentile_coreset(ws, 3)
    np.testing.assert_array_equal(full.full_weights(3), ws.weights)
    X = np.random.default_rng(2).normal(size=(10, 2))
    np.testing.assert_array_equal(full.evaluate(ws, RELU, X), ws.evaluate(RELU, X))

    tie = WeightedSet(np.eye(3), [1.0, 2.0, 3.0])
    assert list(percentile_coreset(tie, 1).indices) == [0]
    assert list(percentile_coreset(tie, 2).indices) == [0, 1]


def test_percentile_idempotent_and_bounds():
    rng = np.random.default_rng(3)
    ws = WeightedSet(rng.normal(size=(20, 4)), rng.normal(size=(3, 20)))
    a, b = percentile_coreset(ws, 7), percentile_coreset(ws, 7)
    np.testing.assert_array_equal(a.indices, b.indices)
    np.testing.assert_array_equal(a.weights, b.weights)
    with pytest.raises(InvalidParameter):
        percentile_coreset(ws, 21)
    with pytest.raises(InvalidParameter):
        percentile_coreset(ws, 0)


def test_uniform_matches_coreset_with_equal_sensitivities():
    n = 10
    ws = WeightedSet(np.eye(n), np.ones(n))
    a = coreset_layer(ws, 10_000, RELU, QueryBall(1.0), seed=5)
    b = uniform_coreset(ws, 10_000, seed=6)
    assert np.allclose(a.plan.probabilities, b.plan.probabilities)
    ca = np.bincount(a.draws, minlength=n)
    cb = np.bincount(b.draws, minlength=n)
    assert chi2_contingency(np.stack([ca, cb])).pvalue > 0.01
