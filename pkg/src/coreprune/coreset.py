"""Sensitivity-sampling coresets for weighted sums of activations.

A :class:`WeightedSet` holds n points (neuron weight vectors) and k weight
functions over them (outgoing weights to k consumers). For any query x with
``||x|| <= beta`` the quantity being approximated is, per consumer i::

    z_i(x) = sum_j w_i(p_j) * phi(p_j . x + b_j)

The coreset keeps a sampled subset of the points, shared by all k consumers,
with new weights u_i so that the same sum over the subset is an unbiased
estimate of z_i(x) with additive error control.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import kernels
from .activations import Activation, sup_abs_on_intervals
from .errors import InvalidParameter, ZeroSensitivity
from .rng import stream

_NORM_SLACK = 1e-12


@dataclass
class WeightedSet:
    """Points with one or more (signed) weight functions.

    ``weights[i, j]`` is w_i(p_j). ``offsets`` are per-point biases added to
    p_j . x before the activation; they default to zero.
    """

    points: np.ndarray
    weights: np.ndarray
    offsets: Optional[np.ndarray] = None
    alpha: Optional[float] = None

    def __post_init__(self):
        self.points = np.array(self.points, dtype=np.float64, ndmin=2)
        w = np.array(self.weights, dtype=np.float64)
        if w.ndim == 1:
            w = w[None, :]
        self.weights = w
        n, d = self.points.shape
        if n < 1 or d < 1:
            raise InvalidParameter("a weighted set needs at least one point of dimension >= 1")
        if w.ndim != 2 or w.shape[1] != n or w.shape[0] < 1:
            raise InvalidParameter(f"weights must have shape (k, {n}), got {w.shape}")
        if not np.all(np.isfinite(self.points)) or not np.all(np.isfinite(w)):
            raise InvalidParameter("points and weights must be finite")
        if self.offsets is None:
            self.offsets = np.zeros(n)
        else:
            self.offsets = np.asarray(self.offsets, dtype=np.float64).reshape(-1)
            if self.offsets.shape != (n,) or not np.all(np.isfinite(self.offsets)):
                raise InvalidParameter(f"offsets must be {n} finite values")
        norms = self.norms
        if self.alpha is None:
            self.alpha = float(norms.max())
        elif norms.max() > self.alpha * (1 + _NORM_SLACK) + _NORM_SLACK:
            raise InvalidParameter(
                f"point norm {norms.max():.6g} exceeds declared bound alpha={self.alpha:.6g}"
            )

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def d(self) -> int:
        return self.points.shape[1]

    @property
    def k(self) -> int:
        return self.weights.shape[0]

    @property
    def norms(self) -> np.ndarray:
        return np.linalg.norm(self.points, axis=1)

    def activations(self, phi: Activation, queries) -> np.ndarray:
        """phi(p_j . x + b_j) for each query row x; shape (q, n)."""
        X = np.atleast_2d(np.asarray(queries, dtype=np.float64))
        return phi(X @ self.points.T + self.offsets)

    def evaluate(self, phi: Activation, queries) -> np.ndarray:
        """Exact sums z_i(x); shape (q, k)."""
        return self.activations(phi, queries) @ self.weights.T


@dataclass(frozen=True)
class QueryBall:
    beta: float
    d: Optional[int] = None

    def __post_init__(self):
        if not (math.isfinite(self.beta) and self.beta > 0):
            raise InvalidParameter(f"beta must be finite and > 0, got {self.beta}")


@dataclass
class SamplingPlan:
    probabilities: np.ndarray
    sensitivities: np.ndarray
    total: float
    exact: bool = False  # all contributions vanish on the ball

    @property
    def cdf(self) -> np.ndarray:
        return np.cumsum(self.probabilities)

    @property
    def last_positive(self) -> int:
        return int(np.flatnonzero(self.probabilities > 0)[-1])


@dataclass
class Coreset:
    """Deduplicated sample: ``indices`` (ascending), multiplicities and new weights.

    ``weights`` has shape (k, len(indices)); column c belongs to ``indices[c]``.
    """

    indices: np.ndarray
    counts: np.ndarray
    weights: np.ndarray
    m: int
    seed: Optional[int] = None
    plan: Optional[SamplingPlan] = None
    method: str = "coreset"
    draws: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def size(self) -> int:
        return len(self.indices)

    @property
    def k(self) -> int:
        return self.weights.shape[0]

    @property
    def u(self) -> np.ndarray:
        """Weights of a single-function coreset."""
        if self.k != 1:
            raise InvalidParameter("u is only defined for k == 1; use .weights")
        return self.weights[0]

    def full_weights(self, n: int) -> np.ndarray:
        out = np.zeros((self.k, n))
        out[:, self.indices] = self.weights
        return out

    def evaluate(self, ws: WeightedSet, phi: Activation, queries) -> np.ndarray:
        """Coreset sums over the support; shape (q, k)."""
        X = np.atleast_2d(np.asarray(queries, dtype=np.float64))
        pts = ws.points[self.indices]
        acts = phi(X @ pts.T + ws.offsets[self.indices])
        return acts @ self.weights.T


def sampling_plan(ws: WeightedSet, phi: Activation, ball: QueryBall) -> SamplingPlan:
    """Sensitivities s(p) = max_i |w_i(p)| * sup |phi| over the reachable pre-activations."""
    reach = ball.beta * ws.norms
    sup_phi = sup_abs_on_intervals(phi, ws.offsets - reach, ws.offsets + reach)
    wmax = np.max(np.abs(ws.weights), axis=0)
    s = wmax * sup_phi
    t = float(np.sum(s))
    if not math.isfinite(t):
        raise ZeroSensitivity(f"total sensitivity is not finite ({t})")
    if t == 0.0:
        if np.any((wmax > 0) & (sup_phi > 0)):
            raise ZeroSensitivity(
                "total sensitivity underflowed to 0 although some contributions are non-zero"
            )
        n = ws.n
        return SamplingPlan(np.full(n, 1.0 / n), s, 0.0, exact=True)
    pr = s / t
    pr = pr / pr.sum()
    return SamplingPlan(pr, s, t)


def merge_duplicates(draws, ws: WeightedSet, plan: SamplingPlan, m: int, impl=None):
    """Collapse a multiset of draws into ``(indices, counts, weights)``."""
    draws = np.asarray(draws, dtype=np.int64)
    if m < 1 or len(draws) != m:
        raise InvalidParameter(f"expected m={m} >= 1 draws, got {len(draws)}")
    if draws.min() < 0 or draws.max() >= ws.n:
        raise InvalidParameter("draw index out of range")
    counts, u = kernels.accumulate(draws, ws.n, ws.weights, plan.probabilities, m, impl=impl)
    idx = np.flatnonzero(counts)
    return idx, counts[idx], u[:, idx]


def sample_with_plan(ws, plan, m, gen, impl=None):
    """m i.i.d. draws from ``plan``; returns the raw draw sequence."""
    uniforms = gen.random(m)
    return kernels.draw_indices(plan.cdf, uniforms, plan.last_positive, impl=impl)


def _build(ws, plan, m, gen, seed, method, impl=None) -> Coreset:
    if int(m) != m or m < 1:
        raise InvalidParameter(f"sample size m must be a positive integer, got {m}")
    m = int(m)
    draws = sample_with_plan(ws, plan, m, gen, impl=impl)
    idx, counts, u = merge_duplicates(draws, ws, plan, m, impl=impl)
    return Coreset(idx, counts, u, m, seed, plan, method, draws)


def coreset_layer(ws: WeightedSet, m: int, phi: Activation, ball: QueryBall,
                  seed: int, key: tuple = (), impl=None) -> Coreset:
    """One shared support for all k weight functions, each with its own weights."""
    plan = sampling_plan(ws, phi, ball)
    return _build(ws, plan, m, stream(seed, *key), seed, "coreset", impl=impl)


def coreset_single(ws: WeightedSet, m: int, phi: Activation, ball: QueryBall,
                   seed: int, key: tuple = ()) -> Coreset:
    if ws.k != 1:
        raise InvalidParameter(f"coreset_single needs exactly one weight function, got k={ws.k}")
    return coreset_layer(ws, m, phi, ball, seed, key)


def _bound_factor(t, d, delta):
    return d * max(math.log(t), 0.0) + math.log(1.0 / delta)


def _check_eps_delta(eps, delta):
    if not (0 < eps < 1):
        raise InvalidParameter(f"eps must lie in (0, 1), got {eps}")
    if not (0 < delta < 1):
        raise InvalidParameter(f"delta must lie in (0, 1), got {delta}")


def required_sample_size(t: float, d: int, eps: float, delta: float, c: float = 1.0) -> int:
    """ceil(c t / eps^2 * (d max(ln t, 0) + ln(1/delta)))."""
    _check_eps_delta(eps, delta)
    if t < 0 or not math.isfinite(t):
        raise InvalidParameter(f"total sensitivity must be finite and >= 0, got {t}")
    if d < 1:
        raise InvalidParameter(f"d must be >= 1, got {d}")
    if c <= 0:
        raise InvalidParameter(f"c must be > 0, got {c}")
    if t == 0:
        return 0
    return math.ceil(c * t / eps**2 * _bound_factor(t, d, delta))


def certified_epsilon(t: float, d: int, m: int, delta: float, c: float = 1.0) -> float:
    """Additive error guaranteed at sample size m (the sample-size bound solved for eps)."""
    if not (0 < delta < 1):
        raise InvalidParameter(f"delta must lie in (0, 1), got {delta}")
    if m < 1:
        raise InvalidParameter("m must be >= 1")
    if t <= 0:
        return 0.0
    return math.sqrt(c * t * _bound_factor(t, d, delta) / m)
