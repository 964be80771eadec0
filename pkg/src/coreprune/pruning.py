"""Layer-wise structured pruning: dense neurons and conv channels.

Each prunable pair (i, i+1) of adjacent dense/dense or conv/conv layers is
turned into a :class:`WeightedSet` whose points are the units of layer i and
whose weight functions are the consumers in layer i+1. A shared coreset is
drawn, layer i keeps the selected units and layer i+1 gets the new weights.

Conv indexing: the weight function for next-layer channel ``i`` at kernel
offset ``(r, c)`` is number ``(i * kh + r) * kw + c``, i.e. the row-major
flattening of (out_channel, row, col).
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional, Sequence, Union

import numpy as np

from .activations import sup_abs_on_intervals
from .baselines import percentile_coreset, uniform_coreset
from .coreset import (Coreset, QueryBall, WeightedSet, certified_epsilon, coreset_layer,
                      required_sample_size, sampling_plan)
from .errors import (BudgetExceedsWidth, CorePruneError, InvalidParameter, LayerError,
                     LayerTypeMismatch, Unsupported)
from .network import ConvLayer, DenseLayer, Flatten, Network

METHODS = ("coreset", "uniform", "percentile")
MAX_ATTEMPTS = 64


@dataclass
class PruneSpec:
    """What to prune and how.

    ``budgets`` is either a list aligned with :func:`prunable_layers` or a
    mapping from layer index to budget. ``beta`` (one input radius per
    dense/conv layer) overrides the model file; otherwise radii are
    propagated from ``input_beta``.
    """

    budgets: Union[Sequence[int], Dict[int, int]]
    method: str = "coreset"
    seed: int = 0
    beta: Optional[Sequence[float]] = None
    input_beta: float = 1.0
    delta: float = 0.1
    c: float = 1.0
    eps: Optional[float] = None
    exact_width: bool = False

    def __post_init__(self):
        if self.method not in METHODS:
            raise InvalidParameter(f"method must be one of {METHODS}, got {self.method!r}")
        if not (0 < self.delta < 1):
            raise InvalidParameter(f"delta must lie in (0, 1), got {self.delta}")
        if self.c <= 0:
            raise InvalidParameter("c must be > 0")
        if not (math.isfinite(self.input_beta) and self.input_beta > 0):
            raise InvalidParameter("input_beta must be finite and > 0")

    def budget_for(self, net: Network, i: int) -> int:
        if isinstance(self.budgets, dict):
            if i not in self.budgets:
                raise InvalidParameter(f"no budget given for layer {i}")
            return int(self.budgets[i])
        pairs = prunable_layers(net)
        if len(self.budgets) != len(pairs):
            raise InvalidParameter(
                f"{len(self.budgets)} budgets given for {len(pairs)} prunable layers {pairs}"
            )
        return int(self.budgets[pairs.index(i)])


@dataclass
class LayerReport:
    layer: int
    kind: str
    method: str
    original_width: int
    new_width: int
    budget: int
    support_size: int
    total_sensitivity: float
    dimension: int
    beta: float
    certified_eps: Optional[float]
    required_m: Optional[int]
    seed: int
    attempts: int


@dataclass
class PruneReport:
    method: str
    seed: int
    layers: List[LayerReport] = field(default_factory=list)

    def to_json(self) -> dict:
        return {"method": self.method, "seed": self.seed, "layers": [asdict(l) for l in self.layers]}


def prunable_layers(net: Network) -> List[int]:
    """Indices i where layers i and i+1 are both dense or both conv."""
    out = []
    for i in range(len(net.layers) - 1):
        a, b = net.layers[i], net.layers[i + 1]
        if (isinstance(a, DenseLayer) and isinstance(b, DenseLayer)) or (
            isinstance(a, ConvLayer) and isinstance(b, ConvLayer)
        ):
            out.append(i)
    return out


def _next_radius(layer, radius, out_shape):
    if isinstance(layer, Flatten):
        return radius
    pts = layer.weights if isinstance(layer, DenseLayer) else layer.kernels.reshape(layer.width, -1)
    reach = np.linalg.norm(pts, axis=1).max() * radius + np.abs(layer.bias).max()
    sup = float(sup_abs_on_intervals(layer.activation, -reach, reach))
    return math.sqrt(int(np.prod(out_shape))) * sup


def propagate_beta(net: Network, beta_input: float, include_output: bool = False) -> List[float]:
    """Input radius for every dense/conv layer, computed from the weights alone.

    A layer with n outputs, point-norm bound alpha and input radius beta has
    outputs bounded by sup|phi| on [-alpha*beta, alpha*beta] (widened by the
    largest bias), so the next radius is sqrt(n) times that bound.
    """
    if not (math.isfinite(beta_input) and beta_input > 0):
        raise InvalidParameter("beta_input must be finite and > 0")
    radius = float(beta_input)
    out = []
    for i, layer in enumerate(net.layers):
        if not isinstance(layer, Flatten):
            out.append(radius)
        radius = _next_radius(layer, radius, net.shapes[i + 1])
    if include_output:
        out.append(radius)
    return out


def _require(net, i, cls):
    if not (0 <= i < len(net.layers) - 1):
        raise LayerTypeMismatch(f"layer {i} has no successor")
    a, b = net.layers[i], net.layers[i + 1]
    if not (isinstance(a, cls) and isinstance(b, cls)):
        raise LayerTypeMismatch(
            f"layers {i} and {i + 1} must both be {cls.__name__}, got "
            f"{type(a).__name__} and {type(b).__name__}"
        )
    return a, b


def dense_layer_to_weighted_set(net: Network, i: int) -> WeightedSet:
    a, b = _require(net, i, DenseLayer)
    return WeightedSet(a.weights, b.weights, offsets=a.bias)


def conv_layer_to_weighted_set(net: Network, l: int) -> WeightedSet:
    a, b = _require(net, l, ConvLayer)
    for layer, idx in ((a, l), (b, l + 1)):
        if layer.stride != (1, 1) or layer.padding != "valid":
            raise Unsupported(f"conv pruning needs stride 1 and valid padding (layer {idx})")
    n = a.width
    points = a.kernels.reshape(n, -1)
    # (q, n, kh, kw) -> (q, kh, kw, n) -> (q*kh*kw, n)
    weights = b.kernels.transpose(0, 2, 3, 1).reshape(-1, n)
    return WeightedSet(points, weights, offsets=a.bias)


def _resolve_beta(net: Network, i: int, spec: PruneSpec) -> float:
    pos = net.weighted_layers().index(i)
    if spec.beta is not None:
        if len(spec.beta) != len(net.weighted_layers()):
            raise InvalidParameter(
                f"beta needs one radius per dense/conv layer ({len(net.weighted_layers())})"
            )
        return float(spec.beta[pos])
    if net.beta is not None:
        return net.beta[pos]
    return propagate_beta(net, spec.input_beta)[pos]


def select(ws: WeightedSet, m: int, method: str, phi, ball: QueryBall, seed: int,
           layer: int = 0, exact_width: bool = False):
    """Run one selector; returns ``(coreset, attempts)``.

    With ``exact_width`` the sampling methods redraw (substream ``attempt``)
    until the support reaches min(m, number of drawable points), keeping
    the largest support seen if that never happens.
    """
    if m < 1 or m > ws.n:
        raise BudgetExceedsWidth(f"budget {m} outside [1, {ws.n}]")
    if method == "percentile":
        return percentile_coreset(ws, m), 1
    best = None
    for attempt in range(MAX_ATTEMPTS):
        key = (layer, attempt)
        if method == "coreset":
            cs = coreset_layer(ws, m, phi, ball, seed, key)
        else:
            cs = uniform_coreset(ws, m, seed, key)
        if best is None or cs.size > best.size:
            best = cs
        target = min(m, int(np.count_nonzero(cs.plan.probabilities > 0)))
        if not exact_width or cs.size >= target:
            return cs, attempt + 1
    return best, MAX_ATTEMPTS


def _report(net, i, kind, ws, cs, spec, beta, budget, attempts, phi):
    t = sampling_plan(ws, phi, QueryBall(beta)).total
    cert = req = None
    if spec.method == "coreset":
        cert = certified_epsilon(t, ws.d, budget, spec.delta, spec.c)
        if spec.eps is not None:
            req = required_sample_size(t, ws.d, spec.eps, spec.delta, spec.c)
    return LayerReport(
        layer=i, kind=kind, method=spec.method, original_width=ws.n, new_width=cs.size,
        budget=budget, support_size=cs.size, total_sensitivity=t, dimension=ws.d,
        beta=beta, certified_eps=cert, required_m=req, seed=spec.seed, attempts=attempts,
    )


def _prune(net, i, spec, budget, to_ws, rebuild, kind):
    ws = to_ws(net, i)
    if budget is None:
        budget = spec.budget_for(net, i)
    if budget < 1 or budget > ws.n:
        raise BudgetExceedsWidth(f"layer {i}: budget {budget} outside [1, {ws.n}]")
    beta = _resolve_beta(net, i, spec)
    phi = net.layers[i].activation
    cs, attempts = select(ws, budget, spec.method, phi, QueryBall(beta), spec.seed, i,
                          spec.exact_width)
    new_net = net.replace_layers(rebuild(net, i, cs))
    return new_net, _report(net, i, kind, ws, cs, spec, beta, budget, attempts, phi), cs


def _rebuild_dense(net, i, cs: Coreset):
    a, b = net.layers[i], net.layers[i + 1]
    idx = cs.indices
    return {
        i: DenseLayer(a.weights[idx], a.bias[idx], a.activation),
        i + 1: DenseLayer(cs.weights, b.bias, b.activation),
    }


def _rebuild_conv(net, l, cs: Coreset):
    a, b = net.layers[l], net.layers[l + 1]
    idx = cs.indices
    q, _, kh, kw = b.kernels.shape
    kernels = cs.weights.reshape(q, kh, kw, cs.size).transpose(0, 3, 1, 2)
    return {
        l: ConvLayer(a.kernels[idx], a.bias[idx], a.activation, a.stride, a.padding),
        l + 1: ConvLayer(kernels, b.bias, b.activation, b.stride, b.padding),
    }


def prune_dense(net: Network, i: int, spec: PruneSpec, budget: Optional[int] = None,
                return_coreset: bool = False):
    """Drop neurons of dense layer i; returns ``(network, report_entry)``."""
    new_net, rep, cs = _prune(net, i, spec, budget, dense_layer_to_weighted_set,
                              _rebuild_dense, "dense")
    return (new_net, rep, cs) if return_coreset else (new_net, rep)


def prune_conv(net: Network, l: int, spec: PruneSpec, budget: Optional[int] = None,
               return_coreset: bool = False):
    """Drop output channels of conv layer l; returns ``(network, report_entry)``."""
    new_net, rep, cs = _prune(net, l, spec, budget, conv_layer_to_weighted_set,
                              _rebuild_conv, "conv2d")
    return (new_net, rep, cs) if return_coreset else (new_net, rep)


def prune_network(net: Network, spec: PruneSpec):
    """Prune every dense/dense and conv/conv pair, input side first."""
    report = PruneReport(spec.method, spec.seed)
    budgets = {i: spec.budget_for(net, i) for i in prunable_layers(net)}
    current = net
    for i, m in budgets.items():
        fn = prune_dense if isinstance(net.layers[i], DenseLayer) else prune_conv
        try:
            current, entry = fn(current, i, spec, budget=m)
        except CorePruneError as exc:
            raise LayerError(i, exc) from exc
        report.layers.append(entry)
    if spec.beta is not None:
        current = current.replace_layers({}, beta=list(spec.beta))
    return current, report
