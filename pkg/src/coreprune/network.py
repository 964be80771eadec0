"""Inference-only networks of dense, conv2d and flatten layers, plus the .nnj format.

Convolution is cross-correlation (no kernel flip). Tensors are row-major;
conv activations are laid out (channels, height, width) and flatten
preserves that order.

.nnj file layout (JSON)::

    {"input_shape": [..],
     "layers": [{"type": "dense", "weights": [[..]], "bias": [..],
                 "activation": {"kind": "relu"}},
                {"type": "conv2d", "weights": [[[[..]]]], "bias": [..],
                 "activation": {"kind": "soft_clip", "alpha": 2.0},
                 "stride": [1, 1], "padding": "valid" | [ph, pw]},
                {"type": "flatten"}],
     "beta": [..]}          # optional, one input radius per dense/conv layer
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import List, Optional, Tuple, Union

import numpy as np

from . import kernels
from .activations import Activation
from .errors import IndexOutOfRange, InvalidParameter, ParseError, ShapeMismatch


@dataclass(frozen=True, eq=False)
class DenseLayer:
    weights: np.ndarray  # (out_units, in_units)
    bias: np.ndarray
    activation: Activation

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        b = np.asarray(self.bias, dtype=np.float64).reshape(-1)
        if w.ndim != 2:
            raise ShapeMismatch(f"dense weights must be 2-D, got shape {w.shape}")
        if b.shape != (w.shape[0],):
            raise ShapeMismatch(f"dense bias must have {w.shape[0]} entries, got {b.shape}")
        if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
            raise InvalidParameter("dense layer has non-finite entries")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "bias", b)

    @property
    def width(self) -> int:
        return self.weights.shape[0]

    def output_shape(self, in_shape):
        if tuple(in_shape) != (self.weights.shape[1],):
            raise ShapeMismatch(f"dense layer expects input ({self.weights.shape[1]},), got {tuple(in_shape)}")
        return (self.width,)

    def linear(self, x):
        # one product per neuron: a blocked x @ W.T rounds differently depending on
        # how many rows W has, which would stop a pruned layer from reproducing the
        # surviving neurons of the original bit for bit
        x = np.asarray(x, dtype=np.float64)
        out = np.empty(x.shape[:-1] + (self.width,))
        for j, w in enumerate(self.weights):
            out[..., j] = x @ w
        return out + self.bias


@dataclass(frozen=True, eq=False)
class ConvLayer:
    kernels: np.ndarray  # (out_channels, in_channels, kh, kw)
    bias: np.ndarray
    activation: Activation
    stride: Tuple[int, int] = (1, 1)
    padding: Union[str, Tuple[int, int]] = "valid"

    def __post_init__(self):
        k = np.asarray(self.kernels, dtype=np.float64)
        b = np.asarray(self.bias, dtype=np.float64).reshape(-1)
        if k.ndim != 4 or k.shape[0] < 1:
            raise ShapeMismatch(f"conv kernels must be 4-D with >= 1 out channel, got {k.shape}")
        if b.shape != (k.shape[0],):
            raise ShapeMismatch(f"conv bias must have {k.shape[0]} entries, got {b.shape}")
        if not (np.all(np.isfinite(k)) and np.all(np.isfinite(b))):
            raise InvalidParameter("conv layer has non-finite entries")
        stride = tuple(int(s) for s in self.stride)
        if len(stride) != 2 or min(stride) < 1:
            raise InvalidParameter(f"stride must be two positive integers, got {self.stride}")
        pad = self.padding
        if pad != "valid":
            pad = tuple(int(p) for p in pad)
            if len(pad) != 2 or min(pad) < 0:
                raise InvalidParameter(f"padding must be 'valid' or two non-negative ints, got {self.padding}")
            if pad == (0, 0):
                pad = "valid"
        object.__setattr__(self, "kernels", k)
        object.__setattr__(self, "bias", b)
        object.__setattr__(self, "stride", stride)
        object.__setattr__(self, "padding", pad)

    @property
    def width(self) -> int:
        return self.kernels.shape[0]

    @property
    def pad(self) -> Tuple[int, int]:
        return (0, 0) if self.padding == "valid" else self.padding

    def output_shape(self, in_shape):
        in_shape = tuple(in_shape)
        if len(in_shape) != 3 or in_shape[0] != self.kernels.shape[1]:
            raise ShapeMismatch(
                f"conv layer expects ({self.kernels.shape[1]}, H, W) input, got {in_shape}"
            )
        _, h, w = in_shape
        ph, pw = self.pad
        kh, kw = self.kernels.shape[2:]
        ho = (h + 2 * ph - kh) // self.stride[0] + 1
        wo = (w + 2 * pw - kw) // self.stride[1] + 1
        if h + 2 * ph < kh or w + 2 * pw < kw:
            raise ShapeMismatch(f"kernel {kh}x{kw} larger than padded input {in_shape}")
        return (self.width, ho, wo)

    def linear(self, x):
        ph, pw = self.pad
        if ph or pw:
            x = np.pad(x, ((0, 0), (0, 0), (ph, ph), (pw, pw)))
        out = np.stack([kernels.correlate2d(xi, self.kernels, self.stride) for xi in x])
        return out + self.bias[None, :, None, None]


@dataclass(frozen=True)
class Flatten:
    activation = None

    def output_shape(self, in_shape):
        return (int(np.prod(in_shape)),)

    def linear(self, x):
        return x.reshape(x.shape[0], -1)


Layer = Union[DenseLayer, ConvLayer, Flatten]


@dataclass(eq=False)
class Network:
    layers: List[Layer]
    input_shape: Tuple[int, ...]
    beta: Optional[List[float]] = None
    shapes: List[Tuple[int, ...]] = field(init=False, repr=False)

    def __post_init__(self):
        self.input_shape = tuple(int(s) for s in self.input_shape)
        shapes = [self.input_shape]
        for i, layer in enumerate(self.layers):
            try:
                shapes.append(layer.output_shape(shapes[-1]))
            except ShapeMismatch as exc:
                raise ShapeMismatch(f"layers[{i}]: {exc}") from None
        self.shapes = shapes
        if self.beta is not None:
            self.beta = [float(b) for b in self.beta]
            if len(self.beta) != len(self.weighted_layers()):
                raise ShapeMismatch(
                    f"beta has {len(self.beta)} entries, expected one per dense/conv layer "
                    f"({len(self.weighted_layers())})"
                )
            if not all(math.isfinite(b) and b > 0 for b in self.beta):
                raise InvalidParameter("beta entries must be finite and > 0")

    def weighted_layers(self) -> List[int]:
        """Indices of dense and conv layers, in order."""
        return [i for i, l in enumerate(self.layers) if not isinstance(l, Flatten)]

    def replace_layers(self, updates: dict, beta="keep") -> "Network":
        layers = list(self.layers)
        for i, layer in updates.items():
            layers[i] = layer
        return Network(layers, self.input_shape, self.beta if beta == "keep" else beta)

    def layer_beta(self, i: int) -> Optional[float]:
        if self.beta is None:
            return None
        return self.beta[self.weighted_layers().index(i)]


def _as_batch(net: Network, x):
    x = np.asarray(x, dtype=np.float64)
    if x.shape == net.input_shape:
        return x[None], True
    if x.shape[1:] == net.input_shape:
        return x, False
    raise ShapeMismatch(f"input shape {x.shape} does not match network input {net.input_shape}")


def _run(net: Network, x, stop: int, linear_only: bool):
    x, single = _as_batch(net, x)
    if not np.all(np.isfinite(x)):
        raise InvalidParameter("input must be finite")
    for i, layer in enumerate(net.layers[:stop + 1]):
        x = layer.linear(x)
        if layer.activation is not None and not (linear_only and i == stop):
            x = layer.activation(x)
    return x[0] if single else x


def forward(net: Network, x):
    """Network output for one input of ``input_shape`` or a batch of them."""
    return _run(net, x, len(net.layers) - 1, False)


def forward_linear_part(net: Network, layer_idx: int, x):
    """Pre-activation of layer ``layer_idx`` (all earlier layers fully applied)."""
    if not (0 <= layer_idx < len(net.layers)):
        raise IndexOutOfRange(f"layer index {layer_idx} outside [0, {len(net.layers)})")
    return _run(net, x, layer_idx, True)


# --- serialization -------------------------------------------------------


def _layer_to_json(layer):
    if isinstance(layer, Flatten):
        return {"type": "flatten"}
    if isinstance(layer, DenseLayer):
        return {
            "type": "dense",
            "weights": layer.weights.tolist(),
            "bias": layer.bias.tolist(),
            "activation": layer.activation.to_json(),
        }
    return {
        "type": "conv2d",
        "weights": layer.kernels.tolist(),
        "bias": layer.bias.tolist(),
        "activation": layer.activation.to_json(),
        "stride": list(layer.stride),
        "padding": layer.padding if layer.padding == "valid" else list(layer.padding),
    }


def to_json(net: Network) -> dict:
    doc = {"input_shape": list(net.input_shape), "layers": [_layer_to_json(l) for l in net.layers]}
    if net.beta is not None:
        doc["beta"] = list(net.beta)
    return doc


def dumps(net: Network) -> str:
    # float repr is the shortest string that round-trips exactly
    return json.dumps(to_json(net), allow_nan=False)


def save_model(net: Network, path) -> None:
    Path(path).write_text(dumps(net) + "\n")


def _array(obj, where, ndim):
    try:
        a = np.array(obj, dtype=np.float64)
    except (TypeError, ValueError) as exc:
        raise ParseError(f"{where}: not a rectangular numeric array ({exc})") from None
    if a.ndim != ndim:
        raise ParseError(f"{where}: expected a {ndim}-D array, got {a.ndim}-D")
    return a


def _layer_from_json(obj, where):
    if not isinstance(obj, dict):
        raise ParseError(f"{where}: expected an object")
    kind = obj.get("type")
    if kind == "flatten":
        return Flatten()
    if kind not in ("dense", "conv2d"):
        raise ParseError(f"{where}.type: unknown layer type {kind!r}")
    for key in ("weights", "bias", "activation"):
        if key not in obj:
            raise ParseError(f"{where}: missing field {key!r}")
    act = Activation.from_json(obj["activation"], f"{where}.activation")
    bias = _array(obj["bias"], f"{where}.bias", 1)
    try:
        if kind == "dense":
            return DenseLayer(_array(obj["weights"], f"{where}.weights", 2), bias, act)
        padding = obj.get("padding", "valid")
        if padding != "valid" and not isinstance(padding, list):
            raise ParseError(f"{where}.padding: expected 'valid' or [ph, pw]")
        return ConvLayer(_array(obj["weights"], f"{where}.weights", 4), bias, act,
                         tuple(obj.get("stride", (1, 1))), padding)
    except (InvalidParameter, ShapeMismatch) as exc:
        raise type(exc)(f"{where}: {exc}") from None


def from_json(doc) -> Network:
    if not isinstance(doc, dict):
        raise ParseError("model: expected a JSON object at top level")
    if "input_shape" not in doc or "layers" not in doc:
        raise ParseError("model: missing 'input_shape' or 'layers'")
    shape = doc["input_shape"]
    if not isinstance(shape, list) or not all(isinstance(s, int) and s > 0 for s in shape):
        raise ParseError("input_shape: expected a list of positive integers")
    if not isinstance(doc["layers"], list) or not doc["layers"]:
        raise ParseError("layers: expected a non-empty list")
    layers = [_layer_from_json(l, f"layers[{i}]") for i, l in enumerate(doc["layers"])]
    beta = doc.get("beta")
    if beta is not None and not isinstance(beta, list):
        raise ParseError("beta: expected a list of numbers")
    return Network(layers, tuple(shape), beta)


def loads(text: str) -> Network:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    return from_json(doc)


def load_model(path) -> Network:
    return loads(Path(path).read_text())


def with_beta(net: Network, beta) -> Network:
    return replace(net, beta=None if beta is None else list(beta))
