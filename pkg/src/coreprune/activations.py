"""Monotone, non-negative activation functions.

All functions are vectorised over numpy arrays and return float64.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import InvalidParameter, ParseError

KINDS = ("relu", "sigmoid", "binary_step", "softplus", "soft_clip", "gauss")

# exp() overflows above this; gauss clips its exponent here so results stay finite.
_MAX_EXP = math.log(np.finfo(np.float64).max)


def _softplus(x):
    # ln(1 + e^x) without overflow for large x
    return np.logaddexp(0.0, x)


def _sigmoid(x):
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def _soft_clip(x, a):
    # softplus(a x) - softplus(a x - a), split so that no exp() argument is positive
    with np.errstate(over="ignore"):
        y = np.asarray(a * x, dtype=np.float64)
    hi = y >= 0.5 * a
    out = np.empty_like(y)
    yh = y[hi]
    out[hi] = a + np.log1p(np.exp(-yh)) - np.log1p(np.exp(a - yh))
    yl = y[~hi]
    out[~hi] = np.log1p(np.exp(yl)) - np.log1p(np.exp(yl - a))
    return np.maximum(out / a, 0.0)


@dataclass(frozen=True)
class Activation:
    """One of the six supported activations.

    ``alpha`` is only meaningful for ``soft_clip`` (its sharpness).
    """

    kind: str
    alpha: Optional[float] = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidParameter(f"unknown activation {self.kind!r}; expected one of {KINDS}")
        if self.kind == "soft_clip":
            if self.alpha is None or not (math.isfinite(self.alpha) and self.alpha > 0):
                raise InvalidParameter("soft_clip requires a finite alpha > 0")
        elif self.alpha is not None:
            raise InvalidParameter(f"{self.kind} takes no alpha parameter")

    @property
    def non_decreasing(self) -> bool:
        return self.kind != "gauss"

    @property
    def non_negative(self) -> bool:
        return True

    @property
    def positive_iff_positive(self) -> bool:
        """True when phi(b) > 0 holds exactly for b > 0."""
        return self.kind in ("relu", "binary_step")

    def __call__(self, x):
        return activation_eval(self, x)

    def to_json(self):
        if self.kind == "soft_clip":
            return {"kind": "soft_clip", "alpha": self.alpha}
        return {"kind": self.kind}

    @classmethod
    def from_json(cls, obj, where="activation") -> "Activation":
        if isinstance(obj, str):
            obj = {"kind": obj}
        if not isinstance(obj, dict) or "kind" not in obj:
            raise ParseError(f"{where}: expected a name or an object with 'kind'")
        kind = obj["kind"]
        if kind not in KINDS:
            raise ParseError(f"{where}.kind: unknown activation {kind!r}")
        alpha = obj.get("alpha")
        try:
            return cls(kind, None if alpha is None else float(alpha))
        except InvalidParameter as exc:
            raise ParseError(f"{where}: {exc}") from None


def get(name: str, alpha: Optional[float] = None) -> Activation:
    return Activation(name, alpha)


def activation_eval(kind: Activation, x):
    """Evaluate ``kind`` at ``x`` (scalar or array)."""
    scalar = np.ndim(x) == 0
    x = np.asarray(x, dtype=np.float64)
    k = kind.kind
    if k == "relu":
        y = np.maximum(x, 0.0)
    elif k == "sigmoid":
        y = _sigmoid(np.atleast_1d(x)).reshape(x.shape)
    elif k == "binary_step":
        y = np.where(x >= 0.0, 1.0, 0.0)
    elif k == "softplus":
        y = _softplus(x)
    elif k == "soft_clip":
        y = _soft_clip(x, kind.alpha)
    else:  # gauss
        y = np.exp(np.minimum(-x, _MAX_EXP))
    return float(y) if scalar else y


def activation_sup_abs_on_interval(kind: Activation, lo: float, hi: float) -> float:
    """sup of |phi| over [lo, hi]; attained at an endpoint since phi is monotone."""
    if lo > hi:
        raise InvalidParameter(f"empty interval [{lo}, {hi}]")
    return float(max(abs(activation_eval(kind, lo)), abs(activation_eval(kind, hi))))


def sup_abs_on_intervals(kind: Activation, lo, hi):
    """Vectorised form of :func:`activation_sup_abs_on_interval`."""
    return np.maximum(np.abs(activation_eval(kind, lo)), np.abs(activation_eval(kind, hi)))
