"""Comparison selectors: uniform sampling and top-norm ("percentile") retention."""
from __future__ import annotations

import numpy as np

from .coreset import Coreset, SamplingPlan, WeightedSet, _build
from .errors import InvalidParameter
from .rng import stream


def uniform_plan(n: int) -> SamplingPlan:
    return SamplingPlan(np.full(n, 1.0 / n), np.ones(n), float(n))


def uniform_coreset(ws: WeightedSet, m: int, seed: int, key: tuple = (), impl=None) -> Coreset:
    """Same estimator as the coreset, with every point drawn with probability 1/n."""
    return _build(ws, uniform_plan(ws.n), m, stream(seed, *key), seed, "uniform", impl=impl)


def percentile_coreset(ws: WeightedSet, m: int) -> Coreset:
    """Keep the m largest-norm points with their original weights.

    Ties go to the lower index. No reweighting, so the result is biased.
    """
    if int(m) != m or not (1 <= m <= ws.n):
        raise InvalidParameter(f"percentile budget must be in [1, {ws.n}], got {m}")
    m = int(m)
    order = np.argsort(-ws.norms, kind="stable")
    idx = np.sort(order[:m])
    return Coreset(idx, np.ones(m, dtype=np.int64), ws.weights[:, idx].copy(), m,
                   None, None, "percentile")
