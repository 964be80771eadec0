"""Point sets on which no proper subset can give a relative-error guarantee.

All points have norm alpha and last coordinate alpha/2, so they lie on a
(d-1)-sphere. Every such point can be cut off from the others by a
hyperplane through the origin, and with a ReLU-like activation the
corresponding query sees only that point.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .activations import Activation
from .errors import DegenerateSet, InvalidActivation, InvalidParameter, InvalidSubset
from .rng import stream


@dataclass
class SpherePointSet:
    points: np.ndarray  # (n, d)
    alpha: float

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def d(self) -> int:
        return self.points.shape[1]


def build_sphere_points(n: int, d: int, alpha: float, seed: int) -> SpherePointSet:
    if n < 2:
        raise InvalidParameter(f"n must be >= 2, got {n}")
    if d < 3:
        raise InvalidParameter(f"d must be >= 3, got {d}")
    if not (math.isfinite(alpha) and alpha > 0):
        raise InvalidParameter(f"alpha must be finite and > 0, got {alpha}")
    gen = stream(seed, 0)
    head = gen.standard_normal((n, d - 1))
    head /= np.linalg.norm(head, axis=1, keepdims=True)
    head *= alpha * math.sqrt(3.0) / 2.0
    pts = np.hstack([head, np.full((n, 1), alpha / 2.0)])
    return from_points(pts, alpha)


def from_points(points, alpha: float) -> SpherePointSet:
    """Validate an explicit point set (norm alpha, last coordinate alpha/2, distinct)."""
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[0] < 2 or pts.shape[1] < 3:
        raise InvalidParameter("need at least 2 points in dimension >= 3")
    if np.max(np.abs(np.linalg.norm(pts, axis=1) - alpha)) > 1e-12 * max(1.0, alpha):
        raise InvalidParameter("every point must have norm alpha")
    if np.max(np.abs(pts[:, -1] - alpha / 2)) > 1e-12 * max(1.0, alpha):
        raise InvalidParameter("every point must have last coordinate alpha/2")
    if len(np.unique(pts, axis=0)) != len(pts):
        raise DegenerateSet("points must be pairwise distinct")
    return SpherePointSet(pts, float(alpha))


def separating_query(pts: SpherePointSet, target: int, beta: float) -> np.ndarray:
    """A short x with x.p_target > 0 and x.q < 0 for every other point q."""
    if not (0 <= target < pts.n):
        raise InvalidParameter(f"target {target} outside [0, {pts.n})")
    if not (beta > 0):
        raise InvalidParameter("beta must be > 0")
    a = pts.alpha
    head = pts.points[:, :-1]
    p = head[target]
    r2 = 0.75 * a * a  # ||p'||^2
    others = np.delete(head, target, axis=0) @ p
    g = float(others.max())
    if g >= r2 * (1 - 1e-15):
        raise DegenerateSet(f"point {target} coincides with another point")
    lam = (g + r2) / a  # (alpha/2) * lam is the midpoint of (g, r2)
    x = np.append(p, -lam)
    return x * (min(beta, 1.0) * 0.5 / np.linalg.norm(x))


@dataclass
class Violation:
    omitted: int
    query: np.ndarray
    ratio: float
    full_sum: float
    subset_sum: float


def multiplicative_violation(pts: SpherePointSet, subset_indices: Sequence[int], phi: Activation,
                             beta: float, u: Optional[Sequence[float]] = None) -> Violation:
    """Relative error of the weighted subset at the query isolating an omitted point.

    The ratio is 1 for every weighting ``u`` (default: all ones), so no
    relative error below 1 can hold on all of the ball.
    """
    if not phi.positive_iff_positive:
        raise InvalidActivation(
            f"{phi.kind} does not satisfy phi(b) > 0 <=> b > 0; only relu and binary_step do"
        )
    subset = np.unique(np.asarray(subset_indices, dtype=np.int64))
    if len(subset) and (subset.min() < 0 or subset.max() >= pts.n):
        raise InvalidSubset("subset index out of range")
    missing = np.setdiff1d(np.arange(pts.n), subset)
    if len(missing) == 0:
        raise InvalidSubset("subset is the full set; the claim concerns proper subsets")
    u = np.ones(len(subset)) if u is None else np.asarray(u, dtype=np.float64)
    if u.shape != subset.shape:
        raise InvalidParameter(f"u must have {len(subset)} entries")
    omitted = int(missing[0])
    x = separating_query(pts, omitted, beta)
    vals = phi(pts.points @ x)
    full = float(vals.sum())
    approx = float(u @ vals[subset]) if len(subset) else 0.0
    return Violation(omitted, x, abs(full - approx) / full, full, approx)
