"""Error metrics, synthetic instances, sweeps and calibration of the constant c."""
from __future__ import annotations

import csv
import io
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional

import numpy as np

from .activations import Activation
from .baselines import percentile_coreset, uniform_coreset
from .coreset import (Coreset, QueryBall, WeightedSet, coreset_layer, required_sample_size,
                      sampling_plan)
from .errors import ConfigError, InvalidParameter, NonConvergent, ShapeMismatch
from .network import Network, forward, load_model
from .pruning import METHODS, dense_layer_to_weighted_set
from .rng import stream

log = logging.getLogger(__name__)

CSV_COLUMNS = ("method", "budget", "trial", "mean_abs_err")
METHOD_CODES = {m: i for i, m in enumerate(METHODS)}


# --- queries -------------------------------------------------------------


def uniform_ball(beta: float, d: int, count: int, seed: int, key: tuple = ()) -> np.ndarray:
    """``count`` points drawn uniformly from the d-dimensional ball of radius beta."""
    if not beta > 0 or d < 1 or count < 1:
        raise InvalidParameter("uniform_ball needs beta > 0, d >= 1, count >= 1")
    gen = stream(seed, *key)
    g = gen.standard_normal((count, d))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    r = gen.random(count) ** (1.0 / d)
    return g * (beta * r)[:, None]


def clip_to_ball(X, beta: float):
    """Scale rows with norm > beta onto the sphere; returns (rows, number rescaled)."""
    X = np.array(X, dtype=np.float64, ndmin=2)
    norms = np.linalg.norm(X, axis=1)
    over = norms > beta
    X[over] *= (beta / norms[over])[:, None]
    return X, int(over.sum())


def load_vectors(path) -> np.ndarray:
    path = Path(path)
    if path.suffix == ".npy":
        X = np.load(path)
    else:
        text = path.read_text()
        X = np.loadtxt(io.StringIO(text), delimiter="," if "," in text else None, ndmin=2)
    X = np.asarray(X, dtype=np.float64)
    return X.reshape(X.shape[0], -1)


def dataset_file(path, beta: Optional[float] = None):
    """Row vectors from a .npy/.csv/whitespace file, optionally pulled into the beta-ball."""
    X = load_vectors(path)
    if beta is None:
        return X, 0
    return clip_to_ball(X, beta)


# --- instances -----------------------------------------------------------


def gaussian_instance(n: int, d: int, seed: int, key: tuple = ()) -> WeightedSet:
    """Standard normal points divided by the largest row norm; N(0, 1) signed weights."""
    gen = stream(seed, *key)
    P = gen.standard_normal((n, d))
    P /= np.linalg.norm(P, axis=1).max()
    w = gen.standard_normal(n)
    return WeightedSet(P, w)


def uniform_instance(n: int, d: int, seed: int, key: tuple = ()) -> WeightedSet:
    """Points and weights with i.i.d. U[0, 1] entries."""
    gen = stream(seed, *key)
    P = gen.random((n, d))
    w = gen.random(n)
    return WeightedSet(P, w)


def build_instance(cfg: dict, seed: int, key: tuple = (0,)):
    """Return ``(WeightedSet, activation or None)`` from an instance config block."""
    if not isinstance(cfg, dict) or "kind" not in cfg:
        raise ConfigError("instance: expected an object with 'kind'")
    kind = cfg["kind"]
    try:
        if kind in ("gaussian", "uniform"):
            n, d = int(cfg["n"]), int(cfg["d"])
            if n < 1 or d < 1:
                raise ConfigError("instance.n and instance.d must be >= 1")
            fn = gaussian_instance if kind == "gaussian" else uniform_instance
            return fn(n, d, int(cfg.get("seed", seed)), key), None
        if kind == "model_layer":
            net = load_model(cfg["path"])
            idx = int(cfg["index"])
            return dense_layer_to_weighted_set(net, idx), net.layers[idx].activation
    except KeyError as exc:
        raise ConfigError(f"instance: missing field {exc.args[0]!r}") from None
    raise ConfigError(f"instance.kind: unknown instance kind {kind!r}")


def build_queries(cfg: dict, d: int, seed: int, key: tuple = (1,)):
    """Return ``(queries, beta, rescaled_count)`` from a queries config block."""
    if not isinstance(cfg, dict) or "kind" not in cfg:
        raise ConfigError("queries: expected an object with 'kind'")
    beta = float(cfg.get("beta", 1.0))
    if not beta > 0:
        raise ConfigError("queries.beta must be > 0")
    if cfg["kind"] == "uniform_ball":
        count = int(cfg.get("count", 200))
        return uniform_ball(beta, d, count, int(cfg.get("seed", seed)), key), beta, 0
    if cfg["kind"] in ("dataset", "dataset_file"):
        if "path" not in cfg:
            raise ConfigError("queries: missing field 'path'")
        X, rescaled = dataset_file(cfg["path"], beta)
        if X.shape[1] != d:
            raise ConfigError(f"queries: vectors have dimension {X.shape[1]}, instance needs {d}")
        if rescaled:
            log.info("rescaled %d query rows onto the beta=%g sphere", rescaled, beta)
        return X, beta, rescaled
    raise ConfigError(f"queries.kind: unknown query source {cfg['kind']!r}")


# --- metrics -------------------------------------------------------------


def neuron_additive_error(ws: WeightedSet, coreset: Coreset, phi: Activation, queries,
                          acts: Optional[np.ndarray] = None) -> float:
    """Mean over queries and weight functions of |full sum - coreset sum|.

    ``acts`` may hold precomputed ``ws.activations(phi, queries)``.
    """
    if acts is None:
        acts = ws.activations(phi, queries)
    return float(np.mean(np.abs(_deviation(ws, coreset, acts))))


def _deviation(ws, coreset, acts):
    # one product with (w - u) instead of two sums, so an exact reconstruction gives exactly 0
    return acts @ (ws.weights - coreset.full_weights(ws.n)).T


def network_l1_error(original: Network, pruned: Network, queries) -> float:
    """Mean over queries of the L1 distance between the two networks' outputs."""
    if original.input_shape != pruned.input_shape:
        raise ShapeMismatch(
            f"input shapes differ: {original.input_shape} vs {pruned.input_shape}"
        )
    X = np.asarray(queries, dtype=np.float64).reshape((-1,) + original.input_shape)
    a = forward(original, X).reshape(len(X), -1)
    b = forward(pruned, X).reshape(len(X), -1)
    if a.shape != b.shape:
        raise ShapeMismatch(f"output shapes differ: {a.shape[1:]} vs {b.shape[1:]}")
    return float(np.mean(np.sum(np.abs(a - b), axis=1)))


# --- sweeps --------------------------------------------------------------


@dataclass
class SweepRow:
    method: str
    budget: int
    trial: int
    mean_abs_err: float
    std: float = 0.0


@dataclass
class SweepReport:
    rows: List[SweepRow] = field(default_factory=list)
    rescaled_queries: int = 0

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for r in self.rows:
            writer.writerow([r.method, r.budget, r.trial, repr(r.mean_abs_err)])
        return buf.getvalue()

    def write_csv(self, path) -> None:
        Path(path).write_text(self.to_csv())

    def mean_by(self, method: str) -> dict:
        """budget -> error averaged over trials."""
        acc = {}
        for r in self.rows:
            if r.method == method:
                acc.setdefault(r.budget, []).append(r.mean_abs_err)
        return {b: float(np.mean(v)) for b, v in sorted(acc.items())}


def read_csv(text: str) -> List[SweepRow]:
    reader = csv.DictReader(io.StringIO(text))
    if tuple(reader.fieldnames or ()) != CSV_COLUMNS:
        raise ConfigError(f"unexpected CSV header {reader.fieldnames}")
    return [SweepRow(r["method"], int(r["budget"]), int(r["trial"]), float(r["mean_abs_err"]))
            for r in reader]


def _budgets(spec):
    if isinstance(spec, dict):
        try:
            return list(range(int(spec["start"]), int(spec["stop"]) + 1, int(spec.get("step", 1))))
        except KeyError as exc:
            raise ConfigError(f"budgets: missing field {exc.args[0]!r}") from None
    if not isinstance(spec, list) or not spec:
        raise ConfigError("budgets: expected a non-empty list or {start, stop, step}")
    return [int(b) for b in spec]


def validate_sweep_config(config: dict) -> dict:
    if not isinstance(config, dict):
        raise ConfigError("config: expected a JSON object")
    for key in ("instance", "methods", "budgets", "trials", "queries", "master_seed"):
        if key not in config:
            raise ConfigError(f"config: missing field {key!r}")
    methods = config["methods"]
    if not isinstance(methods, list) or not methods or any(m not in METHODS for m in methods):
        raise ConfigError(f"methods: expected a non-empty subset of {list(METHODS)}")
    trials = config["trials"]
    if not isinstance(trials, int) or trials < 1:
        raise ConfigError("trials: expected a positive integer")
    if not isinstance(config["master_seed"], int):
        raise ConfigError("master_seed: expected an integer")
    budgets = _budgets(config["budgets"])
    if any(b < 1 for b in budgets):
        raise ConfigError("budgets: every budget must be >= 1")
    return dict(config, budgets=budgets)


def run_sweep(config: dict, out=None) -> SweepReport:
    """Error of every (method, budget, trial) on one instance.

    Each trial draws from its own substream of ``master_seed``, so rows do
    not depend on which other methods or budgets are in the sweep.
    """
    cfg = validate_sweep_config(config)
    seed = cfg["master_seed"]
    ws, phi = build_instance(cfg["instance"], seed)
    if "activation" in cfg:
        phi = Activation.from_json(cfg["activation"], "activation")
    phi = phi or Activation("relu")
    X, beta, rescaled = build_queries(cfg["queries"], ws.d, seed)
    ball = QueryBall(beta)
    acts = ws.activations(phi, X)
    for b in cfg["budgets"]:
        if "percentile" in cfg["methods"] and b > ws.n:
            raise ConfigError(f"budgets: percentile budget {b} exceeds n={ws.n}")

    report = SweepReport(rescaled_queries=rescaled)
    for method in sorted(cfg["methods"], key=METHOD_CODES.get):
        code = METHOD_CODES[method]
        for m in cfg["budgets"]:
            for trial in range(cfg["trials"]):
                key = (2, code, m, trial)
                if method == "coreset":
                    cs = coreset_layer(ws, m, phi, ball, seed, key)
                elif method == "uniform":
                    cs = uniform_coreset(ws, m, seed, key)
                else:
                    cs = percentile_coreset(ws, m)
                dev = np.abs(_deviation(ws, cs, acts))
                report.rows.append(SweepRow(method, m, trial, float(dev.mean()), float(dev.std())))
    if out is not None:
        report.write_csv(out)
    return report


# --- calibration of c ----------------------------------------------------


@dataclass
class CalibrationResult:
    c: float
    m: int
    failure_fraction: float
    trials: int
    total_sensitivity: float
    dimension: int
    eps: float
    delta: float
    path: List[dict] = field(default_factory=list)

    @property
    def monotone(self) -> bool:
        """Failure fraction never increases with c along the search path."""
        pts = sorted((p["c"], p["failure_fraction"]) for p in self.path)
        return all(b[1] <= a[1] for a, b in zip(pts, pts[1:]))

    def to_json(self) -> dict:
        return {
            "c": self.c, "m": self.m, "failure_fraction": self.failure_fraction,
            "trials": self.trials, "total_sensitivity": self.total_sensitivity,
            "dimension": self.dimension, "eps": self.eps, "delta": self.delta,
            "monotone": self.monotone, "path": self.path,
        }


def failure_fraction(ws: WeightedSet, phi: Activation, ball: QueryBall, m: int, eps: float,
                     seed: int, n_seeds: int = 100, queries_per_seed: int = 10,
                     stream_tag: int = 3) -> float:
    """Fraction of (coreset seed, query) pairs whose additive error exceeds eps.

    Queries are uniform in the ball; each of ``n_seeds`` coresets is checked
    on its own ``queries_per_seed`` queries.
    """
    X = uniform_ball(ball.beta, ws.d, n_seeds * queries_per_seed, seed, (stream_tag, 0))
    acts = ws.activations(phi, X)
    fails = 0
    for s in range(n_seeds):
        rows = slice(s * queries_per_seed, (s + 1) * queries_per_seed)
        cs = coreset_layer(ws, m, phi, ball, seed, (stream_tag, 1, s))
        fails += int(np.count_nonzero(np.abs(_deviation(ws, cs, acts[rows])) > eps))
    return fails / (n_seeds * queries_per_seed * ws.k)


def calibrate_c(eps: float, delta: float, instance: Optional[dict] = None, *, beta: float = 1.0,
                activation: Optional[Activation] = None, seed: int = 0, n_seeds: int = 100,
                queries_per_seed: int = 10, floor: float = 0.05, tol: float = 0.05,
                max_c: float = 2.0 ** 20, max_m: int = 50_000_000) -> CalibrationResult:
    """Smallest c (to within ``tol``) whose sample size keeps failures at or below delta.

    Doubles c from ``floor`` until the empirical failure fraction is <= delta,
    then bisects between the last failing and first passing value. All
    candidates share the same coreset seeds and queries.
    """
    if not (0 < eps < 1) or not (0 < delta < 1):
        raise InvalidParameter("eps and delta must lie in (0, 1)")
    if n_seeds * queries_per_seed < 1000:
        raise InvalidParameter("calibration needs at least 1000 (seed, query) trials")
    instance = instance or {"kind": "gaussian", "n": 200, "d": 20}
    ws, phi0 = build_instance(instance, seed)
    phi = activation or phi0 or Activation("relu")
    ball = QueryBall(beta)
    t = sampling_plan(ws, phi, ball).total
    d = ws.d
    path = []

    def fraction(c):
        m = max(1, required_sample_size(t, d, eps, delta, c))
        if m > max_m:
            raise NonConvergent(f"c={c:g} needs m={m} draws, above the limit {max_m}")
        f = failure_fraction(ws, phi, ball, m, eps, seed, n_seeds, queries_per_seed)
        path.append({"c": c, "m": m, "failure_fraction": f})
        log.debug("c=%g m=%d failure=%.4f", c, m, f)
        return m, f

    def result(c, m, f):
        return CalibrationResult(c, m, f, n_seeds * queries_per_seed * ws.k, t, d, eps, delta, path)

    c = floor
    m, f = fraction(c)
    if f <= delta:
        return result(c, m, f)
    lo = c
    while True:
        c *= 2
        if c > max_c:
            raise NonConvergent(f"failure fraction still above {delta} at c={c / 2:g}")
        m, f = fraction(c)
        if f <= delta:
            break
        lo = c
    hi, hm, hf = c, m, f
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        m, f = fraction(mid)
        if f <= delta:
            hi, hm, hf = mid, m, f
        else:
            lo = mid
    return result(hi, hm, hf)


def load_config(path) -> dict:
    path = Path(path)
    text = path.read_text()
    if path.suffix == ".toml":
        try:
            import tomllib
        except ImportError:  # python < 3.11
            try:
                import tomli as tomllib
            except ImportError:
                raise ConfigError("TOML configs need python >= 3.11 or the 'tomli' package") from None
        try:
            return tomllib.loads(text)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from None
