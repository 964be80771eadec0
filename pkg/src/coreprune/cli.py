"""Command-line interface.

Exit codes: 0 success, 1 invalid input, 2 failure while running. With
``--json`` errors are written to stderr as a JSON object.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .activations import Activation
from .coreset import required_sample_size
from .counterexample import build_sphere_points, multiplicative_violation, separating_query
from .errors import CorePruneError, InvalidParameter
from .harness import (calibrate_c, dataset_file, load_config, network_l1_error, run_sweep,
                      uniform_ball)
from .network import load_model, save_model
from .pruning import PruneSpec, prune_network

log = logging.getLogger("coreprune")


def _floats(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise InvalidParameter(f"expected comma-separated numbers, got {text!r}") from None


def _ints(text):
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise InvalidParameter(f"expected comma-separated integers, got {text!r}") from None


def _write_json(obj, path):
    text = json.dumps(obj, indent=2, allow_nan=False) + "\n"
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def cmd_prune(args):
    net = load_model(args.model)
    beta = _floats(args.beta) if args.beta else None
    input_beta = 1.0
    if beta is not None and len(beta) == 1 and len(net.weighted_layers()) > 1:
        input_beta, beta = beta[0], None
    spec = PruneSpec(
        budgets=_ints(args.budgets), method=args.method, seed=args.seed, beta=beta,
        input_beta=input_beta, delta=args.delta, c=args.c, eps=args.eps,
        exact_width=args.exact_width,
    )
    pruned, report = prune_network(net, spec)
    save_model(pruned, args.out)
    if args.report:
        _write_json(report.to_json(), args.report)
    return 0


def cmd_eval(args):
    original = load_model(args.original)
    pruned = load_model(args.pruned)
    dim = int(np.prod(original.input_shape))
    rescaled = 0
    if args.queries:
        X, rescaled = dataset_file(args.queries, args.ball)
    else:
        X = uniform_ball(args.ball or 1.0, dim, args.count, args.seed)
    if X.shape[1] != dim:
        raise InvalidParameter(f"query vectors have dimension {X.shape[1]}, model expects {dim}")
    err = network_l1_error(original, pruned, X)
    _write_json({"mean_l1_error": err, "queries": int(len(X)), "rescaled": rescaled}, None)
    return 0


def cmd_sweep(args):
    report = run_sweep(load_config(args.config))
    if args.out in (None, "-"):
        sys.stdout.write(report.to_csv())
    else:
        report.write_csv(args.out)
    return 0


def cmd_counterexample(args):
    pts = build_sphere_points(args.n, args.d, args.alpha, args.seed)
    if not (0 <= args.subset_size < args.n):
        raise InvalidParameter("--subset-size must be in [0, n)")
    phi = Activation(args.activation)
    subset = list(range(args.subset_size))
    v = multiplicative_violation(pts, subset, phi, args.beta)
    queries = []
    for j in range(pts.n):
        x = separating_query(pts, j, args.beta)
        dots = pts.points @ x
        queries.append({
            "target": j,
            "query": x.tolist(),
            "signs_ok": bool(dots[j] > 0 and np.all(np.delete(dots, j) < 0)),
        })
    _write_json({
        "n": pts.n, "d": pts.d, "alpha": pts.alpha, "beta": args.beta, "seed": args.seed,
        "activation": phi.to_json(),
        "points": pts.points.tolist(),
        "separating_queries": queries,
        "subset": subset,
        "violation": {"omitted": v.omitted, "query": v.query.tolist(), "ratio": v.ratio,
                      "full_sum": v.full_sum, "subset_sum": v.subset_sum},
    }, args.out)
    return 0


def cmd_bound(args):
    print(required_sample_size(args.t, args.d, args.eps, args.delta, args.c))
    return 0


def cmd_calibrate(args):
    cfg = load_config(args.config) if args.config else {}
    act = cfg.get("activation")
    res = calibrate_c(
        args.eps, args.delta, cfg.get("instance"), beta=float(cfg.get("beta", 1.0)),
        activation=Activation.from_json(act) if act else None, seed=int(cfg.get("seed", 0)),
        n_seeds=int(cfg.get("n_seeds", 100)), queries_per_seed=int(cfg.get("queries_per_seed", 10)),
    )
    _write_json(res.to_json(), args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="coreprune", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("--json", action="store_true", help="report errors as JSON on stderr")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("prune", help="prune a .nnj model")
    s.add_argument("--model", required=True)
    s.add_argument("--budgets", required=True, help="comma-separated, one per prunable layer")
    s.add_argument("--method", default="coreset", choices=["coreset", "uniform", "percentile"])
    s.add_argument("--beta", help="input radius, or one radius per dense/conv layer")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.add_argument("--report")
    s.add_argument("--delta", type=float, default=0.1)
    s.add_argument("--c", type=float, default=1.0)
    s.add_argument("--eps", type=float)
    s.add_argument("--exact-width", action="store_true")
    s.set_defaults(func=cmd_prune)

    s = sub.add_parser("eval", help="mean L1 output error between two models")
    s.add_argument("--original", required=True)
    s.add_argument("--pruned", required=True)
    g = s.add_mutually_exclusive_group()
    g.add_argument("--queries", help="file of row vectors (.npy, .csv or whitespace)")
    s.add_argument("--ball", type=float, help="query radius (sampling, or clipping for --queries)")
    s.add_argument("--count", type=int, default=100)
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("sweep", help="error vs budget sweep, written as CSV")
    s.add_argument("--config", required=True)
    s.add_argument("--out")
    s.set_defaults(func=cmd_sweep)

    s = sub.add_parser("counterexample", help="instance with no relative-error coreset")
    s.add_argument("--n", type=int, default=8)
    s.add_argument("--d", type=int, default=3)
    s.add_argument("--alpha", type=float, default=1.0)
    s.add_argument("--beta", type=float, default=1.0)
    s.add_argument("--subset-size", type=int, default=None)
    s.add_argument("--activation", default="relu")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out")
    s.set_defaults(func=cmd_counterexample)

    s = sub.add_parser("bound", help="sample size needed for (eps, delta)")
    s.add_argument("--t", type=float, required=True)
    s.add_argument("--d", type=int, required=True)
    s.add_argument("--eps", type=float, required=True)
    s.add_argument("--delta", type=float, required=True)
    s.add_argument("--c", type=float, default=1.0)
    s.set_defaults(func=cmd_bound)

    s = sub.add_parser("calibrate", help="empirically calibrate the constant c")
    s.add_argument("--eps", type=float, required=True)
    s.add_argument("--delta", type=float, required=True)
    s.add_argument("--config")
    s.add_argument("--out")
    s.set_defaults(func=cmd_calibrate)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 1 if exc.code else 0
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "counterexample" and args.subset_size is None:
        args.subset_size = args.n - 1
    try:
        return args.func(args)
    except CorePruneError as exc:
        _report_error(args, exc.to_dict(), exc.exit_code)
        return exc.exit_code
    except (OSError, ValueError) as exc:
        _report_error(args, {"error": type(exc).__name__, "message": str(exc)}, 1)
        return 1


def _report_error(args, payload, code):
    if args.json:
        sys.stderr.write(json.dumps(dict(payload, exit_code=code)) + "\n")
    else:
        sys.stderr.write(f"error: {payload['error']}: {payload['message']}\n")


if __name__ == "__main__":
    sys.exit(main())
