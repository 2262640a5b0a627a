"""Command-line front-end: bounds, histogram, similarity, reshape, experiment.

Exit codes are script-friendly: 0 success (and "similar" for checks), 1 I/O
failure, 2 validation failure, 3 dissimilar histograms or infeasible
reshaping.  All randomness sits behind explicit seeds.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace

import numpy as np

from .bounds import BinningSpec, derive_binning, propagate_intervals
from .errors import ValidationError
from .evaluate import ExperimentConfig, run_experiment
from .histogram import (
    build_histogram,
    epsilon_portion_similar,
    kl_similar,
    load_histogram,
    save_histogram,
    save_report,
)
from .model import load_dataset, load_network, save_dataset
from .reshape import (
    apply_plan,
    encode,
    export_lp,
    save_plan,
    solve_exact,
    solve_greedy,
)

EXIT_OK = 0
EXIT_IO = 1
EXIT_VALIDATION = 2
EXIT_NEGATIVE = 3


def _say(args, message: str) -> None:
    if not args.quiet:
        print(message)


def _parse_neurons(text: str | None):
    """Comma-separated 1-based indices, with a-b ranges allowed."""
    if text is None:
        return None
    out: list[int] = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if "-" in part[1:]:
            lo_s, hi_s = part.split("-", 1)
            out.extend(range(int(lo_s), int(hi_s) + 1))
        else:
            out.append(int(part))
    if not out:
        raise ValidationError("neuron list is empty")
    return tuple(out)


def _load_spec_file(path) -> BinningSpec:
    """Accept either a bare spec document or a bounds report wrapping one."""
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    if "spec" in doc:
        doc = doc["spec"]
    return BinningSpec.from_dict(doc)


def _parse_candidates(text: str, n_test: int, default_seed: int):
    """Candidate policy: 'all', 'random:K[:seed]', or a path to an index file."""
    if text == "all":
        return None
    if text.startswith("random:"):
        parts = text.split(":")
        k = int(parts[1])
        seed = int(parts[2]) if len(parts) > 2 else default_seed
        if not 0 < k <= n_test:
            raise ValidationError(f"random candidate count must lie in 1..{n_test}")
        rng = np.random.default_rng(seed)
        return np.sort(rng.choice(n_test, size=k, replace=False)).tolist()
    with open(text, "r", encoding="utf-8") as fh:
        items = fh.read().split()
    if not items:
        raise ValidationError(f"candidate file {text} is empty")
    return [int(v) for v in items]


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_bounds(args) -> int:
    net = load_network(args.model)
    intervals = propagate_intervals(net, args.layer)
    spec = derive_binning(intervals, args.delta)
    doc = {
        "layer": args.layer,
        "intervals": [[iv.lo, iv.hi] for iv in intervals],
        "spec": spec.to_dict(),
    }
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, indent=2, sort_keys=True)
            fh.write("\n")
    _say(
        args,
        f"layer {args.layer}: {len(intervals)} neurons, "
        f"c={spec.c!r} delta={spec.delta!r} N={spec.n}",
    )
    if not args.quiet:
        for k, iv in enumerate(intervals, start=1):
            print(f"  neuron {k}: [{iv.lo!r}, {iv.hi!r}]")
    return EXIT_OK


def cmd_histogram(args) -> int:
    net = load_network(args.model)
    data = load_dataset(args.data)
    if args.spec:
        spec = _load_spec_file(args.spec)
    else:
        spec = derive_binning(propagate_intervals(net, args.layer), args.delta)
    neurons = _parse_neurons(args.neurons)
    hist = build_histogram(net, data, args.layer, spec, neurons, threads=args.threads)
    save_histogram(hist, args.out)
    _say(
        args,
        f"histogram: layer {hist.layer}, {len(hist.neurons)} neurons x "
        f"{hist.spec.n + 1} bins, {hist.total} points -> {args.out}",
    )
    return EXIT_OK


def cmd_similarity(args) -> int:
    h_op = load_histogram(args.op)
    h_test = load_histogram(args.test)
    if args.eps is not None:
        report = epsilon_portion_similar(h_op, h_test, args.eps)
        stat_name = "max |ratio gap|"
    else:
        report = kl_similar(h_op, h_test, args.kappa)
        stat_name = "max divergence"
    if args.out:
        save_report(report, args.out)
    where = (
        f" at neuron {report.max_location[0]}, bin {report.max_location[1]}"
        if report.max_location is not None
        else ""
    )
    verdict = "similar" if report.satisfied else "dissimilar"
    _say(args, f"{verdict}: {stat_name} = {report.max_stat!r}{where}")
    return EXIT_OK if report.satisfied else EXIT_NEGATIVE


def cmd_reshape(args) -> int:
    net = load_network(args.model)
    d_test = load_dataset(args.test)
    if args.op_hist:
        h_op = load_histogram(args.op_hist)
        layer = h_op.layer
        spec = h_op.spec
        neurons = h_op.neurons
    else:
        d_op = load_dataset(args.op_data)
        layer = args.layer if args.layer is not None else max(1, net.n_layers - 1)
        if args.delta is None:
            raise ValidationError("--delta is required with --op-data")
        spec = derive_binning(propagate_intervals(net, layer), args.delta)
        neurons = _parse_neurons(args.neurons)
        h_op = build_histogram(net, d_op, layer, spec, neurons, threads=args.threads)

    candidates = _parse_candidates(args.candidates, len(d_test), args.seed)
    inst = encode(
        h_op, net, d_test, candidates, layer, spec, args.eps,
        min_survivors=args.min_survivors,
    )
    if args.export_lp:
        export_lp(inst, args.export_lp)
        _say(args, f"wrote LP model to {args.export_lp}")
    plan = (
        solve_greedy(inst)
        if args.method == "greedy"
        else solve_exact(inst, node_budget=args.node_budget)
    )

    if plan.verified:
        reshaped = apply_plan(d_test, plan)
        h_after = build_histogram(net, reshaped, layer, spec, neurons, threads=args.threads)
        after = epsilon_portion_similar(h_op, h_after, args.eps)
        save_plan(plan, args.plan_out, similarity=after.to_dict())
        save_dataset(reshaped, args.reshaped_out)
        _say(
            args,
            f"{plan.status}: removed {plan.removed_count} of {len(d_test)} points; "
            f"post-hoc similar: {after.satisfied}",
        )
        return EXIT_OK
    save_plan(plan, args.plan_out)
    _say(args, f"{plan.status}: no feasible removal plan found")
    return EXIT_NEGATIVE


def cmd_experiment(args) -> int:
    if args.config:
        with open(args.config, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
        if args.out_dir:
            doc["out_dir"] = args.out_dir
        if "out_dir" not in doc:
            raise ValidationError("config must name out_dir (or pass --out-dir)")
        cfg = ExperimentConfig.from_dict(doc)
    else:
        if not args.out_dir:
            raise ValidationError("--out-dir is required without --config")
        cfg = ExperimentConfig(out_dir=args.out_dir)
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.eps is not None:
        overrides["eps"] = args.eps
    if args.threads != 1:
        overrides["threads"] = args.threads
    if overrides:
        cfg = replace(cfg, **overrides)
    result = run_experiment(cfg)
    _say(
        args,
        f"{result.status}: removed={result.removed} eps_used={result.eps_used} "
        f"x={result.x!r} y={result.y!r} -> {result.out_dir}",
    )
    return EXIT_OK if result.feasible else EXIT_NEGATIVE


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="actreshape",
        description=(
            "Activation-histogram covariate-shift checks and minimum-removal "
            "test-set reshaping"
        ),
    )
    parser.add_argument("--threads", type=int, default=1, help="worker threads for forward passes")
    parser.add_argument("--quiet", action="store_true", help="suppress informational output")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("bounds", help="sound activation intervals and binning parameters")
    p.add_argument("--model", required=True)
    p.add_argument("--layer", type=int, required=True)
    p.add_argument("--delta", type=float, required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("histogram", help="binned activation histogram for a dataset")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--layer", type=int, required=True)
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--delta", type=float)
    group.add_argument("--spec", help="JSON file with binning parameters to reuse")
    p.add_argument("--neurons", help="1-based indices, e.g. 1,2,5 or 1-20")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_histogram)

    p = sub.add_parser("similarity", help="compare two histograms")
    p.add_argument("--op", required=True, help="operational histogram file")
    p.add_argument("--test", required=True, help="test histogram file")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--eps", type=float, help="portion-similarity tolerance")
    group.add_argument("--kappa", type=float, help="KL-divergence bound")
    p.add_argument("--out")
    p.set_defaults(func=cmd_similarity)

    p = sub.add_parser("reshape", help="minimum-removal reshaping of a test set")
    p.add_argument("--model", required=True)
    p.add_argument("--test", required=True, help="test dataset CSV")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--op-hist", help="operational histogram file")
    group.add_argument("--op-data", help="operational dataset CSV")
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("--layer", type=int, help="monitored layer (with --op-data)")
    p.add_argument("--delta", type=float, help="bin width (with --op-data)")
    p.add_argument("--neurons", help="neuron subset (with --op-data)")
    p.add_argument(
        "--candidates",
        default="all",
        help="'all', 'random:K[:seed]', or a file of point indices",
    )
    p.add_argument("--method", choices=("exact", "greedy"), default="exact")
    p.add_argument("--min-survivors", type=int, default=1)
    p.add_argument("--node-budget", type=int, default=200_000)
    p.add_argument("--seed", type=int, default=0, help="seed for random candidate sampling")
    p.add_argument("--export-lp", help="also write the model in LP text format")
    p.add_argument("--plan-out", default="plan.json")
    p.add_argument("--reshaped-out", default="reshaped.csv")
    p.set_defaults(func=cmd_reshape)

    p = sub.add_parser("experiment", help="end-to-end reshaping experiment bundle")
    p.add_argument("--config", help="experiment config JSON")
    p.add_argument("--out-dir", help="bundle directory (overrides config)")
    p.add_argument("--seed", type=int)
    p.add_argument("--eps", type=float)
    p.set_defaults(func=cmd_experiment)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except IndexError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (KeyError, json.JSONDecodeError) as exc:
        print(f"error: malformed input file ({exc})", file=sys.stderr)
        return EXIT_IO
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
