"""Command-line entry point: ``deepshallow <subcommand> ...``.

Exit status: 0 success, 2 validation or parse failure, 3 head cap
exceeded, 4 verification failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from typing import Optional, Sequence

import numpy as np

from . import COLLAPSERS, REDUCERS
from .complexity import comparison_table, counts_for, counts_residual, table_csv, table_json
from .errors import CapExceeded, NetError
from .io import dumps_net, read_net, write_text_atomic
from .net import NetKind, evaluate, random_net
from .verify import (
    DEFAULT_BOX,
    check_gradient_consistency,
    check_pointwise,
    line_probe,
    random_lines,
    run_property_suite,
    stable_points,
    width_grid,
)

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_CAP = 3
EXIT_VERIFY = 4


class UsageError(NetError):
    pass


def _int_list(text: str) -> list:
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _float_list(text: str) -> list:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _box(text: str) -> tuple:
    vals = _float_list(text)
    if len(vals) != 2 or not vals[0] < vals[1]:
        raise argparse.ArgumentTypeError(f"expected LO,HI with LO < HI, got {text!r}")
    return tuple(vals)


def _nonneg(text: str) -> int:
    v = int(text)
    if v < 0:
        raise argparse.ArgumentTypeError("must be >= 0")
    return v


def _positive_float(text: str) -> float:
    v = float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError("must be > 0")
    return v


def _emit(text: str, out: Optional[str]):
    if out:
        write_text_atomic(out, text)
    else:
        sys.stdout.write(text)


def _print_json(obj):
    print(json.dumps(obj, indent=2, sort_keys=True))


def _head_cap(args) -> Optional[int]:
    if args.force:
        print(f"warning: --force lifts the head cap of {args.head_cap}; output may be very large",
              file=sys.stderr)
        return None
    return args.head_cap


# ------------------------------------------------------------ subcommands


def cmd_gen(args) -> int:
    net = random_net(args.kind, args.input_dim, args.widths, args.seed, args.scale)
    L, N = counts_for(net.kind, args.widths)
    _emit(dumps_net(net), args.out)
    print(f"L={L}, N={N}", file=sys.stdout if args.out else sys.stderr)
    return EXIT_OK


def cmd_eval(args) -> int:
    net = read_net(args.net)
    if args.x:
        X = np.array(args.x, dtype=np.float64)
        if X.shape[1] != net.input_dim:
            raise UsageError(f"points have dimension {X.shape[1]}, net expects {net.input_dim}")
    else:
        lo, hi = args.box
        X = np.random.default_rng(args.seed).uniform(lo, hi, size=(args.samples, net.input_dim))
    for x, y in zip(X, evaluate(net, X)):
        print(",".join(repr(float(v)) for v in x), repr(float(y)), sep="\t")
    return EXIT_OK


def _write_result(net, report: dict, args):
    if args.out:
        write_text_atomic(args.out, dumps_net(net))
    else:
        sys.stdout.write(dumps_net(net))
    if args.report:
        write_text_atomic(args.report, json.dumps(report, indent=2, sort_keys=True) + "\n")
    if args.out:
        _print_json(report)
    elif not args.report:
        print(json.dumps(report, sort_keys=True), file=sys.stderr)


def cmd_reduce(args) -> int:
    net = read_net(args.net)
    out, report = REDUCERS[net.kind](net, head_cap=_head_cap(args), prune_zeros=args.prune_zeros)
    d = report.to_dict()
    d["widths"] = list(out.stack.widths)
    _write_result(out, d, args)
    return EXIT_OK


def cmd_collapse(args) -> int:
    net = read_net(args.net)
    out, report = COLLAPSERS[net.kind](
        net, head_cap=_head_cap(args), prune_zeros=args.prune_zeros, dedup=args.dedup
    )
    d = report.to_dict()
    d["realized"] = {"L": report.final_width, "N": report.head_exponent}
    d["matches_predicted"] = d["realized"] == d["predicted"]
    _write_result(out, d, args)
    return EXIT_OK


def cmd_verify(args) -> int:
    if args.suite:
        grid = list(width_grid(args.max_depth, args.max_width))
        report = run_property_suite(args.suite, grid, list(range(args.seeds)), args.tol,
                                    input_dim=args.input_dim, n_samples=args.samples)
        result = report.to_dict()
        passed = report.passed
    else:
        if len(args.nets) != 2:
            raise UsageError("verify needs two net files, or --suite FAMILY")
        a, b = (read_net(p) for p in args.nets)
        eq = check_pointwise(a, b, args.box, args.samples, args.seed, args.tol)
        probes = [line_probe(a, b, p, d) for p, d in random_lines(a.input_dim, args.lines, args.seed, args.box)]
        result = {"pointwise": eq.to_dict(),
                  "line_probes": {"runs": len(probes), "passed": sum(p.passed for p in probes)}}
        passed = eq.passed and all(p.passed for p in probes)
        if args.gradients:
            g = check_gradient_consistency(a, b, stable_points(a, b, args.gradients, args.seed, args.box))
            result["gradients"] = {**vars(g), "passed": g.passed}
            passed = passed and g.passed
        result["passed"] = passed
    _print_json(result)
    return EXIT_OK if passed else EXIT_VERIFY


def cmd_counts(args) -> int:
    if args.net:
        net = read_net(args.net)
        kind, widths = net.kind, list(net.stack.widths)
    elif args.kind and args.widths:
        kind, widths = NetKind(args.kind), args.widths
    else:
        raise UsageError("counts needs a net file, or --kind and --widths")
    if kind is NetKind.RESIDUAL:
        c = counts_residual(widths)
        d = {"kind": kind.value, "widths": widths, **c.to_dict()}
    else:
        L, N = counts_for(kind, widths)
        d = {"kind": kind.value, "widths": widths, "L": L, "N": N}
    _print_json(d)
    return EXIT_OK


def cmd_compare(args) -> int:
    rows = comparison_table(args.T, args.depths)
    _emit(table_json(rows) if args.format == "json" else table_csv(rows), args.out)
    return EXIT_OK


# ------------------------------------------------------------ parser


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="deepshallow", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    kinds = [k.value for k in NetKind]

    g = sub.add_parser("gen", help="write a random net and print its predicted (L, N)")
    g.add_argument("kind", choices=kinds)
    g.add_argument("input_dim", type=int)
    g.add_argument("widths", type=_int_list, help="comma-separated hidden widths, e.g. 2,2")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--scale", type=float, default=1.0, help="half-width of the uniform weight range")
    g.add_argument("-o", "--out", help="output file (default: stdout)")
    g.set_defaults(func=cmd_gen)

    e = sub.add_parser("eval", help="evaluate a net at given or sampled points")
    e.add_argument("net")
    e.add_argument("--x", type=_float_list, action="append", help="one point, comma-separated; repeatable")
    e.add_argument("--samples", type=int, default=10)
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--box", type=_box, default=DEFAULT_BOX)
    e.set_defaults(func=cmd_eval)

    for name, func, helptext in (
        ("reduce", cmd_reduce, "remove the top hidden layer"),
        ("collapse", cmd_collapse, "reduce to a single hidden layer"),
    ):
        r = sub.add_parser(name, help=helptext)
        r.add_argument("net")
        r.add_argument("-o", "--out", help="output net file (default: stdout)")
        r.add_argument("--report", help="also write the JSON report to this file")
        r.add_argument("--head-cap", type=_nonneg, default=20, help="max log2 of the head count (default 20)")
        r.add_argument("--force", action="store_true", help="ignore the head cap")
        r.add_argument("--prune-zeros", action="store_true", help="skip subset rows for zero coefficients")
        if name == "collapse":
            r.add_argument("--dedup", action="store_true", help="drop duplicate heads")
        else:
            r.set_defaults(dedup=False)
        r.set_defaults(func=func)

    v = sub.add_parser("verify", help="check two nets for equality, or run a property suite")
    v.add_argument("nets", nargs="*")
    v.add_argument("--suite", choices=kinds, help="run the property suite for a family instead")
    v.add_argument("--max-depth", type=int, default=3)
    v.add_argument("--max-width", type=int, default=2)
    v.add_argument("--seeds", type=int, default=5, help="number of seeds for --suite")
    v.add_argument("--input-dim", type=int, default=2)
    v.add_argument("--samples", type=int, default=10_000)
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--tol", type=_positive_float, default=1e-9)
    v.add_argument("--box", type=_box, default=DEFAULT_BOX)
    v.add_argument("--lines", type=int, default=10, help="number of random line probes")
    v.add_argument("--gradients", type=int, default=0, help="compare FD gradients at this many points")
    v.set_defaults(func=cmd_verify)

    c = sub.add_parser("counts", help="predicted collapsed width L and head exponent N")
    c.add_argument("net", nargs="?")
    c.add_argument("--kind", choices=kinds)
    c.add_argument("--widths", type=_int_list)
    c.set_defaults(func=cmd_counts)

    t = sub.add_parser("compare", help="plain vs residual size table at a fixed unit budget")
    t.add_argument("--T", type=int, required=True, help="total hidden units")
    t.add_argument("--depths", type=_int_list, required=True)
    t.add_argument("--format", choices=("csv", "json"), default="csv")
    t.add_argument("-o", "--out")
    t.set_defaults(func=cmd_compare)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CapExceeded as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CAP
    except (NetError, OSError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
