"""Command line: ``filtered-boris {simulate,converge,scan,validate}``.

Exit status is 0 on success, 1 when a check fails and 2 on invalid input.
Reference solutions are cached in ``$BORIS_CACHE_DIR`` when it is set.
"""
import argparse
import sys
from pathlib import Path

from ..errors import BorisError
from ..fields import PRESETS, make_preset
from ..integrators import MethodConfig, Variant, run_trajectory
from . import report as rep
from .checks import validate
from .experiments import (
    PAPER_SCAN_KS,
    PAPER_V0,
    PAPER_X0,
    ExperimentSpec,
    HRule,
    paper_scan_spec,
    run_convergence,
    run_resonance_scan,
)

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2
METHOD_NAMES = [v.value for v in Variant]


class UsageError(Exception):
    pass


def _floats(text):
    try:
        return tuple(float(eval_number(t)) for t in text.split(",") if t.strip())
    except (ValueError, ZeroDivisionError) as exc:
        raise argparse.ArgumentTypeError(f"not a number list: {text!r}") from exc


def eval_number(token):
    """Parse ``0.25``, ``1/4`` or ``2^-6``."""
    t = token.strip()
    if "^" in t:
        base, exp = t.split("^", 1)
        return float(base) ** float(exp)
    if "/" in t:
        num, den = t.split("/", 1)
        return float(num) / float(den)
    return float(t)


def _number(text):
    try:
        return eval_number(text)
    except (ValueError, ZeroDivisionError) as exc:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from exc


def _vec(text):
    vals = _floats(text)
    if len(vals) != 3:
        raise argparse.ArgumentTypeError("expected three comma-separated numbers")
    return vals


def _methods(text):
    names = [m.strip() for m in text.split(",") if m.strip()]
    for m in names:
        if m not in METHOD_NAMES:
            raise argparse.ArgumentTypeError(f"unknown method {m!r}; choose from {METHOD_NAMES}")
    return names


def _method_configs(names, args):
    return tuple(
        MethodConfig(Variant(m), fp_max_iters=args.fp_iters, fp_tol=args.fp_tol,
                     guard_policy=args.guard_policy)
        for m in names
    )


def _write(text, out):
    if out is None or out == "-":
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def _emit_report(report, args):
    if args.format == "json":
        _write(rep.report_json(report), args.out)
    else:
        _write(rep.report_csv(report), args.out)
    if args.gnuplot:
        if args.out in (None, "-") or args.format != "csv":
            raise UsageError("--gnuplot needs --out FILE with --format csv")
        script = Path(args.out).with_suffix(".gp")
        script.write_text(rep.gnuplot_script(Path(args.out).name, report))
    failed = [c for c in report.cells if not c.ok]
    print(f"{len(report.cells)} cells, {len(failed)} failed, {report.elapsed:.1f}s", file=sys.stderr)
    for (method, rule, metric), s in sorted(report.slopes.items()):
        shown = "n/a" if s is None else f"{s:.3f}"
        print(f"slope {method:8s} {rule:9s} {metric:9s} {shown}", file=sys.stderr)
    return EXIT_OK


def cmd_simulate(args):
    model = make_preset(args.preset, args.epsilon)
    config = _method_configs([args.method], args)[0]
    traj = run_trajectory(args.x0, args.v0, model, config, args.h, args.t_end)
    text = rep.trajectory_json(traj) if args.format == "json" else rep.trajectory_csv(traj)
    _write(text, args.out)
    return EXIT_OK


def cmd_converge(args):
    if args.paper:
        spec = ExperimentSpec(err_mode=args.err_mode)
    else:
        if not args.epsilons:
            raise UsageError("converge needs --paper or --epsilons")
        spec = ExperimentSpec(
            preset=args.preset, x0=args.x0, v0=args.v0, t_end=args.t_end,
            epsilons=args.epsilons,
            h_rules=tuple(HRule("ratio", r) for r in args.h_ratios),
            methods=_method_configs(args.methods, args),
            err_mode=args.err_mode,
        )
    report = run_convergence(spec, workers=args.workers)
    return _emit_report(report, args)


def cmd_scan(args):
    if args.paper:
        spec, ks = paper_scan_spec(), PAPER_SCAN_KS
    else:
        if args.epsilon is None or args.k_from is None or args.k_to is None:
            raise UsageError("scan needs --paper or --epsilon, --k-from and --k-to")
        if not 0 < args.k_from <= args.k_to:
            raise UsageError("need 0 < k-from <= k-to")
        spec = paper_scan_spec(
            preset=args.preset, x0=args.x0, v0=args.v0, t_end=args.t_end,
            epsilons=(args.epsilon,), methods=_method_configs(args.methods, args),
            err_mode=args.err_mode,
        )
        ks = range(args.k_from, args.k_to + 1)
    report = run_resonance_scan(spec, ks, workers=args.workers)
    return _emit_report(report, args)


def cmd_validate(args):
    return EXIT_OK if validate(workers=args.workers) else EXIT_FAIL


def _common(p, output=True):
    p.add_argument("--preset", default="paper-sec8", choices=sorted(PRESETS))
    p.add_argument("--x0", type=_vec, default=PAPER_X0, help="initial position, e.g. 1/3,1/4,1/2")
    p.add_argument("--v0", type=_vec, default=PAPER_V0, help="initial velocity")
    p.add_argument("--t-end", type=_number, default=1.0)
    p.add_argument("--fp-iters", type=int, default=2, help="fixed-point iterations (implicit methods)")
    p.add_argument("--fp-tol", type=float, default=1e-13)
    p.add_argument("--guard-policy", choices=("flag", "reject"), default="flag")
    if output:
        p.add_argument("--out", default=None, help="output file (default: stdout)")
        p.add_argument("--format", choices=("csv", "json"), default="csv")


def build_parser():
    parser = argparse.ArgumentParser(prog="filtered-boris", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="integrate one trajectory")
    _common(p)
    p.add_argument("--method", choices=METHOD_NAMES, default="imp-a")
    p.add_argument("--epsilon", type=_number, required=True)
    p.add_argument("--h", type=_number, required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("converge", help="error sweep over epsilon with h tied to epsilon")
    _common(p)
    p.add_argument("--paper", action="store_true", help="the published sweep (overrides other flags)")
    p.add_argument("--epsilons", type=_floats, help="strictly decreasing, e.g. 2^-4,2^-5,2^-6")
    p.add_argument("--h-ratios", type=_floats, default=(1.0, 4.0, 16.0))
    p.add_argument("--methods", type=_methods, default=METHOD_NAMES)
    p.add_argument("--err-mode", choices=("sup", "endpoint"), default="sup")
    p.add_argument("--gnuplot", action="store_true", help="also write a gnuplot script next to --out")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_converge)

    p = sub.add_parser("scan", help="fixed epsilon, h = 1/k")
    _common(p)
    p.add_argument("--paper", action="store_true", help="the published scan (overrides other flags)")
    p.add_argument("--epsilon", type=_number)
    p.add_argument("--k-from", type=int)
    p.add_argument("--k-to", type=int)
    p.add_argument("--methods", type=_methods, default=METHOD_NAMES)
    p.add_argument("--err-mode", choices=("sup", "endpoint"), default="endpoint")
    p.add_argument("--gnuplot", action="store_true")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_scan)

    p = sub.add_parser("validate", help="run the invariant suite and acceptance criteria")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_validate)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        return args.func(args)
    except BorisError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except (UsageError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
