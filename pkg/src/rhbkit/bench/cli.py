"""``rhbkit`` command line.

Exit codes: 0 when everything passes, 1 when a case fails, 2 for usage,
parse and output errors.
"""
from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from ..expr import ParseError, parse_system
from ..poly import to_json, to_text
from ..recast import RecastError, recast
from ..solvers import SolverConfig
from . import corpus
from .acceptance import run_all
from .cases import builtin_case, generic_case, run_case, run_monte_carlo, run_scheme_study, run_sweep
from .report import FORMATS, emit_report

EXIT_PASS, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _source(ref):
    try:
        text = corpus.source_of(ref)
    except KeyError as exc:
        raise UsageError(exc.args[0]) from None
    except OSError as exc:
        raise UsageError(f"cannot read {ref}: {exc.strerror or exc}") from None
    try:
        ode = parse_system(text)
    except ParseError as exc:
        raise UsageError(f"parse error in {ref}: {exc}") from None
    return text, ode


def _builtin_name(ref):
    name = ref.removeprefix("builtin:")
    return name if name in corpus.BUILTIN else None


def _order(args):
    return args.trunc if args.trunc is not None else args.order


def _case(args):
    text, ode = _source(args.system)
    solver = SolverConfig(method=args.solver)
    name = _builtin_name(args.system)
    if name is not None:
        return builtin_case(name, _order(args), args.variant, args.scheme, solver)
    return generic_case(ode.name, text, _order(args), args.variant, args.scheme, solver)


def _emit(items, args, default="table"):
    emit_report(items, args.format or default, args.out, timing=not args.no_timing)


# --------------------------------------------------------------------------
# verbs

def cmd_recast(args):
    _, ode = _source(args.system)
    try:
        ps = recast(ode)
    except RecastError as exc:
        raise UsageError(f"cannot recast {args.system}: {exc}") from None
    doc = json.dumps(to_json(ps), indent=2) + "\n"
    if args.format != "json":
        sys.stdout.write(to_text(ps))
        sys.stdout.write("\n")
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(doc)
    else:
        sys.stdout.write(doc)
    return EXIT_PASS


def cmd_solve(args):
    rep = run_case(_case(args))
    _emit(rep, args, "json")
    if not rep.passed:
        print(f"FAIL {rep.case}: {', '.join(rep.failures)}", file=sys.stderr)
    return EXIT_PASS if rep.passed else EXIT_FAIL


def cmd_sweep(args):
    if args.points < 1:
        raise UsageError("--points must be positive")
    text, ode = _source(args.system)
    if ode.forcing is None:
        raise UsageError(f"{args.system} has no forcing frequency to sweep")
    solver = SolverConfig(method=args.solver)
    params = np.linspace(args.start, args.stop, args.points)
    points = run_sweep(text, [float(p) for p in params], order=_order(args) or 9,
                       variant=args.variant or "rhb", solver=solver)
    _emit(points, args, "csv")
    return EXIT_PASS if all(p.converged for p in points) else EXIT_FAIL


def cmd_scheme_study(args):
    name = _builtin_name(args.system)
    if name not in ("pendulum", "relativistic"):
        raise UsageError("scheme studies run on builtin:pendulum or builtin:relativistic")
    study = run_scheme_study(name, _order(args), SolverConfig(method=args.solver))
    if (args.format or "table") == "json":
        _emit(study, args, "json")
    else:
        rows = [dict(scheme=k, label=label, **rep.to_dict(not args.no_timing))
                for k, label, rep in study.rows]
        _emit(rows, args)
    return EXIT_PASS if all(rep.passed for _, _, rep in study.rows) else EXIT_FAIL


def cmd_mc(args):
    if args.trials < 1:
        raise UsageError("--trials must be positive")
    variants = (args.variant,) if args.variant else ("rhb", "hdhb")
    mc = run_monte_carlo(args.trials, args.seed, _order(args) or 9, variants)
    _emit(mc, args, "json" if args.format is None else args.format)
    ok = "rhb" not in mc.counts or mc.counts["rhb"]["non_physical"] == 0
    return EXIT_PASS if ok else EXIT_FAIL


def cmd_bench(args):
    trials = args.trials if args.trials is not None else 1000
    echo = args.format is None
    criteria = run_all(mc_trials=trials, seed=args.seed,
                       progress=(lambda line: print(line, flush=True)) if echo else None)
    if not echo:
        _emit([{"number": c.number, "title": c.title, "pass": c.passed, "detail": c.detail}
               for c in criteria], args)
    return EXIT_PASS if all(c.passed for c in criteria) else EXIT_FAIL


# --------------------------------------------------------------------------

def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--system", default=None, help="file path or builtin:NAME")
    common.add_argument("--variant", choices=("rhb", "hdhb", "aft", "rmhb"), default=None)
    common.add_argument("--order", type=int, default=None, help="harmonic truncation N")
    common.add_argument("--trunc", type=int, default=None,
                        help="lattice truncation p of a two-frequency basis")
    common.add_argument("--scheme", type=int, choices=(1, 2, 3), default=None)
    common.add_argument("--solver", choices=("newton", "lm"), default="lm")
    common.add_argument("--out", default=None, help="output path (default: stdout)")
    common.add_argument("--format", choices=FORMATS, default=None)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--no-timing", action="store_true",
                        help="leave wall-clock fields out so output is reproducible")

    p = argparse.ArgumentParser(prog="rhbkit", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="verb", required=True)
    sub.add_parser("recast", parents=[common], help="print the polynomial recast of a system")
    sub.add_parser("solve", parents=[common], help="solve one case and compare with the oracle")
    sw = sub.add_parser("sweep", parents=[common], help="warm-started forcing-frequency sweep")
    sw.add_argument("--from", dest="start", type=float, default=1.0)
    sw.add_argument("--to", dest="stop", type=float, default=3.0)
    sw.add_argument("--points", type=int, default=41)
    sub.add_parser("scheme-study", parents=[common], help="compare constraint schemes")
    mc = sub.add_parser("mc", parents=[common], help="Monte-Carlo random-start study (Duffing)")
    mc.add_argument("--trials", type=int, default=1000)
    bench = sub.add_parser("bench", parents=[common], help="run the acceptance suite")
    bench.add_argument("--trials", type=int, default=None, help="Monte-Carlo trials (default 1000)")
    return p


DEFAULT_SYSTEM = {"recast": None, "solve": None, "sweep": "builtin:duffing",
                  "scheme-study": "builtin:pendulum", "mc": None, "bench": None}
COMMANDS = {"recast": cmd_recast, "solve": cmd_solve, "sweep": cmd_sweep,
            "scheme-study": cmd_scheme_study, "mc": cmd_mc, "bench": cmd_bench}


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse reports usage errors with status 2
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    if args.system is None:
        args.system = DEFAULT_SYSTEM[args.verb]
        if args.system is None and args.verb in ("recast", "solve"):
            print(f"rhbkit {args.verb}: --system is required", file=sys.stderr)
            return EXIT_USAGE
    try:
        return COMMANDS[args.verb](args)
    except UsageError as exc:
        print(f"rhbkit {args.verb}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"rhbkit {args.verb}: cannot write output: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
