"""Command-line entry point: ``mnsflow {simulate,verify,convergence,boost}``."""

import argparse
import logging
import math
import os
import sys

from mnsflow.config import ConfigError, load_config
from mnsflow.diagnostics import galilean_defect
from mnsflow.models import ModelKind
from mnsflow.runner import EXIT_OK, convergence_study, run
from mnsflow.spectral import Grid
from mnsflow.storage import SnapshotError, format_float, write_csv

EXIT_FAIL = 1
EXIT_USAGE = 2


def _simulate(args):
    config = load_config(args.config)
    outcome = run(config, restart=args.restart)
    if outcome.exit_code == EXIT_OK:
        last = outcome.records[-1]
        print(f"completed t={last.t:.6g} steps={outcome.step} E_L2={last.E_L2:.10g} "
              f"E_half={last.E_half:.10g} -> {outcome.output_dir}")
    else:
        print(f"BLOW-UP: {outcome.blowup}", file=sys.stderr)
    return outcome.exit_code


def _verify(args):
    from mnsflow.verify import cancellation_suite, operator_suite

    checks = operator_suite(n=args.n, count=args.count, seed=args.seed)
    checks += cancellation_suite(seed=args.seed)
    for c in checks:
        print(c.line())
    failed = [c for c in checks if not c.passed]
    print(f"{len(checks) - len(failed)}/{len(checks)} checks passed")
    return EXIT_OK if not failed else EXIT_FAIL


def _convergence(args):
    config = load_config(args.config)
    rows = convergence_study(config, args.halvings)
    print(f"{'dt':>12s} {'steps':>7s} {'rel_diff':>12s} {'order':>7s}")
    for r in rows:
        order = "" if math.isnan(r.order) else f"{r.order:7.3f}"
        diff = "" if math.isnan(r.difference) else f"{r.difference:12.4e}"
        print(f"{r.dt:12.6g} {r.steps:7d} {diff:>12s} {order:>7s}")
    os.makedirs(config.output_dir, exist_ok=True)
    path = os.path.join(config.output_dir, "convergence.csv")
    write_csv(path, ("dt", "steps", "rel_diff", "order"),
              [(r.dt, r.steps, r.difference, r.order) for r in rows])
    return EXIT_OK


def _boost(args):
    config = load_config(args.config)
    try:
        c = [float(x) for x in args.velocity.split(",")]
    except ValueError:
        c = []
    if len(c) != 3:
        raise ConfigError(f"--velocity needs three comma-separated numbers, got {args.velocity!r}")
    grid = Grid(config.n)
    u0 = config.ic.build(grid)
    print("exploratory Galilean boost defect "
          "||N(u+c) - N(u) + (c.grad)u|| / ||(c.grad)u||")
    for model in ModelKind:
        d = galilean_defect(model, grid, u0, c, config.riesz_sign)
        print(f"{model.value:>14s}  {format_float(d)}")
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="mnsflow", description=__doc__)
    p.add_argument("-q", "--quiet", action="store_true", help="only warnings and errors")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="run a configured simulation")
    s.add_argument("--config", required=True)
    s.add_argument("--restart", help="checkpoint (.mns) to resume from")
    s.set_defaults(func=_simulate)

    v = sub.add_parser("verify", help="operator-identity and cancellation suites")
    v.add_argument("--n", type=int, default=16)
    v.add_argument("--count", type=int, default=100)
    v.add_argument("--seed", type=int, default=0)
    v.set_defaults(func=_verify)

    c = sub.add_parser("convergence", help="self-convergence table under dt halving")
    c.add_argument("--config", required=True)
    c.add_argument("--halvings", type=int, required=True)
    c.set_defaults(func=_convergence)

    b = sub.add_parser("boost", help="exploratory Galilean boost defect of each model")
    b.add_argument("--config", required=True)
    b.add_argument("--velocity", default="1,0,0", help="boost velocity c1,c2,c3")
    b.set_defaults(func=_boost)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(levelname)s %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except (ConfigError, SnapshotError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
