"""Command line entry point: ``fracpme run|sweep|validate|kernels|report``.

Exit codes: 0 everything passed, 1 a run or check failed, 2 bad configuration.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import fracops, harness, validate
from .fracops import Grid

log = logging.getLogger("fracpme")

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


def _cmd_run(args) -> int:
    cfg = harness.load_config(args.config)
    res = harness.run_experiment(cfg, args.output_root)
    print(f"{res.path}: {res.manifest['status']}")
    return res.exit_code


def _cmd_sweep(args) -> int:
    if args.plan == "dichotomy":
        plan = harness.default_dichotomy_plan(args.concurrency)
    else:
        plan = harness.parse_plan(Path(args.plan).read_text())
        if args.concurrency is not None:
            plan.concurrency = args.concurrency
    report = harness.run_sweep(plan, args.output_root)
    for row in report["rows"]:
        print(f"m={row['m']:g} s={row['s']:g}: {row['regime']}")
    return EXIT_OK if all(r["status"] != "error" for r in report["rows"]) else EXIT_FAIL


def _cmd_validate(args) -> int:
    rows = validate.run_validation(args.out)
    for row in rows:
        verdict = "PASS" if row["pass"] else "FAIL"
        print(f"{verdict} {row['case']}: {row['norm']} = {row['error']:.3e} (tol {row['tolerance']:.1e})")
    return EXIT_OK if all(r["pass"] for r in rows) else EXIT_FAIL


def _cmd_kernels(args) -> int:
    if args.n < 8 or args.half_width <= 0:
        raise harness.ConfigError(["need n >= 8 and half-width > 0"])
    grid = Grid(-args.half_width, args.half_width, args.n)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    if args.s is not None:
        written.append(fracops.dump_kernel_csv(fracops.build_grad_riesz(grid, args.s, args.eps), out / f"grad_riesz_s{args.s:g}.csv"))
        if args.s <= 0.5:
            written.append(fracops.dump_kernel_csv(fracops.build_riesz_kernel(grid, args.s, args.eps), out / f"riesz_s{args.s:g}.csv"))
    if args.alpha is not None:
        written.append(fracops.dump_kernel_csv(fracops.build_frac_laplacian(grid, args.alpha), out / f"frac_lap_a{args.alpha:g}.csv"))
    if not written:
        raise harness.ConfigError(["give --s and/or --alpha"])
    for p in written:
        print(p)
    return EXIT_OK


def _cmd_report(args) -> int:
    print(harness.regenerate_report(args.directory))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fracpme", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run one YAML configuration")
    p.add_argument("config")
    p.add_argument("--output-root", default=None, help=f"overrides ${harness.OUTPUT_ROOT_ENV}")
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("sweep", help="run an (m, s) sweep plan; 'dichotomy' selects the built-in one")
    p.add_argument("plan")
    p.add_argument("--output-root", default=None)
    p.add_argument("--concurrency", type=int, default=None, help=f"overrides ${harness.THREADS_ENV}")
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("validate", help="run the reference-solution suite")
    p.add_argument("--out", default=None, help="CSV report path")
    p.set_defaults(func=_cmd_validate)

    p = sub.add_parser("kernels", help="dump operator weight tables as CSV")
    p.add_argument("--n", type=int, default=256)
    p.add_argument("--half-width", type=float, default=8.0)
    p.add_argument("--s", type=float, default=None)
    p.add_argument("--alpha", type=float, default=None)
    p.add_argument("--eps", type=float, default=0.0)
    p.add_argument("--out", default="kernels")
    p.set_defaults(func=_cmd_kernels)

    p = sub.add_parser("report", help="regenerate summaries and plots of a run or sweep directory")
    p.add_argument("directory")
    p.set_defaults(func=_cmd_report)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except harness.ConfigError as exc:
        for problem in exc.problems:
            print(f"config error: {problem}", file=sys.stderr)
        return EXIT_CONFIG
    except (FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    raise SystemExit(main())
