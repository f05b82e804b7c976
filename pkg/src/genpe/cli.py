"""Command-line driver.

``genpe run FILE`` or ``genpe run --scenario NAME`` executes a scenario and
writes ``report.json`` plus CSV series under ``--out``. ``genpe
reproduce-paper`` tabulates the intermittent example's double integral
against its closed form.

Exit status is 0 whenever the analysis completes, whatever the verdicts;
1 on execution errors (bad files, invalid signals); 2 on usage errors.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .corpus import SCENARIO_NAMES, builtin_scenario
from .errors import GenPEError
from .loader import load_scenario
from .report import intermittent_table, run_scenario, write_intermittent_csv


def _positive_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return v


def _seed(text: str) -> int:
    v = int(text)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="genpe", description=__doc__.split("\n\n")[0])
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a scenario file or a built-in scenario")
    run.add_argument("file", nargs="?", help="scenario TOML file")
    run.add_argument("--scenario", choices=SCENARIO_NAMES, help="built-in scenario name")
    run.add_argument("--out", default=".", help="output directory (default: current)")
    run.add_argument("--threads", type=_positive_int, default=1, help="worker threads for criteria grids")
    run.add_argument("--seed", type=_seed, default=0, help="seed of the weak-form test-function sampler")
    run.add_argument("--timing", action="store_true",
                     help="record wall-clock timings (makes the report non-reproducible)")

    rep = sub.add_parser("reproduce-paper", help="tabulate L(a_n + 1) against (n - 1) S^3 / 6")
    rep.add_argument("--n-max", type=int, required=True)
    rep.add_argument("--S", type=float, required=True, dest="S")
    rep.add_argument("--out", default=".", help="output directory (default: current)")
    rep.add_argument("--threads", type=_positive_int, default=1)
    return p


def _cmd_run(args, parser) -> int:
    if (args.file is None) == (args.scenario is None):
        parser.error("run needs exactly one of FILE or --scenario")
    scn = builtin_scenario(args.scenario) if args.scenario else load_scenario(args.file)
    scn = scn.with_threads(args.threads)
    out = Path(args.out)
    report = run_scenario(scn, out, seed=args.seed, record_timing=args.timing)
    for c in report["criteria"]:
        status = c.get("verdict", "holds" if c.get("holds") else "fails")
        print(f"{c['criterion']:<26} {status}")
    g = report["simulation"]["gronwall"]
    print(f"{'energy monotone':<26} {report['simulation']['energies_monotone']}")
    print(f"{'upper envelope':<26} {g['upper_ok']}")
    print(f"{'lower envelope':<26} {g['lower_ok']}")
    print(f"report: {out / scn.output.report}")
    return 0


def _cmd_reproduce(args) -> int:
    rows = intermittent_table(args.n_max, args.S, threads=args.threads)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "intermittent_example.csv"
    write_intermittent_csv(path, rows)
    worst = max(r["rel_err"] for r in rows)
    print(f"{len(rows)} rows, max rel_err {worst:.3g}: {path}")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            return _cmd_run(args, parser)
        return _cmd_reproduce(args)
    except GenPEError as exc:
        print(f"genpe: error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"genpe: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
