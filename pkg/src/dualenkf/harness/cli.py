"""Command-line entry point: ``dualenkf {simulate,filter,sweep,verify,report}``.

Exit codes: 0 success, 1 validation/parse error, 2 numerical failure,
3 I/O error.
"""

import argparse
import csv
import logging
import sys
from collections import defaultdict
from pathlib import Path

import numpy as np

from ..exceptions import FlooredError, InputError, NumericalError
from ..model import NoiseStreams, simulate_truth
from .experiment import convergence_study, run_experiment, sweep_gamma, verify_suite
from .records import read_records, write_records
from .scenario import load_scenario

EXIT_OK, EXIT_INPUT, EXIT_NUMERICAL, EXIT_IO = 0, 1, 2, 3

log = logging.getLogger("dualenkf")


def _output_path(args, scenario, default_suffix):
    if args.out:
        return Path(args.out)
    if scenario.output:
        return Path(scenario.output)
    return Path(args.scenario).with_suffix(default_suffix)


def _load(args):
    scenario = load_scenario(args.scenario)
    return scenario.with_overrides(seed=args.seed, replicates=args.replicates, format=args.format)


def cmd_simulate(args, say):
    scenario = _load(args)
    model = scenario.model
    traj = simulate_truth(model, scenario.horizon, NoiseStreams(scenario.seed, 0))
    path = _output_path(args, scenario, ".truth.csv")
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["t"] + [f"x{i}" for i in range(model.n)] + [f"z{j}" for j in range(model.m)])
        for t, x in enumerate(traj.states):
            z = traj.observations[t] if t < scenario.horizon else [""] * model.m
            writer.writerow([t] + [repr(float(v)) for v in x] + [v if v == "" else repr(float(v)) for v in z])
    say(f"wrote {scenario.horizon + 1} states to {path}")
    return EXIT_OK


def _report_failures(failures, say):
    for f in failures:
        say(f"FAILED {f.run_id} at step {f.step}: {f.kind}: {f.error}")


def cmd_filter(args, say):
    scenario = _load(args)
    res = run_experiment(scenario, variants=scenario.variants[:1], ensemble_sizes=scenario.ensemble_sizes[:1])
    path = write_records(res.records, _output_path(args, scenario, f".{scenario.format}"), scenario.format)
    _report_failures(res.failures, say)
    say(f"wrote {len(res.records)} records to {path}")
    return EXIT_OK if res.ok else EXIT_NUMERICAL


def cmd_sweep(args, say):
    scenario = _load(args)
    if scenario.grid:
        res = sweep_gamma(scenario)
        for g in res.infeasible:
            say(f"no C_t exists at gamma = ({g.gamma1:g}, {g.gamma2:g})")
    else:
        res = run_experiment(scenario)
    path = write_records(res.records, _output_path(args, scenario, f".{scenario.format}"), scenario.format)
    _report_failures(res.failures, say)
    say(f"wrote {len(res.records)} records to {path}")
    if len(scenario.ensemble_sizes) >= 3 and not scenario.grid:
        try:
            conv = convergence_study(scenario, scenario.ensemble_sizes)
            say(f"log-log slope of final mean error vs N: {conv.slope:+.3f}")
        except FlooredError as exc:
            say(f"no slope: {exc}")
        except InputError as exc:
            say(f"no slope: {exc}")
    return EXIT_OK if not res.failures else EXIT_NUMERICAL


def cmd_verify(args, say):
    scenario = _load(args)
    report = verify_suite(scenario)
    for line in report.lines():
        say(line)
    say("all checks passed" if report.passed else "some checks FAILED")
    return EXIT_OK if report.passed else EXIT_NUMERICAL


def cmd_report(args, say):
    path = Path(args.records)
    fmt = "jsonl" if path.suffix == ".jsonl" else "csv"
    records = read_records(path, fmt)
    final_t = defaultdict(int)
    for rec in records:
        final_t[rec.run_id] = max(final_t[rec.run_id], rec.t)
    groups = defaultdict(list)
    for rec in records:
        if rec.t == final_t[rec.run_id]:
            groups[(rec.variant, rec.N)].append(rec)
    say(f"{'variant':<40} {'N':>7} {'runs':>5} {'mean_err':>11} {'cov_err':>11} {'rmse_truth':>11}")
    for (variant, N), recs in sorted(groups.items()):
        me = np.mean([r.mean_err for r in recs])
        ce = np.mean([r.cov_err for r in recs])
        rt = np.mean([r.rmse_truth for r in recs])
        say(f"{variant:<40} {N:>7} {len(recs):>5} {me:>11.3e} {ce:>11.3e} {rt:>11.3e}")
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="dualenkf", description=__doc__.splitlines()[0])
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--scenario", required=True, help="scenario JSON file")
    common.add_argument("--out", help="output path (overrides the scenario)")
    common.add_argument("--format", choices=("csv", "jsonl"))
    common.add_argument("--seed", type=int)
    common.add_argument("--replicates", type=int)
    common.add_argument("--quiet", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("simulate", parents=[common], help="simulate the truth trajectory").set_defaults(func=cmd_simulate)
    sub.add_parser("filter", parents=[common], help="run one filter configuration").set_defaults(func=cmd_filter)
    sub.add_parser("sweep", parents=[common], help="run the gamma grid / ensemble-size list").set_defaults(func=cmd_sweep)
    sub.add_parser("verify", parents=[common], help="run the identity suite").set_defaults(func=cmd_verify)
    rep = sub.add_parser("report", help="summarise a records file")
    rep.add_argument("records")
    rep.add_argument("--quiet", action="store_true")
    rep.set_defaults(func=cmd_report)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.ERROR if args.quiet else logging.WARNING, format="%(levelname)s %(message)s")
    say = (lambda msg: None) if args.quiet else print
    for name in ("seed", "replicates"):
        value = getattr(args, name, None)
        if value is not None and value < (0 if name == "seed" else 1):
            print(f"error: --{name} out of range", file=sys.stderr)
            return EXIT_INPUT
    try:
        return args.func(args, say)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
