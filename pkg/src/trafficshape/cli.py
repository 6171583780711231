"""Probe, solve, compare and check traffic-shaping experiments from the shell.

Exit codes: 0 success, 2 input error, 3 internal invariant failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import pipeline
from .model import ContractError
from .oracle import OracleBudgetExceeded, certify, deterministic_grid_optimum, mixture_optimum
from .scenario import ScenarioError, load_experiment

EXIT_OK, EXIT_INPUT, EXIT_INTERNAL = 0, 2, 3


class InputError(Exception):
    pass


def parse_seeds(text: str) -> list[int]:
    """``"0,3,5"`` or ``"0-19"`` (inclusive) or a mix of both."""
    seeds = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if "-" in part:
            a, b = part.split("-", 1)
            seeds.extend(range(int(a), int(b) + 1))
        else:
            seeds.append(int(part))
    if not seeds:
        raise argparse.ArgumentTypeError("seeds must be non-empty")
    return seeds


def _load_probe(args, exp):
    path = Path(args.probe) if args.probe else Path(args.out) / "probe.json"
    if not path.is_file():
        raise InputError(f"PROBE_NOT_FOUND: {path}")
    try:
        table = pipeline.read_probe(path)
    except (ValueError, KeyError) as exc:
        raise InputError(f"BAD_PROBE: {exc}") from None
    sc = exp.scenario
    if (table.n_groups, table.n_sets) != (sc.n_groups, sc.n_sets):
        raise InputError(f"SHAPE_MISMATCH: probe is {table.n_groups}x{table.n_sets}, "
                         f"scenario is {sc.n_groups}x{sc.n_sets}")
    return table


def cmd_probe(args) -> int:
    exp = load_experiment(args.scenario)
    table = pipeline.probe(exp, args.mode, args.sessions, args.seed, args.workers)
    c, j = pipeline.write_probe(table, exp.scenario, Path(args.out))
    print(f"wrote {c} and {j}")
    return EXIT_OK


def cmd_solve(args) -> int:
    exp = load_experiment(args.scenario)
    table = _load_probe(args, exp)
    outcome = pipeline.run_protocol(table, exp.scenario)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "policy.json").write_text(outcome.policy.to_json())
    try:
        report = certify(outcome.policy, table, exp.scenario)
        (out / "theorem.json").write_text(report.to_json())
    except OracleBudgetExceeded as exc:
        print(f"warning: certification skipped: {exc}", file=sys.stderr)
        report = None
    print(pipeline.summary_line(outcome, report, exp.scenario))
    return EXIT_OK


def cmd_compare(args) -> int:
    exp = load_experiment(args.scenario)
    if args.horizon is not None:
        exp = exp.with_horizon(args.horizon)
    cmp = pipeline.compare(exp, args.seeds, args.mode, args.sessions, args.seed,
                           args.redraw, args.workers)
    a, b = pipeline.write_compare(cmp, Path(args.out))
    sys.stdout.write(cmp.summary_csv())
    print(f"wrote {a} and {b}")
    return EXIT_OK


def cmd_oracle(args) -> int:
    exp = load_experiment(args.scenario)
    table = _load_probe(args, exp) if args.probe else pipeline.probe(
        exp, args.mode, args.sessions, args.seed, args.workers)
    try:
        opt = mixture_optimum(table, exp.scenario)
        det = deterministic_grid_optimum(table, exp.scenario)
    except OracleBudgetExceeded as exc:
        print(f"OracleBudgetExceeded: {exc}", file=sys.stderr)
        return EXIT_INPUT
    sc = exp.scenario
    print(json.dumps({
        "mixture_optimum": opt.value if opt.all_feasible else None,
        "feasible": dict(zip(sc.set_ids, opt.feasible)),
        "deterministic_optimum": det if det > float("-inf") else None,
        "witness": [{"group": sc.group_ids[i], "set": sc.set_ids[j],
                     "mixture": [{"bonus": b, "p": p} for b, p in mix]}
                    for (i, j), mix in sorted(opt.witness.items())],
    }, indent=2))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="trafficshape", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, mode_default="exact"):
        sp.add_argument("--scenario", required=True, help="scenario JSON file")
        sp.add_argument("--out", default=".", help="output directory")
        sp.add_argument("--mode", choices=("exact", "mc"), default=mode_default)
        sp.add_argument("--sessions", type=int, default=2000, help="sessions per probe point (mc)")
        sp.add_argument("--seed", type=int, default=0, help="probe seed")
        sp.add_argument("--workers", type=int, default=1)

    sp = sub.add_parser("probe", help="probe the response table on the bonus grid")
    common(sp, "mc")
    sp.set_defaults(func=cmd_probe)

    sp = sub.add_parser("solve", help="build the policy from a probe table and certify it")
    common(sp)
    sp.add_argument("--probe", help="probe JSON (default: OUT/probe.json)")
    sp.set_defaults(func=cmd_solve)

    sp = sub.add_parser("compare", help="no-shaping vs PID+bandit vs protocol over seeds")
    common(sp)
    sp.add_argument("--seeds", type=parse_seeds, default=parse_seeds("0-19"))
    sp.add_argument("--horizon", type=int, help="override horizon_sessions")
    sp.add_argument("--redraw", choices=("episode", "session"), default="session")
    sp.set_defaults(func=cmd_compare)

    sp = sub.add_parser("oracle", help="brute-force grid optimum of a probe table")
    common(sp)
    sp.add_argument("--probe", help="probe JSON (default: probe the scenario)")
    sp.set_defaults(func=cmd_oracle)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ScenarioError as exc:
        for v in exc.violations:
            print(str(v), file=sys.stderr)
        return EXIT_INPUT
    except InputError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_INPUT
    except (ContractError, AssertionError) as exc:
        print(f"internal invariant failure: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
