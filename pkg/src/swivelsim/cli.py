"""Command-line interface: simulate / analyze / sweep.

Exit codes: 0 success, 2 scenario (input) error, 3 runtime divergence or
failed analysis.
"""
from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from .errors import NonHyperbolic, ParseError, UnknownParameter
from .scenario import load_scenario
from .sim import run_scenario, sweep, sweep_csv, write_metrics, write_telemetry
from .stability import check_gain_rules, classify_equilibria

_EQUILIBRIUM_LABELS = ("identity", "half_turn_v1", "half_turn_v2",
                       "half_turn_v3")


def _cmd_simulate(args) -> int:
    sc = load_scenario(args.scenario)
    result = run_scenario(sc, seed=args.seed)
    os.makedirs(args.out, exist_ok=True)
    write_telemetry(result.records, os.path.join(args.out, "telemetry.csv"))
    write_metrics(result.metrics, os.path.join(args.out, "metrics.json"))
    m = result.metrics
    print(f"status: {m.status}")
    if m.halted_at is not None:
        print(f"halted at t = {m.halted_at:.3f} s", file=sys.stderr)
    print(f"settling time: "
          f"{'n/a' if m.settling_time is None else f'{m.settling_time:.3f} s'}")
    print(f"peak motor command (after {0.1:.1f} s): {m.peak_motor_cmd:.3f} N")
    print(f"saturation duty: {100 * m.saturation_duty:.2f} %")
    print(f"final psi: {m.final_psi:.3e}")
    print(f"wrote {args.out}/telemetry.csv, {args.out}/metrics.json "
          f"({result.wall_time:.2f} s wall)")
    return 0 if m.status == "ok" else 3


def _cmd_analyze(args) -> int:
    sc = load_scenario(args.scenario)
    gains = sc.control_gains()
    J = sc.vehicle_params().nominal_inertia
    rules = check_gain_rules(gains, J)
    try:
        reports = classify_equilibria(gains, J)
    except NonHyperbolic as exc:
        print(f"equilibrium analysis failed: {exc}", file=sys.stderr)
        return 3

    os.makedirs(args.out, exist_ok=True)
    csv_path = os.path.join(args.out, "equilibria.csv")
    with open(csv_path, "w", encoding="utf-8") as fh:
        fh.write("equilibrium,classification,n_stable,eig_index,real,imag\n")
        for label, rep in zip(_EQUILIBRIUM_LABELS, reports):
            order = np.argsort(rep.eigenvalues.real)
            for i, idx in enumerate(order):
                lam = rep.eigenvalues[idx]
                fh.write(f"{label},{rep.classification},{rep.n_stable},"
                         f"{i},{lam.real!r},{lam.imag!r}\n")

    report_lines = ["gain selection rules:", rules.summary(), "",
                    "equilibria:"]
    for label, rep in zip(_EQUILIBRIUM_LABELS, reports):
        slowest = np.max(rep.eigenvalues.real)
        report_lines.append(
            f"  {label}: {rep.classification} "
            f"({rep.n_stable}/12 stable eigenvalues, "
            f"max Re = {slowest:.3f})")
    report = "\n".join(report_lines)
    with open(os.path.join(args.out, "gain_rules.txt"), "w",
              encoding="utf-8") as fh:
        fh.write(report + "\n")
    print(report)
    print(f"wrote {csv_path}")
    return 0 if rules.all_ok else 3


def _cmd_sweep(args) -> int:
    sc = load_scenario(args.scenario)
    try:
        values = [float(v) for v in args.values.split(",") if v != ""]
    except ValueError:
        print(f"could not parse --values {args.values!r}", file=sys.stderr)
        return 2
    rows = sweep(sc, args.param, values)
    text = sweep_csv(rows)
    if args.out is not None:
        os.makedirs(args.out, exist_ok=True)
        path = os.path.join(args.out, "sweep.csv")
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
        print(f"wrote {path}", file=sys.stderr)
    sys.stdout.write(text)
    return 0 if all(r.metrics.status == "ok" for r in rows) else 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="swivelsim",
        description="Swiveling biplane quadrotor attitude simulation")
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="run a closed-loop scenario")
    p_sim.add_argument("scenario", help="scenario YAML file")
    p_sim.add_argument("--out", default="out", help="output directory")
    p_sim.add_argument("--seed", type=int, default=None,
                       help="override the scenario RNG seed")
    p_sim.set_defaults(func=_cmd_simulate)

    p_an = sub.add_parser("analyze",
                          help="equilibrium/gain analysis for a scenario")
    p_an.add_argument("scenario", help="scenario YAML file")
    p_an.add_argument("--out", default="out", help="output directory")
    p_an.set_defaults(func=_cmd_analyze)

    p_sw = sub.add_parser("sweep", help="run a scalar parameter sweep")
    p_sw.add_argument("scenario", help="scenario YAML file")
    p_sw.add_argument("--param", required=True,
                      help="dotted scenario field, e.g. gains.k_R")
    p_sw.add_argument("--values", required=True,
                      help="comma-separated values")
    p_sw.add_argument("--out", default=None, help="output directory")
    p_sw.set_defaults(func=_cmd_sweep)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ParseError, UnknownParameter) as exc:
        print(f"scenario error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
