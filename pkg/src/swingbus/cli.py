"""Command-line workflows: powerflow, simulate, sample, topology, nn-check.

Exit codes: 0 success, 1 computational non-convergence (results still
written), 2 usage or validation errors. All numeric output uses repr
formatting, so identical flags produce byte-identical files.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys

import numpy as np

from . import api
from .errors import EngineError


def _fmt(x) -> str:
    return repr(float(x))


def parse_fault(text: str):
    """`from-to[#c],location,t_on,t_clear` -> fault tuple."""
    head, lam, t_on, t_clear = text.split(",")
    circuit = None
    if "#" in head:
        head, circuit_s = head.split("#")
        circuit = int(circuit_s)
    from_bus, to_bus = (int(v) for v in head.split("-"))
    return (from_bus, to_bus, circuit, float(lam), float(t_on),
            float(t_clear))


def apply_overrides(session, overrides):
    """`kind.index.field=value` assignments through the parameter API."""
    for text in overrides or []:
        target, _, raw = text.partition("=")
        if not _:
            raise EngineError(f"override {text!r} needs key=value form")
        try:
            kind, index, field = target.split(".")
        except ValueError:
            raise EngineError(
                f"override key {target!r} must be kind.index.field") from None
        current = api.get_parameter(session, kind, int(index), field)
        if isinstance(current, bool):
            value = raw.lower() in ("1", "true", "yes", "on")
        elif isinstance(current, (int, float)):
            value = float(raw)
        else:
            value = raw
        api.set_parameter(session, kind, int(index), field, value)


def _write_json(path, doc):
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
        fh.write("\n")


def cmd_powerflow(args) -> int:
    session = api.load_case(args.case)
    apply_overrides(session, args.override)
    summary = api.solve_power_flow(session)
    vm, va = api.bus_voltages(session)
    gen_p, gen_q = api.generator_output(session)
    doc = {
        "converged": summary["converged"],
        "iterations": summary["iterations"],
        "max_mismatch": summary["max_mismatch"],
        "pv_pq_switches": [
            {"bus": b, "iteration": i, "direction": d}
            for (b, i, d) in summary["pv_pq_switches"]
        ],
        "buses": [
            {"id": bus.id, "vm": vm[i], "va": va[i]}
            for i, bus in enumerate(session.case.buses)
        ],
        "generators": [
            {"bus": g.bus, "p": gen_p[i], "q": gen_q[i]}
            for i, g in enumerate(session.case.generators)
        ],
    }
    os.makedirs(args.output_dir, exist_ok=True)
    _write_json(os.path.join(args.output_dir, "powerflow.json"), doc)
    return 0 if summary["converged"] else 1


def cmd_simulate(args) -> int:
    session = api.load_case(args.case)
    apply_overrides(session, args.override)
    pf = api.solve_power_flow(session)
    os.makedirs(args.output_dir, exist_ok=True)
    if not pf["converged"]:
        _write_json(os.path.join(args.output_dir, "summary.json"),
                    {"error": "power flow did not converge", **pf})
        return 1

    fault = None
    if args.fault:
        f, t, circuit, lam, t_on, t_clear = parse_fault(args.fault)
        branch = api.find_branch(session, f, t, circuit)
        fault = (branch, lam, t_on, t_clear)
    summary = api.run_simulation(session, fault, step=args.step,
                                 horizon=args.horizon)

    time = api.time_axis(session)
    delta = api.result_column(session, "rotor_angles")
    omega = api.result_column(session, "rotor_speeds")
    vm = api.result_column(session, "bus_voltage_magnitudes")
    gen_buses = session.sim_result.gen_buses
    bus_ids = [b.id for b in session.case.buses]
    with open(os.path.join(args.output_dir, "trajectory.csv"), "w",
              newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t"]
                   + [f"delta_{b}" for b in gen_buses]
                   + [f"omega_{b}" for b in gen_buses]
                   + [f"vm_{b}" for b in bus_ids])
        for k in range(time.shape[0]):
            w.writerow([_fmt(time[k])]
                       + [_fmt(v) for v in delta[k]]
                       + [_fmt(v) for v in omega[k]]
                       + [_fmt(v) for v in vm[k]])
    _write_json(os.path.join(args.output_dir, "summary.json"), {
        "label": summary["label"],
        "max_separation_deg": summary["max_separation_deg"],
        "steps": summary["steps"],
        "inner_iterations_max": summary["inner_iterations_max"],
        "inner_iterations_total": summary["inner_iterations_total"],
        "power_flow": pf,
    })
    return 0


def cmd_sample(args) -> int:
    session = api.load_case(args.case)
    apply_overrides(session, args.override)
    manifest = api.generate_dataset(
        session, count=args.n,
        contingencies_per_point=args.contingencies,
        seed=args.seed, workers=args.workers, out_dir=args.output_dir,
        step=args.step, horizon=args.horizon,
        gen_band=tuple(float(v) for v in args.gen_band.split(",")))
    print(json.dumps({"n_saved": manifest["n_saved"],
                      "n_failed": manifest["n_failed"],
                      "label_counts": manifest["label_counts"]},
                     sort_keys=True))
    return 0


def cmd_topology(args) -> int:
    session = api.load_case(args.case)
    apply_overrides(session, args.override)
    api.solve_power_flow(session)
    os.makedirs(args.output_dir, exist_ok=True)
    if args.fault:
        f, t, circuit, lam, t_on, t_clear = parse_fault(args.fault)
        branch = api.find_branch(session, f, t, circuit)
        snaps = api.topology_snapshots(session, (branch, lam, t_on, t_clear))
    else:
        y0 = api.query_solution(session, "y0")
        rows, cols, re, im = y0.to_triplets()
        snaps = {"y0": {"dimension": y0.n, "rows": rows, "cols": cols,
                        "re": re, "im": im}}
    for name, snap in snaps.items():
        if args.output_format == "csv":
            path = os.path.join(args.output_dir, f"{name}.csv")
            with open(path, "w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(["row", "col", "re", "im"])
                for r, c, re_v, im_v in zip(snap["rows"], snap["cols"],
                                            snap["re"], snap["im"]):
                    w.writerow([int(r), int(c), _fmt(re_v), _fmt(im_v)])
        else:
            path = os.path.join(args.output_dir, f"{name}.json")
            _write_json(path, {
                "dimension": snap["dimension"],
                "triplets": [
                    [int(r), int(c), float(re_v), float(im_v)]
                    for r, c, re_v, im_v in zip(snap["rows"], snap["cols"],
                                                snap["re"], snap["im"])
                ],
            })
    return 0


def cmd_nn_check(args) -> int:
    x = np.array([float(v) for v in args.input.split(",")]) \
        if args.input else np.zeros(0)
    out = api.nn_forward(args.spec, args.blob, x)
    print(json.dumps({"output": [float(v) for v in out]}))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="swingbus",
        description="Transient stability engine: power flow, simulation, "
                    "sampling, topology export, network checks.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--case", required=True, help="case JSON file")
        sp.add_argument("--output-dir", default=".", help="output directory")
        sp.add_argument("--output-format", choices=("csv", "json"),
                        default="csv")
        sp.add_argument("--override", action="append", metavar="K=V",
                        help="kind.index.field=value parameter override")
        sp.add_argument("--json-errors", action="store_true",
                        help="machine-readable errors on stderr")

    sp = sub.add_parser("powerflow", help="solve the AC power flow")
    common(sp)
    sp.set_defaults(fn=cmd_powerflow)

    sp = sub.add_parser("simulate", help="run a transient simulation")
    common(sp)
    sp.add_argument("--fault", help="from-to[#c],location,t_on,t_clear")
    sp.add_argument("--step", type=float, default=0.01)
    sp.add_argument("--horizon", type=float, default=10.0)
    sp.set_defaults(fn=cmd_simulate)

    sp = sub.add_parser("sample", help="generate a sampled dataset")
    common(sp)
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--contingencies", type=int, default=1)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--workers", type=int, default=1)
    sp.add_argument("--step", type=float, default=0.01)
    sp.add_argument("--horizon", type=float, default=10.0)
    sp.add_argument("--gen-band", default="0.9,1.1",
                    help="generator dispatch band around base, lo,hi")
    sp.set_defaults(fn=cmd_sample)

    sp = sub.add_parser("topology", help="export admittance snapshots")
    common(sp)
    sp.add_argument("--fault", help="from-to[#c],location,t_on,t_clear")
    sp.set_defaults(fn=cmd_topology)

    sp = sub.add_parser("nn-check", help="validate a network spec/blob pair")
    sp.add_argument("--spec", required=True)
    sp.add_argument("--blob", required=True)
    sp.add_argument("--input", help="comma-separated input vector")
    sp.add_argument("--json-errors", action="store_true")
    sp.set_defaults(fn=cmd_nn_check)

    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code not in (0, None) else 0
    try:
        return args.fn(args)
    except EngineError as exc:
        if getattr(args, "json_errors", False):
            print(json.dumps({"error": type(exc).__name__,
                              "message": str(exc)}), file=sys.stderr)
        else:
            print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
