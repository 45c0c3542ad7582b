"""Command-line front end: verify, solve, sweep, project.

Every artifact embeds the resolved configuration and the seed, so any run
can be replayed exactly. Exit codes: 0 success, 1 error (including any
failing verify property or malformed input), 2 usage error or inconclusive
solve.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from dataclasses import replace

import numpy as np

from .config import ConfigError, RunConfig, default_config_text, parse_config
from .fieldio import FieldFormatError, read_field, write_field
from .nehari import NoRootError, project, thresholds
from .solver import sweep, two_solution_experiment
from .spaces import estimate_constants
from .verify import CSV_HEADER, run_verify_suite

__all__ = ["main"]

USAGE_ERROR = 2


def _json_dump(path, payload):
    with open(path, "w") as fh:
        json.dump(payload, fh, sort_keys=True, indent=2)
        fh.write("\n")


def _meta(rc: RunConfig, seed: int, threads: int):
    return {"config": rc.echo, "config_path": rc.path, "seed": seed, "threads": threads}


def _parse_faults(pairs):
    fault = {}
    for pair in pairs or []:
        if "=" not in pair:
            raise ConfigError(f"--fault-inject expects KEY=VAL, got {pair!r}")
        key, val = pair.split("=", 1)
        fault[key.strip()] = float(val)
    return fault


def _load_config(args) -> RunConfig:
    if args.config is None:
        import tempfile

        with tempfile.NamedTemporaryFile("w", suffix=".cfg", delete=False) as fh:
            fh.write(default_config_text())
            path = fh.name
        try:
            rc = parse_config(path)
        finally:
            os.unlink(path)
        rc.path = "<builtin defaults>"
        return rc
    return parse_config(args.config)


def cmd_verify(args) -> int:
    rc = _load_config(args)
    seed = rc.seed if args.seed is None else args.seed
    trials = args.trials if args.trials is not None else rc.verify_trials
    if trials < 1:
        print(f"error: verify needs a positive trial count, got {trials}", file=sys.stderr)
        return USAGE_ERROR
    fault = _parse_faults(args.fault_inject)
    rows, passed, consts = run_verify_suite(rc, seed=seed, trials=trials, fault=fault)
    os.makedirs(args.out, exist_ok=True)
    csv_path = os.path.join(args.out, "verify.csv")
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_HEADER)
        for row in rows:
            writer.writerow(row.to_csv_row())
    meta = _meta(rc, seed, args.threads)
    meta["trials"] = trials
    meta["fault_inject"] = fault
    meta["constants"] = consts.to_dict()
    meta["passed"] = passed
    _json_dump(os.path.join(args.out, "verify_meta.json"), meta)
    gating = [r for r in rows if r.gating]
    n_fail = sum(1 for r in gating if not r.passed)
    print(f"verify: {len(gating)} gating rows, {n_fail} failures -> {csv_path}")
    if not passed:
        first = next(r for r in gating if not r.passed)
        print(
            f"first failing row: {first.prop} seed={first.seed} lhs={first.lhs!r} "
            f"rhs={first.rhs!r} margin={first.margin!r}",
            file=sys.stderr,
        )
        return 1
    return 0


def _report_payload(rep, rc, seed, threads, field_name):
    payload = rep.to_dict()
    payload["field_file"] = field_name
    payload.update(_meta(rc, seed, threads))
    return payload


def cmd_solve(args) -> int:
    rc = _load_config(args)
    seed = rc.seed if args.seed is None else args.seed
    P = rc.build_instance()
    cfg = replace(rc.build_solver_config(), seed=seed)
    result = two_solution_experiment(P, cfg)
    os.makedirs(args.out, exist_ok=True)
    summary = {
        "status": result.status,
        "distinct": result.distinct,
        "separation": result.separation,
        "thresholds": result.thresholds.to_dict(),
        "warnings": list(result.warnings),
        "failures": list(result.failures),
        "lambda": P.lam,
    }
    summary.update(_meta(rc, seed, args.threads))
    for rep, tag in ((result.report_plus, "plus"), (result.report_minus, "minus")):
        if rep is None:
            continue
        field_name = f"u_{tag}.field"
        write_field(os.path.join(args.out, field_name), rep.u)
        _json_dump(
            os.path.join(args.out, f"report_{tag}.json"),
            _report_payload(rep, rc, seed, args.threads, field_name),
        )
    _json_dump(os.path.join(args.out, "experiment.json"), summary)
    print(f"solve: status={result.status} separation={result.separation:.3e} -> {args.out}")
    return result.exit_code


def cmd_sweep(args) -> int:
    rc = _load_config(args)
    seed = rc.seed if args.seed is None else args.seed
    P = rc.build_instance(lam=rc.lam if rc.lam is not None else 1.0)
    cfg = replace(rc.build_solver_config(), seed=seed)
    if rc.lambda_grid is not None:
        lambdas = list(rc.lambda_grid)
    elif rc.lambda_grid_auto is not None:
        consts = estimate_constants(
            P.exponents, P.weight, P.metric, trials=rc.constants_trials, seed=seed
        )
        thr = thresholds(P, consts)
        if thr.lambda_star_star <= 0:
            print("error: auto lambda grid needs a positive threshold", file=sys.stderr)
            return 1
        lambdas = list(
            np.geomspace(thr.lambda_star_star / 8.0, 2.0 * thr.lambda_star_star, rc.lambda_grid_auto)
        )
    else:
        print("error: sweep needs [problem] lambda_grid", file=sys.stderr)
        return USAGE_ERROR
    rows = sweep(P, lambdas, cfg)
    os.makedirs(args.out, exist_ok=True)
    csv_path = os.path.join(args.out, "sweep.csv")
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            [
                "lambda",
                "theta_plus_estimate",
                "theta_minus_estimate",
                "n_plus_found",
                "n_minus_found",
                "lambda_star",
                "lambda_star_star",
            ]
        )
        for row in rows:
            writer.writerow([repr(v) if isinstance(v, float) else v for v in row.to_csv_row()])
    meta = _meta(rc, seed, args.threads)
    meta["lambdas"] = [float(v) for v in lambdas]
    _json_dump(os.path.join(args.out, "sweep_meta.json"), meta)
    print(f"sweep: {len(rows)} rows -> {csv_path}")
    return 0


def cmd_project(args) -> int:
    rc = _load_config(args)
    seed = rc.seed if args.seed is None else args.seed
    P = rc.build_instance()
    u = read_field(args.field, P.chart)
    os.makedirs(args.out, exist_ok=True)
    payload = _meta(rc, seed, args.threads)
    payload["field_file"] = args.field
    try:
        result = project(P, u)
    except NoRootError as exc:
        payload["t_roots"] = []
        payload["classes"] = []
        payload["error"] = str(exc)
        _json_dump(os.path.join(args.out, "projection.json"), payload)
        print(f"project: no root ({exc})", file=sys.stderr)
        return 2
    payload["t_roots"] = list(result.t_roots)
    payload["classes"] = [c.value for c in result.classes]
    payload["phi_at_roots"] = list(result.phi_at_roots)
    payload["scale"] = result.scale
    names = []
    for k, t in enumerate(result.t_roots):
        name = f"projected_{k}.field"
        write_field(os.path.join(args.out, name), P.chart.field(t * u.values))
        names.append(name)
    payload["projected_fields"] = names
    _json_dump(os.path.join(args.out, "projection.json"), payload)
    print(
        "project: roots "
        + ", ".join(f"t={t:.12g} ({c.value})" for t, c in zip(result.t_roots, result.classes))
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="doublephase",
        description="Double-phase variable-exponent energies on periodic metric grids.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config_required):
        p.add_argument("--config", required=config_required, help="run configuration file")
        p.add_argument("--seed", type=int, default=None, help="master seed (overrides config)")
        p.add_argument("--out", default="out", help="output directory")
        p.add_argument(
            "--threads",
            type=int,
            default=1,
            help="recorded in artifacts; reductions use a fixed deterministic tree",
        )

    p_verify = sub.add_parser("verify", help="run the inequality property suite")
    common(p_verify, config_required=False)
    p_verify.add_argument("--trials", type=int, default=None, help="trial count (overrides config)")
    p_verify.add_argument(
        "--fault-inject",
        action="append",
        metavar="KEY=VAL",
        help="test-only constant overrides, e.g. holder_rq=0.5",
    )
    p_verify.set_defaults(func=cmd_verify)

    p_solve = sub.add_parser("solve", help="two-branch constrained minimization")
    common(p_solve, config_required=True)
    p_solve.set_defaults(func=cmd_solve)

    p_sweep = sub.add_parser("sweep", help="branch census over a lambda grid")
    common(p_sweep, config_required=True)
    p_sweep.set_defaults(func=cmd_sweep)

    p_project = sub.add_parser("project", help="project a stored field onto the constraint set")
    common(p_project, config_required=True)
    p_project.add_argument("--field", required=True, help="grid field file to project")
    p_project.set_defaults(func=cmd_project)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, FieldFormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
