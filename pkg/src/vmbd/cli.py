"""Command-line benchmark harness.

Exit codes: 0 success, 1 failed invariants (``verify``), 2 bad arguments,
3 integration failure.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from typing import Optional, Sequence

from .bench import run_method, write_csv, write_json
from .cases import CASES, build_case
from .errors import VmbdError
from .formulations import METHODS
from .integrate import IntegratorSettings

EXIT_OK, EXIT_FAILED, EXIT_USAGE, EXIT_INTEGRATION = 0, 1, 2, 3

_CONFIG_KEYS = {
    "tf": "t_final",
    "sample": "sample_step",
    "rtol": "rtol",
    "atol": "atol",
    "max_step": "max_step",
    "integrator": "method",
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _settings_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--tf", type=float, help="final time in seconds")
    p.add_argument("--sample", type=float, help="output sampling step in seconds")
    p.add_argument("--rtol", type=float)
    p.add_argument("--atol", type=float)
    p.add_argument("--max-step", dest="max_step", type=float)
    p.add_argument("--integrator", choices=("adaptive", "fixed"))
    p.add_argument("--config", help="JSON file with any of: " + ", ".join(_CONFIG_KEYS))


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="vmbd", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    run = sub.add_parser("run", help="integrate one case with one method")
    run.add_argument("--case", required=True, choices=tuple(CASES))
    run.add_argument("--method", required=True, choices=METHODS)
    _settings_args(run)
    run.add_argument("--out", help="trajectory CSV path")
    run.add_argument("--report", help="MethodReport JSON path")

    cmp_ = sub.add_parser("compare", help="run all four methods on one case")
    cmp_.add_argument("--case", required=True, choices=tuple(CASES))
    _settings_args(cmp_)
    cmp_.add_argument("--out-dir", default=".", help="directory for the table and per-method CSVs")
    cmp_.add_argument("--seedless", action="store_true", help="accepted for scripting; the pipeline has no randomness")

    ver = sub.add_parser("verify", help="run the invariant suites")
    ver.add_argument("--case", choices=tuple(CASES), help="restrict to one case")
    ver.add_argument("--perturb-constraint", action="store_true", help="negative control: corrupt the kinematic constraint")
    ver.add_argument("--fd-order", action="store_true", help="only report the finite-difference convergence order")
    return parser


def resolve_settings(case_id: str, args: argparse.Namespace) -> IntegratorSettings:
    """Flags override the JSON config, which overrides the case defaults."""
    base = build_case(case_id).settings
    changes = {}
    if getattr(args, "config", None):
        with open(args.config, encoding="utf-8") as fh:
            cfg = json.load(fh)
        if not isinstance(cfg, dict):
            raise ValueError("config file must hold a JSON object")
        unknown = set(cfg) - set(_CONFIG_KEYS)
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        changes.update({_CONFIG_KEYS[k]: v for k, v in cfg.items()})
    for flag, field in _CONFIG_KEYS.items():
        value = getattr(args, flag, None)
        if value is not None:
            changes[field] = value
    return base.replace(**changes)


def _run_one(case_id: str, method: str, settings: IntegratorSettings):
    # Workers rebuild the case: closures inside it do not pickle.
    return run_method(build_case(case_id), method, settings)


def _integration_failure(exc: VmbdError) -> int:
    print(f"integration failed: {type(exc).__name__}: {exc}", file=sys.stderr)
    return EXIT_INTEGRATION


def cmd_run(args) -> int:
    settings = resolve_settings(args.case, args)
    try:
        result = _run_one(args.case, args.method, settings)
    except VmbdError as exc:
        return _integration_failure(exc)
    if args.out:
        write_csv(result, args.out)
    if args.report:
        write_json(result.report.to_dict(), args.report)
    rep = result.report
    print(
        f"{rep.case}/{rep.method}: states={rep.n_states} equations={rep.n_equations} "
        f"wall={rep.wall_seconds:.3f}s samples={result.trajectory.times.size}"
    )
    return EXIT_OK


def _workers() -> int:
    raw = os.environ.get("VMBD_THREADS")
    limit = len(METHODS)
    if raw:
        try:
            limit = max(1, min(limit, int(raw)))
        except ValueError:
            raise ValueError(f"VMBD_THREADS must be an integer, got {raw!r}") from None
    return min(limit, os.cpu_count() or 1)


def cmd_compare(args) -> int:
    settings = resolve_settings(args.case, args)
    workers = _workers()
    try:
        if workers == 1:
            results = [_run_one(args.case, m, settings) for m in METHODS]
        else:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                futures = [pool.submit(_run_one, args.case, m, settings) for m in METHODS]
                results = [f.result() for f in futures]
    except VmbdError as exc:
        return _integration_failure(exc)
    os.makedirs(args.out_dir, exist_ok=True)
    rows = []
    for res in results:
        write_csv(res, os.path.join(args.out_dir, f"{args.case}_{res.method}.csv"))
        rows.append(res.report.to_dict())
    write_json({"case": args.case, "rows": rows}, os.path.join(args.out_dir, f"{args.case}_compare.json"))
    print(f"{'method':18s} {'states':>6s} {'eqs':>4s} {'wall[s]':>8s} {'energy':>10s} {'kin':>10s} {'dyn':>10s} {'momentum':>10s}")
    for row in rows:
        n = row["norms"]
        print(
            f"{row['method']:18s} {row['n_states']:6d} {row['n_equations']:4d} {row['wall_seconds']:8.2f} "
            f"{n['energy_drift']['rel_max_abs']:10.2e} {n['kinematic_residual']['max_abs']:10.2e} "
            f"{n['dynamical_residual']['max_abs']:10.2e} {n['momentum_drift']['max_abs']:10.2e}"
        )
    return EXIT_OK


def cmd_verify(args) -> int:
    from .verify import fd_order, run_checks

    if args.fd_order:
        order = fd_order()
        print(f"observed finite-difference convergence order: {order:.2f}")
        return EXIT_OK if order >= 2 else EXIT_FAILED
    cases = [args.case] if args.case else list(CASES)
    outcomes = run_checks(cases, perturb_constraint=args.perturb_constraint)
    failed = [o for o in outcomes if not o.passed]
    for o in outcomes:
        print(f"[{'PASS' if o.passed else 'FAIL'}] {o.name}: {o.detail}")
    if failed:
        print("failed invariants: " + ", ".join(o.name for o in failed))
        return EXIT_FAILED
    print(f"all {len(outcomes)} invariant checks passed")
    return EXIT_OK


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handler = {"run": cmd_run, "compare": cmd_compare, "verify": cmd_verify}[args.command]
    try:
        return handler(args)
    except (ValueError, OSError) as exc:
        print(f"vmbd: error: {exc}", file=sys.stderr)
        return EXIT_USAGE

