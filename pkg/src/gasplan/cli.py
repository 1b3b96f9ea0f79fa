"""``gasplan`` command line: train, plan, expand, validate.

Exit codes: 0 success, 1 bad input or rejected option, 2 training diverged,
3 MIP infeasible, 4 restoration failed.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

from .formulation import FormulationError
from .icnn import MAX_HIDDEN, TrainConfig, TrainingDivergedError
from .network import NetworkError, load_problem
from .physics import FlowState, residuals
from .pipeline import (
    DYN_TARGETS,
    build_model,
    format_table,
    load_nets,
    run_plan,
    save_nets,
    train_nets,
)
from .solver import BnbConfig, export_mps

EXIT_OK, EXIT_INPUT, EXIT_DIVERGED, EXIT_INFEASIBLE, EXIT_RESTORE = 0, 1, 2, 3, 4


class _Fail(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


def _cap(text: str) -> float:
    if text.lower() in ("inf", "none", "unbounded"):
        return math.inf
    value = float(text)
    if not value > 0:
        raise argparse.ArgumentTypeError("cap must be positive or 'inf'")
    return value


def _neurons(text: str) -> int:
    value = int(text)
    if not 1 <= value <= MAX_HIDDEN:
        raise argparse.ArgumentTypeError(f"hidden size must be between 1 and {MAX_HIDDEN}")
    return value


def _load(path, mode=None):
    try:
        problem = load_problem(path)
    except (NetworkError, OSError) as exc:
        raise _Fail(EXIT_INPUT, f"load: {exc}") from None
    return problem.with_mode(mode) if mode else problem


def cmd_train(args) -> int:
    problem = _load(args.network, args.mode)
    cfg = TrainConfig(hidden=args.neurons, epochs=args.epochs, seed=args.seed)
    try:
        nets = train_nets(problem, cfg, problem.mode)
    except TrainingDivergedError as exc:
        raise _Fail(EXIT_DIVERGED, f"train: {exc}") from None
    for path in save_nets(nets, args.out):
        print(path)
    return EXIT_OK


def _plan(args, problem) -> int:
    nets = None
    if args.formulation == "icnn":
        if not args.nets:
            raise _Fail(EXIT_INPUT, "plan: the icnn formulation needs --nets")
        try:
            nets = load_nets(args.nets)
        except (OSError, ValueError, KeyError) as exc:
            raise _Fail(EXIT_INPUT, f"nets: {exc}") from None
        if problem.mode == "expansion" and not any(n.metadata.get("target") in DYN_TARGETS for n in nets):
            raise _Fail(EXIT_INPUT, "expand: no two-input (dyn) nets found; train with --mode expansion")
    try:
        if args.mps:
            export_mps(build_model(problem, args.formulation, nets), args.mps)
        report = run_plan(problem, args.formulation, nets, restore=args.restore, cfg=BnbConfig.from_env())
    except FormulationError as exc:
        raise _Fail(EXIT_INPUT, f"compile: {exc}") from None

    print(format_table([report]))
    if args.report:
        path = Path(args.report)
        path.write_text(report.to_json() + "\n")
        path.with_suffix(".txt").write_text(format_table([report]) + "\n")
    if report.mip_objective is None:
        raise _Fail(EXIT_INFEASIBLE, f"solve: no feasible point found (status {report.status})")
    if args.restore and not report.restored:
        raise _Fail(EXIT_RESTORE, f"restore: {report.restoration_error}")
    return EXIT_OK


def cmd_plan(args) -> int:
    problem = _load(args.network, args.mode).with_cap(args.cap)
    if args.formulation == "miqp" and problem.mode == "expansion":
        raise _Fail(EXIT_INPUT, "plan: the miqp relaxation has no expansion variant (diameter-dependent flow law)")
    return _plan(args, problem)


def cmd_expand(args) -> int:
    problem = _load(args.network, "expansion").with_cap(args.cap)
    args.formulation = "icnn"
    return _plan(args, problem)


def cmd_validate(args) -> int:
    problem = _load(args.network)
    try:
        state = FlowState.from_dict(json.loads(Path(args.state).read_text()))
        report = residuals(problem.network, state, problem)
    except (OSError, KeyError, ValueError) as exc:
        raise _Fail(EXIT_INPUT, f"validate: {exc}") from None
    rows = [
        ("mass balance residual", f"{report.mass_balance_residual_inf:.3e}"),
        ("weymouth residual", f"{report.weymouth_residual_inf:.3e}"),
        ("bound violation", f"{report.bound_violation_inf:.3e}"),
        ("emission [kt]", f"{report.emission_total:.6g}"),
        ("cost", f"{report.cost_total:.6g}"),
    ]
    width = max(len(k) for k, _ in rows)
    for key, value in rows:
        print(f"{key.ljust(width)}  {value}")
    return EXIT_OK if report.feasible(1e-6) else EXIT_INPUT


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gasplan", description="Emission-aware gas network planning with ICNN surrogates.")
    sub = parser.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", help="train convex/concave surrogate nets for a network")
    t.add_argument("--network", required=True)
    t.add_argument("--out", required=True, help="directory for the net documents")
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--neurons", type=_neurons, default=MAX_HIDDEN)
    t.add_argument("--epochs", type=int, default=TrainConfig().epochs)
    t.add_argument("--mode", choices=("operational", "expansion"))
    t.set_defaults(func=cmd_train)

    def planning(p, with_formulation):
        p.add_argument("--network", required=True)
        p.add_argument("--nets", nargs="*", default=[], help="net files or directories")
        if with_formulation:
            p.add_argument("--formulation", choices=("icnn", "miqp"), default="icnn")
            p.add_argument("--mode", choices=("operational", "expansion"))
        p.add_argument("--cap", type=_cap, default=math.inf, help="emission cap in kt, or 'inf'")
        p.add_argument("--restore", action="store_true", help="run Newton restoration on the MIP point")
        p.add_argument("--report", help="write the JSON report here (and an aligned .txt table beside it)")
        p.add_argument("--mps", help="also export the MILP in fixed MPS format")

    p = sub.add_parser("plan", help="operational (or expansion) planning run")
    planning(p, True)
    p.set_defaults(func=cmd_plan)

    e = sub.add_parser("expand", help="expansion planning run (icnn with two-input nets)")
    planning(e, False)
    e.set_defaults(func=cmd_expand)

    v = sub.add_parser("validate", help="score a state file against the exact physics")
    v.add_argument("--network", required=True)
    v.add_argument("--state", required=True)
    v.set_defaults(func=cmd_validate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    try:
        return args.func(args)
    except _Fail as exc:
        print(f"gasplan: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
