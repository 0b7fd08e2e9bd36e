"""Command-line driver: ``ephs check|flatten|simulate|diagram``."""
from __future__ import annotations

import argparse
import sys
from typing import Optional, Sequence

from .components import DEFAULT_BOUNDS, IrreversibleComponent, ReversibleComponent, validate_component
from .expr import ExprError
from .modelfile import Model, ModelError, load_model
from .patterns import display, to_dot
from .systems import (
    NonFiniteState,
    NotSimulable,
    assemble,
    audit,
    check_wellformed,
    equation_listing,
    flatten,
    simulate,
)

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


def _load(path: str) -> Model:
    with open(path, encoding="utf-8") as fh:
        return load_model(fh.read())


def _system(model: Model, name: str):
    if name not in model.systems and name not in model.components:
        raise ModelError(f"unknown system '{name}'")
    return model.system(name)


def cmd_check(args, out) -> int:
    model = _load(args.file)
    failed = 0
    validated = 0
    for name, comp in model.components.items():
        report = validate_component(comp, model.env, samples=args.samples, seed=args.seed, name=name)
        if isinstance(comp, (ReversibleComponent, IrreversibleComponent)):
            validated += 1
        if not report.ok:
            failed += 1
        for line in report.lines() if not report.ok else []:
            print(line, file=out)
    for name, sys_ in model.systems.items():
        report = check_wellformed(flatten(sys_))
        for issue in report.issues:
            print(f"system {name}: {issue}", file=out)
        if not report.ok:
            failed += 1
    if failed:
        print(f"{failed} check(s) failed", file=out)
        return EXIT_FAIL
    print(f"{validated} components validated", file=out)
    return EXIT_OK


def cmd_flatten(args, out) -> int:
    model = _load(args.file)
    flat = flatten(_system(model, args.system))
    print("components:", file=out)
    for name, comp in flat.components.items():
        print(f"  {name} : {comp.kind}", file=out)
    print("junctions:", file=out)
    for j in flat.junctions:
        print("  {" + ", ".join(display(p) for p in sorted(j)) + "}", file=out)
    print("equations:", file=out)
    for line in equation_listing(flat, model.env):
        print(f"  {line}", file=out)
    for issue in check_wellformed(flat).issues:
        print(issue, file=out)
    return EXIT_OK


def cmd_simulate(args, out) -> int:
    model = _load(args.file)
    configs = [s for s in model.simulations.values() if s.system == args.system]
    if args.config:
        configs = [s for s in configs if s.name == args.config]
        if not configs:
            raise ModelError(f"no simulation configuration '{args.config}' for system '{args.system}'")
    if not configs:
        raise ModelError(f"no simulation configuration for system '{args.system}'")
    if len(configs) > 1:
        raise ModelError("several configurations exist; pick one with --config: " + ", ".join(c.name for c in configs))
    cfg = configs[0]
    flat = flatten(_system(model, args.system))
    model_ = assemble(flat, model.env, dict(cfg.inputs))
    traj = simulate(model_, cfg.t_end, cfg.dt, dict(cfg.init))
    if args.out:
        traj.to_csv(args.out)
        for line in audit(model_, traj).lines():
            print(line, file=out)
    else:
        out.write(traj.to_csv())
    return EXIT_OK


def cmd_diagram(args, out) -> int:
    model = _load(args.file)
    if args.pattern not in model.patterns:
        raise ModelError(f"unknown pattern '{args.pattern}'")
    dot = to_dot(model.patterns[args.pattern], args.pattern)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(dot)
    else:
        out.write(dot)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ephs", description="Check, flatten, simulate and draw EPHS models.")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("file", help="model file")
    common.add_argument("--samples", type=int, default=64, help="validator sample count (default 64)")
    common.add_argument("--seed", type=int, default=0, help="validator sampling seed (default 0)")

    p = sub.add_parser("check", parents=[common], help="validate components and systems")
    p.set_defaults(func=cmd_check)
    p = sub.add_parser("flatten", parents=[common], help="print components, junctions and equations")
    p.add_argument("--system", required=True)
    p.set_defaults(func=cmd_flatten)
    p = sub.add_parser("simulate", parents=[common], help="integrate a system and write a CSV trajectory")
    p.add_argument("--system", required=True)
    p.add_argument("--config", help="simulation configuration name")
    p.add_argument("--out", help="CSV output path (stdout if omitted)")
    p.set_defaults(func=cmd_simulate)
    p = sub.add_parser("diagram", parents=[common], help="export a pattern as Graphviz DOT")
    p.add_argument("--pattern", required=True)
    p.add_argument("--out", help="DOT output path (stdout if omitted)")
    p.set_defaults(func=cmd_diagram)
    return parser


def main(argv: Optional[Sequence[str]] = None, out=None) -> int:
    out = out or sys.stdout
    args = build_parser().parse_args(argv)
    if args.samples < 0:
        print("error: --samples must be nonnegative", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args, out)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except (ModelError, NotSimulable, NonFiniteState, ExprError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
