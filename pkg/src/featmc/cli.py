"""Command-line interface.

    featmc check MODEL --prop NAME_OR_STRING [--engine enum|param|bounded|all]
    featmc bench --family service --sizes 2,4,6 [--engines ...]
    featmc gen --family failure --n 4 [-o FILE]

Exit codes: 0 on success, 1 when a threshold query left some products
unknown, 2 on usage, parse or model errors.
"""

from __future__ import annotations

import argparse
import csv
import sys
import time
from importlib import resources

from .dsl import load_model, parse_model, print_model_file
from .engines.bounded import check_family_bounded
from .engines.enumerative import check_family_enumerative
from .engines.parametric import check_family_parametric, rf_to_text
from .errors import FeatmcError
from .generators import gen_failure_recovery, gen_service_provider
from .rational import rational
from .report import render_csv, render_json, render_table

ENGINE_CHOICES = ("enum", "param", "bounded", "all")

_FAMILIES = {
    "failure": gen_failure_recovery,
    "service": gen_service_provider,
}


def bundled_model_path(name: str):
    """Filesystem path of a model shipped with the package (wiper, minepump)."""
    return resources.files("featmc").joinpath("models", f"{name}.fdl")


def _run_engine(engine: str, model, prop, args):
    if engine == "enum":
        return check_family_enumerative(
            model, prop, workers=args.workers, float_mode=args.float_values
        )
    if engine == "param":
        return check_family_parametric(model, prop, workers=args.workers)
    if engine == "bounded":
        return check_family_bounded(
            model,
            prop,
            epsilon=rational(args.epsilon),
            bound=args.bound,
            max_depth=args.max_depth,
        )
    raise ValueError(engine)


def cmd_check(args) -> int:
    built = load_model(args.model)
    prop = built.property_of(args.prop)
    engines = ["enum", "param", "bounded"] if args.engine == "all" else [args.engine]
    results = []
    for engine in engines:
        results.append(_run_engine(engine, built.system, prop, args))
    products = built.diagram.valid_products()
    renderer = {"table": render_table, "csv": render_csv, "json": render_json}[args.format]
    sys.stdout.write(renderer(products, results, timings=not args.no_timings))
    for result in results:
        for warning in result.warnings:
            print(f"warning [{result.engine}]: {warning}", file=sys.stderr)
    if args.emit_expression:
        emitted = False
        for result in results:
            if result.function is not None:
                with open(args.emit_expression, "w", encoding="utf-8") as handle:
                    handle.write(rf_to_text(result.function))
                emitted = True
        if not emitted:
            print(
                "warning: --emit-expression needs the parametric engine",
                file=sys.stderr,
            )
    unknowns = any(result.unknown_products for result in results)
    return 1 if unknowns else 0


def cmd_bench(args) -> int:
    sizes = [int(s) for s in args.sizes.split(",") if s]
    engines = (
        ["enum", "param", "bounded"]
        if args.engines == "all"
        else args.engines.split(",")
    )
    for engine in engines:
        if engine not in ("enum", "param", "bounded"):
            print(f"error: unknown engine {engine!r}", file=sys.stderr)
            return 2
    generate = _FAMILIES[args.family]
    writer = csv.writer(sys.stdout, lineterminator="\n")
    writer.writerow(["family", "n", "engine", "seconds"])
    for n in sizes:
        built = parse_model(print_model_file(generate(n)))
        prop = built.property_of(args.prop)
        for engine in engines:
            started = time.perf_counter()
            _run_engine(engine, built.system, prop, args)
            elapsed = time.perf_counter() - started
            writer.writerow([args.family, n, engine, f"{elapsed:.4f}"])
            sys.stdout.flush()
    return 0


def cmd_gen(args) -> int:
    text = print_model_file(_FAMILIES[args.family](args.n))
    if args.output:
        with open(args.output, "w", encoding="utf-8") as handle:
            handle.write(text)
    else:
        sys.stdout.write(text)
    return 0


def _add_engine_options(parser):
    parser.add_argument("--epsilon", default="1e-3", help="bounded-engine precision")
    parser.add_argument(
        "--bound", type=int, default=None, help="fixed exploration depth instead of epsilon"
    )
    parser.add_argument(
        "--max-depth", type=int, default=100_000, help="bounded-engine depth ceiling"
    )
    parser.add_argument("--workers", type=int, default=1, help="per-product parallelism")
    parser.add_argument(
        "--float",
        dest="float_values",
        action="store_true",
        help="float64 value iteration in the enumerative engine",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="featmc",
        description="Family-based probabilistic model checking for product lines",
    )
    commands = parser.add_subparsers(dest="command", required=True)

    check = commands.add_parser("check", help="verify a property on a model file")
    check.add_argument("model", help="path to a .fdl model file")
    check.add_argument("--prop", required=True, help="property name or literal string")
    check.add_argument("--engine", choices=ENGINE_CHOICES, default="all")
    check.add_argument("--format", choices=("table", "csv", "json"), default="table")
    check.add_argument("--emit-expression", default=None, metavar="PATH")
    check.add_argument("--no-timings", action="store_true", help="omit timing rows")
    _add_engine_options(check)
    check.set_defaults(func=cmd_check)

    bench = commands.add_parser("bench", help="time the engines on generated models")
    bench.add_argument("--family", choices=sorted(_FAMILIES), required=True)
    bench.add_argument("--sizes", default="2,4,6", help="comma-separated feature counts")
    bench.add_argument("--engines", default="all", help="comma-separated engine list")
    bench.add_argument("--prop", default="fail_risk")
    _add_engine_options(bench)
    bench.set_defaults(func=cmd_bench)

    gen = commands.add_parser("gen", help="emit a generated model file")
    gen.add_argument("--family", choices=sorted(_FAMILIES), required=True)
    gen.add_argument("--n", type=int, required=True)
    gen.add_argument("-o", "--output", default=None)
    gen.set_defaults(func=cmd_gen)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code not in (0, None) else 0
    try:
        return args.func(args)
    except FeatmcError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
