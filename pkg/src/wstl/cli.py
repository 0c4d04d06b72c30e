"""Command-line front end: ``wstl {monitor,compare,synthesize,gradcheck,parse}``."""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from .core import WstlError, signal_from_csv
from .formula import Boolean, Formula, Metric, with_predicate_mode
from .parser import parse, to_text
from .semantics import Engine, SemanticsConfig, Verdict, monitor, rank_signals, robustness_trace
from .synthesis import (
    gradient,
    load_problem,
    synthesize,
    trajectory_csv,
)

log = logging.getLogger("wstl")

EXIT_VERDICT = {Verdict.YES: 0, Verdict.NO: 1, Verdict.INCONCLUSIVE: 2}
EX_USAGE = 64
EX_DATAERR = 65
EX_NOINPUT = 66


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EX_USAGE, f"{self.prog}: error: {message}\n")


def fmt(x: float) -> str:
    """Six significant digits, locale-independent."""
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return f"{x:.6g}"


def _read_text(path_or_text: str) -> str:
    path = Path(path_or_text)
    try:
        if path.is_file():
            return path.read_text(encoding="utf-8")
    except OSError:
        pass
    return path_or_text


def _load_formula(arg: str, predicates: str | None) -> Formula:
    phi = parse(_read_text(arg))
    if predicates == "boolean":
        phi = with_predicate_mode(phi, Boolean())
    elif predicates == "metric":
        phi = with_predicate_mode(phi, Metric())
    return phi


def _load_signal(path: str):
    try:
        text = Path(path).read_text(encoding="utf-8")
    except FileNotFoundError:
        raise FileNotFoundError(f"signal file not found: {path}") from None
    return signal_from_csv(text)


def _config(args) -> SemanticsConfig:
    return SemanticsConfig(Engine(args.engine), beta=args.beta, epsilon=args.epsilon)


def _cmd_monitor(args) -> int:
    phi = _load_formula(args.formula, args.predicates)
    signal = _load_signal(args.signal)
    cfg = _config(args)
    if cfg.engine is Engine.WEIGHTED_SMOOTH and args.epsilon is None:
        log.warning(
            "smooth robustness is only sound beyond a beta-dependent margin; using epsilon = %s",
            fmt(cfg.threshold(phi)),
        )
    report = monitor(phi, signal, args.t, cfg)
    print(fmt(report.value))
    print(report.satisfied.value)
    if args.trace:
        trace = robustness_trace(phi, signal, cfg)
        text = json.dumps(trace, indent=2, sort_keys=True) + "\n"
        if args.trace == "-":
            sys.stdout.write(text)
        else:
            Path(args.trace).write_text(text, encoding="utf-8")
    return EXIT_VERDICT[report.satisfied]


def _cmd_compare(args) -> int:
    phi = _load_formula(args.formula, args.predicates)
    signals = [_load_signal(p) for p in args.signals]
    cfg = _config(args)
    ranked = rank_signals(phi, signals, cfg, args.t)
    threshold = cfg.threshold(phi)
    width = max(len(p) for p in args.signals)
    print(f"{'rank':<5} {'signal':<{width}} {'robustness':>12} verdict")
    for rank, (i, value) in enumerate(ranked, start=1):
        verdict = Verdict.from_value(value, threshold).value
        print(f"{rank:<5} {args.signals[i]:<{width}} {fmt(value):>12} {verdict}")
    return 0


def _cmd_synthesize(args) -> int:
    problem, opts = load_problem(args.config)
    if problem.cfg.engine is not Engine.WEIGHTED_SMOOTH:
        raise UsageError("synthesize requires engine 'weighted-smooth'")
    result = synthesize(problem, opts)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "trajectory.csv").write_text(trajectory_csv(result, problem.system), encoding="utf-8")
    summary = result.summary()
    if args.no_timing:
        summary.pop("wall_time_ms")
    (out / "summary.json").write_text(json.dumps(summary, indent=2) + "\n", encoding="utf-8")
    print(f"objective          {fmt(result.objective)}")
    print(f"robustness_smooth  {fmt(result.robustness_smooth)}")
    print(f"robustness_exact   {fmt(result.robustness_exact)}")
    print(f"satisfied          {result.satisfied.value}")
    print(f"iterations         {result.iterations}")
    print(f"wall_time_ms       {fmt(result.wall_time * 1000.0)}")
    return 0


def _cmd_gradcheck(args) -> int:
    problem, opts = load_problem(args.config)
    system = problem.system
    rng = np.random.default_rng(args.seed)
    worst = 0.0
    for _ in range(args.samples):
        u = rng.uniform(system.u_lo, system.u_hi, size=(problem.T, system.m))
        diff = np.abs(gradient(problem, u) - gradient(problem, u, mode="fd", h=args.h))
        worst = max(worst, float(diff.max()))
    print(f"max |analytic - finite difference| = {fmt(worst)}")
    return 0


def _cmd_parse(args) -> int:
    phi = parse(_read_text(args.formula))
    print(repr(phi) if args.print_ast else to_text(phi))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="wstl", description="Weighted Signal Temporal Logic tools")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def semantics_flags(p, default_engine):
        p.add_argument(
            "--engine", choices=[e.value for e in Engine], default=default_engine.value
        )
        p.add_argument("--beta", type=float, default=10.0, help="sharpness of the smooth engine")
        p.add_argument("--epsilon", type=float, default=None, help="soundness dead-band")
        p.add_argument("-t", type=int, default=0, help="evaluation time step")
        p.add_argument(
            "--predicates",
            choices=["metric", "boolean"],
            default=None,
            help="override every predicate's robustness mode",
        )

    p = sub.add_parser("monitor", help="robustness and verdict of one signal")
    p.add_argument("formula", help="formula text or file")
    p.add_argument("signal", help="signal CSV file")
    semantics_flags(p, Engine.WEIGHTED_TRADITIONAL)
    p.add_argument("--trace", metavar="PATH", help="write per-node robustness JSON ('-' for stdout)")
    p.set_defaults(func=_cmd_monitor)

    p = sub.add_parser("compare", help="rank signals by robustness")
    p.add_argument("formula")
    p.add_argument("signals", nargs="+")
    semantics_flags(p, Engine.WEIGHTED_TRADITIONAL)
    p.set_defaults(func=_cmd_compare)

    p = sub.add_parser("synthesize", help="optimize inputs for a problem config")
    p.add_argument("config")
    p.add_argument("--out-dir", default=".")
    p.add_argument("--no-timing", action="store_true", help="omit wall time from summary.json")
    p.set_defaults(func=_cmd_synthesize)

    p = sub.add_parser("gradcheck", help="compare analytic and finite-difference gradients")
    p.add_argument("config")
    p.add_argument("--h", type=float, default=1e-5)
    p.add_argument("--samples", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_gradcheck)

    p = sub.add_parser("parse", help="print the canonical form of a formula")
    p.add_argument("formula")
    p.add_argument("--print-ast", action="store_true")
    p.set_defaults(func=_cmd_parse)
    return parser


def run(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    if getattr(args, "beta", 1.0) <= 0:
        parser.error("--beta must be positive")
    if getattr(args, "epsilon", None) is not None and args.epsilon < 0:
        parser.error("--epsilon must be non-negative")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"wstl: error: {exc}", file=sys.stderr)
        return EX_USAGE
    except FileNotFoundError as exc:
        print(f"wstl: error: {exc}", file=sys.stderr)
        return EX_NOINPUT
    except (WstlError, ValueError, json.JSONDecodeError) as exc:
        print(f"wstl: error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EX_DATAERR


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
